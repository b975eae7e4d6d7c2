#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pseudeq/pseudogame.hpp"
#include "pseudeq/rng.hpp"
#include "pseudeq/tensor.hpp"

namespace pseudeq {

enum class UtilityFamily { Linear, CobbDouglas, Leontief, CES };

inline std::string to_string(UtilityFamily f) {
  switch (f) {
    case UtilityFamily::Linear: return "linear";
    case UtilityFamily::CobbDouglas: return "cobb_douglas";
    case UtilityFamily::Leontief: return "leontief";
    default: return "ces";
  }
}

inline UtilityFamily family_from_string(const std::string& s) {
  if (s == "linear") return UtilityFamily::Linear;
  if (s == "cobb_douglas") return UtilityFamily::CobbDouglas;
  if (s == "leontief") return UtilityFamily::Leontief;
  if (s == "ces") return UtilityFamily::CES;
  throw ValidationError("unknown utility family: " + s);
}

struct ExchangeEconomy {
  int n_buyers = 0;
  int m_goods = 0;
  Tensor V;  // n x m valuations
  Tensor E;  // n x m endowments
  std::vector<double> rho;
  UtilityFamily family = UtilityFamily::Linear;
  std::uint64_t seed = 0;
};

struct MarketOutcome {
  std::vector<double> prices;  // length m, on the unit simplex
  Tensor allocation;           // n x m, nonnegative
};

inline constexpr double kPriceFloor = 1e-9;

// Floor at kPriceFloor, then renormalize back onto the simplex.
inline std::vector<double> floor_prices(std::span<const double> p) {
  std::vector<double> out(p.begin(), p.end());
  double s = 0.0;
  for (double& x : out) {
    if (!std::isfinite(x)) throw ValidationError("floor_prices: non-finite price");
    x = std::max(x, kPriceFloor);
    s += x;
  }
  for (double& x : out) x /= s;
  return out;
}

// ---------------------------------------------------------------------------
// Utility families

inline double utility(const ExchangeEconomy& econ, int buyer,
                      std::span<const double> x) {
  const int m = econ.m_goods;
  switch (econ.family) {
    case UtilityFamily::Linear: {
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += econ.V.at(buyer, j) * x[j];
      return s;
    }
    case UtilityFamily::CobbDouglas: {
      double lg = 0.0;
      for (int j = 0; j < m; ++j) {
        double v = econ.V.at(buyer, j);
        if (v == 0.0) continue;
        if (x[j] <= 0.0) return 0.0;
        lg += v * std::log(x[j]);
      }
      return std::exp(lg);
    }
    case UtilityFamily::Leontief: {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < m; ++j) {
        double v = econ.V.at(buyer, j);
        if (v > 0.0) best = std::min(best, x[j] / v);
      }
      return std::isfinite(best) ? best : 0.0;
    }
    case UtilityFamily::CES: {
      double rho = econ.rho[buyer];
      // log-space: u = exp(logsumexp_j(log v_j + rho log x_j) / rho)
      double mx = -std::numeric_limits<double>::infinity();
      std::vector<double> terms;
      terms.reserve(m);
      for (int j = 0; j < m; ++j) {
        double v = econ.V.at(buyer, j);
        if (v == 0.0) continue;
        double t;
        if (x[j] <= 0.0)
          t = rho > 0.0 ? -std::numeric_limits<double>::infinity()
                        : std::numeric_limits<double>::infinity();
        else
          t = std::log(v) + rho * std::log(x[j]);
        terms.push_back(t);
        mx = std::max(mx, t);
      }
      if (terms.empty() || mx == -std::numeric_limits<double>::infinity()) return 0.0;
      if (mx == std::numeric_limits<double>::infinity()) return 0.0;  // rho<0 limit
      double s = 0.0;
      for (double t : terms) s += std::exp(t - mx);
      double lse = mx + std::log(s);
      return std::exp(lse / rho);
    }
  }
  return 0.0;
}

// Analytic (sub)gradient. May be non-finite on boundary points; callers in
// descent loops skip such steps.
inline std::vector<double> utility_grad(const ExchangeEconomy& econ, int buyer,
                                        std::span<const double> x) {
  const int m = econ.m_goods;
  std::vector<double> g(m, 0.0);
  switch (econ.family) {
    case UtilityFamily::Linear:
      for (int j = 0; j < m; ++j) g[j] = econ.V.at(buyer, j);
      break;
    case UtilityFamily::CobbDouglas: {
      double u = utility(econ, buyer, x);
      for (int j = 0; j < m; ++j) {
        double v = econ.V.at(buyer, j);
        g[j] = v == 0.0 ? 0.0 : u * v / x[j];
      }
      break;
    }
    case UtilityFamily::Leontief: {
      int arg = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < m; ++j) {
        double v = econ.V.at(buyer, j);
        if (v > 0.0 && x[j] / v < best) {
          best = x[j] / v;
          arg = j;
        }
      }
      if (arg >= 0) g[arg] = 1.0 / econ.V.at(buyer, arg);
      break;
    }
    case UtilityFamily::CES: {
      double rho = econ.rho[buyer];
      double u = utility(econ, buyer, x);
      for (int j = 0; j < m; ++j) {
        double v = econ.V.at(buyer, j);
        g[j] = v == 0.0 ? 0.0 : std::pow(u, 1.0 - rho) * v * std::pow(x[j], rho - 1.0);
      }
      break;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Closed-form demand

inline std::vector<double> demand(const ExchangeEconomy& econ, int buyer,
                                  std::span<const double> prices, double budget) {
  const int m = econ.m_goods;
  if (static_cast<int>(prices.size()) != m)
    throw ValidationError("demand: price dimension mismatch");
  for (double p : prices)
    if (!(p > 0.0) || !std::isfinite(p))
      throw ValidationError("demand: nonpositive price after flooring");
  if (budget < 0.0) throw ValidationError("demand: negative budget");

  std::vector<double> x(m, 0.0);
  switch (econ.family) {
    case UtilityFamily::Linear: {
      int arg = 0;
      double best = -1.0;
      for (int j = 0; j < m; ++j) {
        double bang = econ.V.at(buyer, j) / prices[j];
        if (bang > best) {  // strict: lowest index wins ties
          best = bang;
          arg = j;
        }
      }
      x[arg] = budget / prices[arg];
      break;
    }
    case UtilityFamily::CobbDouglas: {
      double vsum = 0.0;
      for (int j = 0; j < m; ++j) vsum += econ.V.at(buyer, j);
      for (int j = 0; j < m; ++j)
        x[j] = (econ.V.at(buyer, j) / vsum) * budget / prices[j];
      break;
    }
    case UtilityFamily::Leontief: {
      double pv = 0.0;
      for (int j = 0; j < m; ++j) pv += prices[j] * econ.V.at(buyer, j);
      for (int j = 0; j < m; ++j) x[j] = econ.V.at(buyer, j) * budget / pv;
      break;
    }
    case UtilityFamily::CES: {
      double rho = econ.rho[buyer];
      if (rho == 1.0) {
        // reduces to linear
        ExchangeEconomy lin = econ;
        lin.family = UtilityFamily::Linear;
        return demand(lin, buyer, prices, budget);
      }
      double a = 1.0 / (1.0 - rho);
      // log x_j = log B + a(log v_j - log p_j) - logsumexp_k(a log v_k - a rho... )
      std::vector<double> logterm(m, -std::numeric_limits<double>::infinity());
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < m; ++j) {
        double v = econ.V.at(buyer, j);
        if (v == 0.0) continue;
        // denominator terms: v^a * p^(1 - a) (= v^a p^{-rho/(1-rho)} p)
        logterm[j] = a * std::log(v) + (1.0 - a) * std::log(prices[j]);
        mx = std::max(mx, logterm[j]);
      }
      double s = 0.0;
      for (int j = 0; j < m; ++j)
        if (logterm[j] > -std::numeric_limits<double>::infinity())
          s += std::exp(logterm[j] - mx);
      double logden = mx + std::log(s);
      for (int j = 0; j < m; ++j) {
        double v = econ.V.at(buyer, j);
        if (v == 0.0 || budget == 0.0) {
          x[j] = 0.0;
          continue;
        }
        double lx = std::log(budget) + a * (std::log(v) - std::log(prices[j])) - logden;
        x[j] = std::exp(lx);
      }
      break;
    }
  }
  if (!all_finite(x)) throw NumericalError("demand: non-finite bundle");
  return x;
}

// z_j = aggregate demand at p minus aggregate endowment.
inline std::vector<double> excess_demand(const ExchangeEconomy& econ,
                                         std::span<const double> prices) {
  std::vector<double> z(econ.m_goods, 0.0);
  for (int i = 0; i < econ.n_buyers; ++i) {
    double budget = 0.0;
    for (int j = 0; j < econ.m_goods; ++j) budget += econ.E.at(i, j) * prices[j];
    auto d = demand(econ, i, prices, budget);
    for (int j = 0; j < econ.m_goods; ++j) z[j] += d[j] - econ.E.at(i, j);
  }
  return z;
}

// Aggregate net demand of an outcome's allocation (the seller's objective
// vector): col_sum(X) - col_sum(E).
inline std::vector<double> outcome_net_demand(const ExchangeEconomy& econ,
                                              const Tensor& allocation) {
  std::vector<double> z(econ.m_goods, 0.0);
  for (int i = 0; i < econ.n_buyers; ++i)
    for (int j = 0; j < econ.m_goods; ++j)
      z[j] += allocation.at(i, j) - econ.E.at(i, j);
  return z;
}

// ---------------------------------------------------------------------------
// Pseudo-game view: n buyers + 1 seller, GNE set = CE set.

namespace detail {
inline double buyer_budget(const ExchangeEconomy& econ, int i,
                           std::span<const double> p) {
  double b = 0.0;
  for (int j = 0; j < econ.m_goods; ++j) b += econ.E.at(i, j) * p[j];
  return b;
}
}  // namespace detail

inline MarketOutcome outcome_from_profile(const ExchangeEconomy& econ,
                                          const ActionProfile& a) {
  MarketOutcome o;
  auto p = a.player(econ.n_buyers);
  o.prices.assign(p.begin(), p.end());
  o.allocation = Tensor::zeros({static_cast<std::size_t>(econ.n_buyers),
                                static_cast<std::size_t>(econ.m_goods)});
  for (int i = 0; i < econ.n_buyers; ++i) {
    auto row = a.player(i);
    for (int j = 0; j < econ.m_goods; ++j) o.allocation.at(i, j) = row[j];
  }
  return o;
}

inline ActionProfile profile_from_outcome(const ExchangeEconomy& econ,
                                          const MarketOutcome& o) {
  std::vector<int> dims(econ.n_buyers + 1, econ.m_goods);
  ActionProfile a = ActionProfile::zeros(dims);
  for (int i = 0; i < econ.n_buyers; ++i)
    for (int j = 0; j < econ.m_goods; ++j)
      a.x[a.offset(i) + j] = o.allocation.at(i, j);
  for (int j = 0; j < econ.m_goods; ++j)
    a.x[a.offset(econ.n_buyers) + j] = o.prices[j];
  return a;
}

inline MarketOutcome uniform_feasible_outcome(const ExchangeEconomy& econ, Rng& rng);

inline PseudoGame exchange_pseudogame(const ExchangeEconomy& economy) {
  auto econ = std::make_shared<ExchangeEconomy>(economy);
  const int n = econ->n_buyers, m = econ->m_goods;
  PseudoGame g;
  g.n_players = n + 1;
  g.action_dims.assign(n + 1, m);
  // buyers' boxes scale with total supply; prices live in [0,1]
  double supply_max = 0.0;
  for (int j = 0; j < m; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += econ->E.at(i, j);
    supply_max = std::max(supply_max, s);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      g.box_lo.push_back(0.0);
      g.box_hi.push_back(10.0 * supply_max);
    }
  for (int j = 0; j < m; ++j) {
    g.box_lo.push_back(0.0);
    g.box_hi.push_back(1.0);
  }

  g.payoff = [econ, n, m](const ActionProfile& a, int player) {
    if (player < n) return utility(*econ, player, a.player(player));
    auto p = a.player(n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      auto row = a.player(i);
      for (int j = 0; j < m; ++j) s += p[j] * (row[j] - econ->E.at(i, j));
    }
    return s;
  };
  g.constraints = [econ, n, m](const ActionProfile& a, int player) {
    if (player < n) {
      auto x = a.player(player);
      auto p = a.player(n);
      std::vector<double> out(x.begin(), x.end());
      double budget = detail::buyer_budget(*econ, player, p);
      double spend = 0.0;
      for (int j = 0; j < m; ++j) spend += x[j] * p[j];
      out.push_back(budget - spend);
      return out;
    }
    auto p = a.player(n);
    std::vector<double> out(p.begin(), p.end());
    double s = std::accumulate(p.begin(), p.end(), 0.0);
    out.push_back(1.0 - s);
    out.push_back(s - 1.0);
    return out;
  };
  g.feasible_project = [econ, n, m](const ActionProfile& a) {
    ActionProfile out = a;
    auto proj = simplex_project(a.player(n));
    proj = floor_prices(proj);
    std::copy(proj.begin(), proj.end(), out.x.begin() + out.offset(n));
    for (int i = 0; i < n; ++i) {
      double budget = detail::buyer_budget(*econ, i, proj);
      double spend = 0.0;
      int off = out.offset(i);
      for (int j = 0; j < m; ++j) {
        out.x[off + j] = std::max(0.0, out.x[off + j]);
        spend += out.x[off + j] * proj[j];
      }
      if (spend > budget && spend > 0.0) {
        double c = budget / spend;
        for (int j = 0; j < m; ++j) out.x[off + j] *= c;
      }
    }
    return out;
  };
  g.best_response = [econ, n, m](int player, const ActionProfile& a) {
    auto p = a.player(n);
    if (player < n) {
      auto fp = floor_prices(p);
      double budget = detail::buyer_budget(*econ, player, p);
      auto d = demand(*econ, player, fp, budget);
      double spend = 0.0;
      for (int j = 0; j < m; ++j) spend += d[j] * p[j];
      if (spend > budget && spend > 0.0)
        for (double& v : d) v *= budget / spend;
      return d;
    }
    // seller: linear objective over the simplex peaks at a vertex
    std::vector<double> z(m, 0.0);
    for (int i = 0; i < n; ++i) {
      auto row = a.player(i);
      for (int j = 0; j < m; ++j) z[j] += row[j] - econ->E.at(i, j);
    }
    int arg = 0;
    for (int j = 1; j < m; ++j)
      if (z[j] > z[arg]) arg = j;
    std::vector<double> out(m, 0.0);
    out[arg] = 1.0;
    return out;
  };
  g.payoff_grad_own = [econ, n, m](const ActionProfile& a, int player) {
    if (player < n) return utility_grad(*econ, player, a.player(player));
    std::vector<double> z(m, 0.0);
    for (int i = 0; i < n; ++i) {
      auto row = a.player(i);
      for (int j = 0; j < m; ++j) z[j] += row[j] - econ->E.at(i, j);
    }
    return z;
  };
  g.payoff_grad_full = [econ, n, m](const ActionProfile& a, int player) {
    std::vector<double> grads(a.x.size(), 0.0);
    if (player < n) {
      auto gown = utility_grad(*econ, player, a.player(player));
      std::copy(gown.begin(), gown.end(), grads.begin() + a.offset(player));
      return grads;
    }
    auto p = a.player(n);
    for (int i = 0; i < n; ++i) {
      int off = a.offset(i);
      for (int j = 0; j < m; ++j) grads[off + j] = p[j];
    }
    std::vector<double> z(m, 0.0);
    for (int i = 0; i < n; ++i) {
      auto row = a.player(i);
      for (int j = 0; j < m; ++j) z[j] += row[j] - econ->E.at(i, j);
    }
    std::copy(z.begin(), z.end(), grads.begin() + a.offset(n));
    return grads;
  };
  g.project_deviation = [econ, n, m](int player, std::span<const double> cand,
                                     const ActionProfile& a) {
    if (player == n) return simplex_project(cand);
    auto p = a.player(n);
    double budget = detail::buyer_budget(*econ, player, p);
    std::vector<double> x(cand.begin(), cand.end());
    double spend = 0.0;
    for (int j = 0; j < m; ++j) {
      x[j] = std::max(0.0, x[j]);
      spend += x[j] * p[j];
    }
    if (spend > budget && spend > 0.0)
      for (double& v : x) v *= budget / spend;
    return x;
  };
  g.sample_feasible = [econ](Rng& rng) {
    return profile_from_outcome(*econ, uniform_feasible_outcome(*econ, rng));
  };
  return g;
}

// ---------------------------------------------------------------------------

struct CeDiagnostics {
  bool ok = false;
  std::string reason;          // empty when ok
  double worst_buyer_gap = 0;  // utility shortfall vs demand
  int worst_buyer = -1;
  double worst_clearing_violation = 0;
  double walras_gap = 0;
};

// True iff every buyer's bundle is utility-maximizing within budget (gap vs
// closed-form demand <= tol), markets clear up to tol, and p.(sum X - sum E)
// is within tol of zero.
inline CeDiagnostics is_competitive_equilibrium(const ExchangeEconomy& econ,
                                                const MarketOutcome& o, double tol) {
  CeDiagnostics d;
  const int n = econ.n_buyers, m = econ.m_goods;
  double psum = std::accumulate(o.prices.begin(), o.prices.end(), 0.0);
  if (std::abs(psum - 1.0) > 1e-6) {
    d.reason = "prices not on simplex";
    return d;
  }
  double pmin = *std::min_element(o.prices.begin(), o.prices.end());
  if (pmin < kPriceFloor) {
    d.reason = "price below floor";
    return d;
  }
  for (int i = 0; i < n; ++i) {
    double budget = 0.0, spend = 0.0;
    for (int j = 0; j < m; ++j) {
      if (o.allocation.at(i, j) < -tol) {
        d.reason = "negative allocation";
        return d;
      }
      budget += econ.E.at(i, j) * o.prices[j];
      spend += o.allocation.at(i, j) * o.prices[j];
    }
    if (spend > budget + 1e-9) {
      d.reason = "budget violation";
      d.worst_buyer = i;
      return d;
    }
    auto opt = demand(econ, i, o.prices, budget);
    std::vector<double> xi(m);
    for (int j = 0; j < m; ++j) xi[j] = o.allocation.at(i, j);
    double gap = utility(econ, i, opt) - utility(econ, i, xi);
    if (gap > d.worst_buyer_gap) {
      d.worst_buyer_gap = gap;
      d.worst_buyer = i;
    }
  }
  if (d.worst_buyer_gap > tol) {
    d.reason = "buyer regret";
    return d;
  }
  auto z = outcome_net_demand(econ, o.allocation);
  for (int j = 0; j < m; ++j)
    d.worst_clearing_violation = std::max(d.worst_clearing_violation, z[j]);
  if (d.worst_clearing_violation > tol) {
    d.reason = "market clearing";
    return d;
  }
  for (int j = 0; j < m; ++j) d.walras_gap += o.prices[j] * z[j];
  if (std::abs(d.walras_gap) > tol) {
    d.reason = "value of excess demand";
    return d;
  }
  d.ok = true;
  return d;
}

// ---------------------------------------------------------------------------
// Sampling

// rho ranges; a second interval (mixed economies) is enabled when two == true.
struct RhoSpec {
  double lo1 = 0.5, hi1 = 1.0;
  double lo2 = 0.0, hi2 = 0.0;
  bool two = false;

  static RhoSpec gross_substitutes() { return {0.5, 1.0, 0, 0, false}; }
  static RhoSpec gross_complements() { return {-1.25, -0.75, 0, 0, false}; }
  static RhoSpec mixed() { return {0.5, 1.0, -1.25, -0.75, true}; }

  void validate() const {
    auto check = [](double lo, double hi) {
      if (lo > hi) throw ValidationError("RhoSpec: empty interval");
      if (hi > 1.0) throw ValidationError("RhoSpec: rho must be <= 1");
      if (lo <= 0.0 && hi >= 0.0)
        throw ValidationError("RhoSpec: interval must exclude 0 for CES");
    };
    check(lo1, hi1);
    if (two) check(lo2, hi2);
  }
};

// V, E entries ~ Unif[1e-9, 1]; CES rho per buyer from the spec'd interval(s).
// Non-CES families carry a Unif[0.25, 0.75] filler rho used only as a model
// input feature.
inline ExchangeEconomy sample_economy(UtilityFamily family, int n_buyers, int m_goods,
                                      const RhoSpec& rho_range, std::uint64_t seed) {
  if (family == UtilityFamily::CES) rho_range.validate();
  Rng rng(seed);
  ExchangeEconomy econ;
  econ.n_buyers = n_buyers;
  econ.m_goods = m_goods;
  econ.family = family;
  econ.seed = seed;
  econ.V = Tensor::zeros({static_cast<std::size_t>(n_buyers),
                          static_cast<std::size_t>(m_goods)});
  econ.E = Tensor::zeros(econ.V.shape);
  for (double& v : econ.V.values) v = rng.uniform(1e-9, 1.0);
  for (double& v : econ.E.values) v = rng.uniform(1e-9, 1.0);
  econ.rho.resize(n_buyers);
  for (int i = 0; i < n_buyers; ++i) {
    if (family == UtilityFamily::CES) {
      if (rho_range.two && rng.uniform() < 0.5)
        econ.rho[i] = rng.uniform(rho_range.lo2, rho_range.hi2);
      else
        econ.rho[i] = rng.uniform(rho_range.lo1, rho_range.hi1);
    } else {
      econ.rho[i] = rng.uniform(0.25, 0.75);
    }
  }
  return econ;
}

// The 3x3 Leontief economy with identity endowments and cyclic valuations.
inline ExchangeEconomy scarf_economy() {
  ExchangeEconomy econ;
  econ.n_buyers = 3;
  econ.m_goods = 3;
  econ.family = UtilityFamily::Leontief;
  econ.E = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  econ.V = Tensor::matrix(3, 3, {0, 1, 0, 0, 0, 1, 1, 0, 0});
  econ.rho = {0.5, 0.5, 0.5};
  return econ;
}

// Prices uniform on the simplex; allocations from per-buyer random budget
// shares scaled by the allocation coefficients (E_i.p)/p_j, hence budget
// feasible by construction.
inline MarketOutcome uniform_feasible_outcome(const ExchangeEconomy& econ, Rng& rng) {
  MarketOutcome o;
  o.prices = floor_prices(rng.simplex(econ.m_goods));
  o.allocation = Tensor::zeros({static_cast<std::size_t>(econ.n_buyers),
                                static_cast<std::size_t>(econ.m_goods)});
  for (int i = 0; i < econ.n_buyers; ++i) {
    double budget = detail::buyer_budget(econ, i, o.prices);
    auto shares = rng.uniform_shares(econ.m_goods);
    for (int j = 0; j < econ.m_goods; ++j)
      o.allocation.at(i, j) = shares[j] * budget / o.prices[j];
  }
  return o;
}

inline nlohmann::json economy_to_json(const ExchangeEconomy& econ) {
  nlohmann::json V = nlohmann::json::array(), E = nlohmann::json::array();
  for (int i = 0; i < econ.n_buyers; ++i) {
    nlohmann::json vr = nlohmann::json::array(), er = nlohmann::json::array();
    for (int j = 0; j < econ.m_goods; ++j) {
      vr.push_back(econ.V.at(i, j));
      er.push_back(econ.E.at(i, j));
    }
    V.push_back(std::move(vr));
    E.push_back(std::move(er));
  }
  return {{"family", to_string(econ.family)},
          {"V", std::move(V)},
          {"E", std::move(E)},
          {"rho", econ.rho},
          {"seed", econ.seed}};
}

inline ExchangeEconomy economy_from_json(const nlohmann::json& j) {
  ExchangeEconomy econ;
  econ.family = family_from_string(j.at("family").get<std::string>());
  const auto& V = j.at("V");
  econ.n_buyers = static_cast<int>(V.size());
  econ.m_goods = econ.n_buyers ? static_cast<int>(V[0].size()) : 0;
  econ.V = Tensor::zeros({static_cast<std::size_t>(econ.n_buyers),
                          static_cast<std::size_t>(econ.m_goods)});
  econ.E = Tensor::zeros(econ.V.shape);
  for (int i = 0; i < econ.n_buyers; ++i)
    for (int jj = 0; jj < econ.m_goods; ++jj) {
      econ.V.at(i, jj) = j.at("V")[i][jj].get<double>();
      econ.E.at(i, jj) = j.at("E")[i][jj].get<double>();
    }
  econ.rho = j.at("rho").get<std::vector<double>>();
  econ.seed = j.value("seed", std::uint64_t{0});
  return econ;
}

}  // namespace pseudeq
