#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pseudeq/polytope.hpp"
#include "pseudeq/pseudogame.hpp"
#include "pseudeq/rng.hpp"

namespace pseudeq {

// Cap-and-trade mechanism: country i chooses emissions e_i and a row of
// cross-country investments I_i., with quadratic revenue/cost and linear
// damage from net emissions.
struct KyotoInstance {
  int n = 0;
  std::vector<double> rev;    // revenue parameters (beta)
  std::vector<double> dmg;    // damage rates (delta)
  std::vector<double> gamma;  // investment return rates, > 0
  std::vector<double> cap;    // emission caps, >= 0
  std::uint64_t seed = 0;
};

// Flat layout over n(n+1) coordinates: e first, then I row-major.
struct KyotoAction {
  std::vector<double> e;  // length n
  Tensor I;               // n x n

  static KyotoAction zeros(int n) {
    KyotoAction a;
    a.e.assign(n, 0.0);
    a.I = Tensor::zeros({static_cast<std::size_t>(n), static_cast<std::size_t>(n)});
    return a;
  }

  std::vector<double> flat() const {
    std::vector<double> x = e;
    x.insert(x.end(), I.values.begin(), I.values.end());
    return x;
  }

  static KyotoAction from_flat(int n, std::span<const double> x) {
    KyotoAction a;
    a.e.assign(x.begin(), x.begin() + n);
    a.I = Tensor({static_cast<std::size_t>(n), static_cast<std::size_t>(n)},
                 {x.begin() + n, x.end()});
    return a;
  }
};

// R_i = e_i (beta_i - e_i/2)
// C_i = 1/2 (I_ii^2 + sum_{j != i} [(I_ij + I_jj)^2 - I_jj^2])
// D_i = delta_i sum_j (e_j - sum_k I_jk)
inline double country_payoff(const KyotoInstance& inst, int country,
                             const KyotoAction& a) {
  const int n = inst.n;
  double revenue = a.e[country] * (inst.rev[country] - 0.5 * a.e[country]);
  double cost = 0.5 * a.I.at(country, country) * a.I.at(country, country);
  for (int j = 0; j < n; ++j) {
    if (j == country) continue;
    double own = a.I.at(country, j), host = a.I.at(j, j);
    cost += 0.5 * ((own + host) * (own + host) - host * host);
  }
  double net = 0.0;
  for (int j = 0; j < n; ++j) {
    net += a.e[j];
    for (int k = 0; k < n; ++k) net -= a.I.at(j, k);
  }
  return revenue - cost - inst.dmg[country] * net;
}

// Gradient of country_payoff in every flat coordinate (e then I row-major).
inline std::vector<double> country_payoff_grad(const KyotoInstance& inst, int country,
                                               const KyotoAction& a) {
  const int n = inst.n;
  std::vector<double> g(n + n * n, 0.0);
  for (int j = 0; j < n; ++j) g[j] = -inst.dmg[country];
  g[country] += inst.rev[country] - a.e[country];
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) g[n + j * n + k] = inst.dmg[country];
  // own row of the cost
  g[n + country * n + country] -= a.I.at(country, country);
  for (int j = 0; j < n; ++j) {
    if (j == country) continue;
    double pair = a.I.at(country, j) + a.I.at(j, j);
    g[n + country * n + j] -= pair;      // d cost / d I_ij
    g[n + j * n + j] -= pair - a.I.at(j, j);  // d cost / d I_jj
  }
  return g;
}

// Halfspace system over (e, vec(I)): n cap rows, n transfer rows, and
// n(n+1) nonnegativity rows, in that order.
inline Halfspaces joint_halfspaces(const KyotoInstance& inst) {
  const int n = inst.n;
  const int dim = n + n * n;
  const int rows = 2 * n + dim;
  Halfspaces hs;
  hs.A = Tensor::zeros({static_cast<std::size_t>(rows), static_cast<std::size_t>(dim)});
  hs.b.assign(rows, 0.0);
  // cap: e_i - sum_j I_ij gamma_j <= cap_i
  for (int i = 0; i < n; ++i) {
    hs.A.at(i, i) = 1.0;
    for (int j = 0; j < n; ++j) hs.A.at(i, n + i * n + j) = -inst.gamma[j];
    hs.b[i] = inst.cap[i];
  }
  // transfer balance: -e_i + gamma_i sum_j I_ji <= 0
  for (int i = 0; i < n; ++i) {
    hs.A.at(n + i, i) = -1.0;
    for (int j = 0; j < n; ++j) hs.A.at(n + i, n + j * n + i) = inst.gamma[i];
  }
  // nonnegativity
  for (int k = 0; k < dim; ++k) hs.A.at(2 * n + k, k) = -1.0;
  return hs;
}

// Box scale that keeps the polytope bounded; flagged when it binds.
inline double kyoto_box_cap(const KyotoInstance& inst) {
  double cap_max = *std::max_element(inst.cap.begin(), inst.cap.end());
  double gamma_max = *std::max_element(inst.gamma.begin(), inst.gamma.end());
  return std::max(1.0, cap_max) * (1.0 + gamma_max) * 4.0;
}

inline PolytopeVertices kyoto_vertices(const KyotoInstance& inst) {
  return enumerate_vertices(joint_halfspaces(inst), kyoto_box_cap(inst));
}

namespace detail {

// Halfspace system of one player's deviation set over (e_i, I_i.) with the
// rest of the profile substituted. In individual mode only the player's own
// cap/transfer/nonnegativity rows appear; in joint mode every row of the
// joint system that touches the player's variables is kept (the others are
// constants and are checked separately).
inline Halfspaces player_slice(const KyotoInstance& inst, int player,
                               const KyotoAction& fixed, DeviationMode mode,
                               double box_cap) {
  const int n = inst.n;
  const int d = n + 1;  // (e_i, I_i1..I_in)
  Halfspaces hs;
  std::vector<std::vector<double>> rows;
  std::vector<double> bs;

  // own cap: e - sum_j I_ij gamma_j <= cap_i
  {
    std::vector<double> row(d, 0.0);
    row[0] = 1.0;
    for (int j = 0; j < n; ++j) row[1 + j] = -inst.gamma[j];
    rows.push_back(row);
    bs.push_back(inst.cap[player]);
  }
  // own transfer: -e + gamma_i (I_ii + sum_{j != i} I_ji) <= 0
  {
    std::vector<double> row(d, 0.0);
    row[0] = -1.0;
    row[1 + player] = inst.gamma[player];
    double c = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != player) c += inst.gamma[player] * fixed.I.at(j, player);
    rows.push_back(row);
    bs.push_back(-c);
  }
  if (mode == DeviationMode::joint) {
    // other countries' transfer rows involve I_ik for k != player:
    // -e_k + gamma_k (I_ik + sum_{j != player} I_jk) <= 0
    for (int k = 0; k < n; ++k) {
      if (k == player) continue;
      std::vector<double> row(d, 0.0);
      row[1 + k] = inst.gamma[k];
      double sum_others = 0.0;
      for (int j = 0; j < n; ++j)
        if (j != player) sum_others += inst.gamma[k] * fixed.I.at(j, k);
      rows.push_back(row);
      bs.push_back(fixed.e[k] - sum_others);
    }
  }
  // nonnegativity
  for (int k = 0; k < d; ++k) {
    std::vector<double> row(d, 0.0);
    row[k] = -1.0;
    rows.push_back(row);
    bs.push_back(0.0);
  }
  // upper box
  for (int k = 0; k < d; ++k) {
    std::vector<double> row(d, 0.0);
    row[k] = 1.0;
    rows.push_back(row);
    bs.push_back(box_cap);
  }
  hs.A = Tensor::zeros({rows.size(), static_cast<std::size_t>(d)});
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int j = 0; j < d; ++j) hs.A.at(r, j) = rows[r][j];
  hs.b = std::move(bs);
  return hs;
}

inline KyotoAction action_from_profile(int n, const ActionProfile& a) {
  KyotoAction act = KyotoAction::zeros(n);
  for (int i = 0; i < n; ++i) {
    auto block = a.player(i);
    act.e[i] = block[0];
    for (int j = 0; j < n; ++j) act.I.at(i, j) = block[1 + j];
  }
  return act;
}

inline ActionProfile profile_from_action(int n, const KyotoAction& act) {
  std::vector<int> dims(n, n + 1);
  ActionProfile a = ActionProfile::zeros(dims);
  for (int i = 0; i < n; ++i) {
    int off = a.offset(i);
    a.x[off] = act.e[i];
    for (int j = 0; j < n; ++j) a.x[off + 1 + j] = act.I.at(i, j);
  }
  return a;
}

// Best response of one player by projected gradient ascent over simplex
// weights of the deviation polytope's vertices.
inline std::vector<double> vertex_hull_best_response(
    const KyotoInstance& inst, int player, const ActionProfile& profile,
    DeviationMode mode, std::uint64_t seed) {
  const int n = inst.n;
  const int d = n + 1;
  KyotoAction fixed = action_from_profile(n, profile);
  Halfspaces slice = player_slice(inst, player, fixed, mode, kyoto_box_cap(inst));
  // player_slice already includes the box rows
  PolytopeVertices pv;
  pv.halfspaces = slice;
  {
    const int rows = static_cast<int>(slice.rows());
    std::vector<int> comb(d);
    for (int i = 0; i < d; ++i) comb[i] = i;
    std::vector<double> M(d * d), rhs(d), x;
    while (true) {
      for (int i = 0; i < d; ++i) {
        rhs[i] = slice.b[comb[i]];
        for (int j = 0; j < d; ++j) M[i * d + j] = slice.A.at(comb[i], j);
      }
      if (detail::solve_linear(M, rhs, d, x) && slice.contains(x, 1e-8)) {
        bool dup = false;
        for (const auto& v : pv.vertices) {
          double dist2 = 0.0;
          for (int j = 0; j < d; ++j) dist2 += (v[j] - x[j]) * (v[j] - x[j]);
          if (std::sqrt(dist2) <= 1e-7) {
            dup = true;
            break;
          }
        }
        if (!dup) pv.vertices.push_back(x);
      }
      int i = d - 1;
      while (i >= 0 && comb[i] == rows - d + i) --i;
      if (i < 0) break;
      ++comb[i];
      for (int j = i + 1; j < d; ++j) comb[j] = comb[j - 1] + 1;
    }
  }
  auto own_block = profile.player(player);
  std::vector<double> best(own_block.begin(), own_block.end());
  if (pv.vertices.empty()) return best;

  auto eval = [&](const std::vector<double>& own) {
    KyotoAction cand = fixed;
    cand.e[player] = own[0];
    for (int j = 0; j < n; ++j) cand.I.at(player, j) = own[1 + j];
    return country_payoff(inst, player, cand);
  };
  auto grad_own = [&](const std::vector<double>& own) {
    KyotoAction cand = fixed;
    cand.e[player] = own[0];
    for (int j = 0; j < n; ++j) cand.I.at(player, j) = own[1 + j];
    auto gfull = country_payoff_grad(inst, player, cand);
    std::vector<double> g(d, 0.0);
    g[0] = gfull[player];
    for (int j = 0; j < n; ++j) g[1 + j] = gfull[n + player * n + j];
    return g;
  };

  const int K = static_cast<int>(pv.vertices.size());
  double best_val = eval(best);
  Rng rng(derive_seed(seed, 0x6b79, player));
  auto combine = [&](const std::vector<double>& lambda) {
    std::vector<double> own(d, 0.0);
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < d; ++j) own[j] += lambda[k] * pv.vertices[k][j];
    return own;
  };
  for (int restart = 0; restart < 5; ++restart) {
    std::vector<double> lambda(K, 1.0 / K);
    if (restart > 0) {
      double s = 0.0;
      for (double& l : lambda) {
        l = rng.exponential();
        s += l;
      }
      for (double& l : lambda) l /= s;
    }
    for (int t = 1; t <= 300; ++t) {
      auto own = combine(lambda);
      double val = eval(own);
      if (val > best_val) {
        best_val = val;
        best = own;
      }
      auto g = grad_own(own);
      std::vector<double> glam(K, 0.0);
      for (int k = 0; k < K; ++k)
        for (int j = 0; j < d; ++j) glam[k] += g[j] * pv.vertices[k][j];
      double norm = 0.0;
      for (double v : glam) norm = std::max(norm, std::abs(v));
      double probe = norm > 0 ? 1.0 / norm : 1.0;
      std::vector<double> trial(K);
      for (int k = 0; k < K; ++k) trial[k] = lambda[k] + probe * glam[k];
      trial = simplex_project(trial);
      // exact line search: payoffs are quadratic with own-block Hessian -I,
      // so along the move dx the gain is tau (g.dx) - tau^2/2 ||dx||^2
      std::vector<double> dlam(K);
      for (int k = 0; k < K; ++k) dlam[k] = trial[k] - lambda[k];
      auto own_trial = combine(trial);
      double gdx = 0.0, dx2 = 0.0;
      for (int j = 0; j < d; ++j) {
        double dx = own_trial[j] - own[j];
        gdx += g[j] * dx;
        dx2 += dx * dx;
      }
      double tau = dx2 > 1e-300 ? std::clamp(gdx / dx2, 0.0, 1.0)
                                : (gdx > 0 ? 1.0 : 0.0);
      double moved = 0.0;
      for (int k = 0; k < K; ++k) {
        lambda[k] += tau * dlam[k];
        moved = std::max(moved, std::abs(tau * dlam[k]));
      }
      if (moved < 1e-14) break;
    }
    auto own = combine(lambda);
    double val = eval(own);
    if (val > best_val) {
      best_val = val;
      best = own;
    }
  }
  return best;
}

}  // namespace detail

// Pseudo-game over (e_i, I_i.) per country. Joint mode restricts deviations
// to actions that keep the whole profile jointly feasible (the VE refinement);
// individual mode uses only the player's own constraint rows.
inline PseudoGame kyoto_pseudogame(const KyotoInstance& instance, DeviationMode mode) {
  auto inst = std::make_shared<KyotoInstance>(instance);
  const int n = inst->n;
  const int d = n + 1;
  PseudoGame g;
  g.n_players = n;
  g.action_dims.assign(n, d);
  g.deviation_mode = mode;
  double box = kyoto_box_cap(*inst);
  g.box_lo.assign(n * d, 0.0);
  g.box_hi.assign(n * d, box);

  g.payoff = [inst, n](const ActionProfile& a, int player) {
    return country_payoff(*inst, player, detail::action_from_profile(n, a));
  };
  g.constraints = [inst, n](const ActionProfile& a, int player) {
    KyotoAction act = detail::action_from_profile(n, a);
    std::vector<double> out;
    // cap slack
    double cap_lhs = act.e[player];
    for (int j = 0; j < n; ++j) cap_lhs -= act.I.at(player, j) * inst->gamma[j];
    out.push_back(inst->cap[player] - cap_lhs);
    // transfer slack
    double tr = act.e[player];
    for (int j = 0; j < n; ++j) tr -= inst->gamma[player] * act.I.at(j, player);
    out.push_back(tr);
    // own nonnegativity
    auto block = a.player(player);
    out.insert(out.end(), block.begin(), block.end());
    return out;
  };
  g.feasible_project = [inst, n](const ActionProfile& a) {
    KyotoAction act = detail::action_from_profile(n, a);
    auto flat = act.flat();
    auto hs = joint_halfspaces(*inst).with_upper_box(kyoto_box_cap(*inst));
    auto proj = project_onto_polytope(hs, flat);
    return detail::profile_from_action(n, KyotoAction::from_flat(n, proj));
  };
  // Own-block Hessian of the payoff is -Identity, so the best response is an
  // exact small QP over the deviation slice. The vertex-hull projected
  // gradient route (detail::vertex_hull_best_response) approximates the same
  // maximizer and is kept as a cross-check.
  g.best_response = [inst, mode](int player, const ActionProfile& a) {
    const int nn = inst->n;
    const int dd = nn + 1;
    KyotoAction fixed = detail::action_from_profile(nn, a);
    Halfspaces slice =
        detail::player_slice(*inst, player, fixed, mode, kyoto_box_cap(*inst));
    KyotoAction zeroed = fixed;
    zeroed.e[player] = 0.0;
    for (int j = 0; j < nn; ++j) zeroed.I.at(player, j) = 0.0;
    auto gflat = country_payoff_grad(*inst, player, zeroed);
    std::vector<double> c(dd, 0.0);
    c[0] = gflat[player];
    for (int j = 0; j < nn; ++j) c[1 + j] = gflat[nn + player * nn + j];
    Tensor Q = Tensor::zeros({static_cast<std::size_t>(dd), static_cast<std::size_t>(dd)});
    for (int j = 0; j < dd; ++j) Q.at(j, j) = -1.0;
    auto qp = max_concave_quadratic(Q, c, slice);
    if (qp.ok) return qp.x;
    auto own = a.player(player);
    return std::vector<double>(own.begin(), own.end());
  };
  g.payoff_grad_own = [inst, n](const ActionProfile& a, int player) {
    KyotoAction act = detail::action_from_profile(n, a);
    auto gfull = country_payoff_grad(*inst, player, act);
    std::vector<double> g2(n + 1, 0.0);
    g2[0] = gfull[player];
    for (int j = 0; j < n; ++j) g2[1 + j] = gfull[n + player * n + j];
    return g2;
  };
  g.payoff_grad_full = [inst, n](const ActionProfile& a, int player) {
    KyotoAction act = detail::action_from_profile(n, a);
    auto gflat = country_payoff_grad(*inst, player, act);
    // reorder from (e, vec(I)) to per-player blocks (e_i, I_i.)
    std::vector<double> out(n * (n + 1), 0.0);
    for (int i = 0; i < n; ++i) {
      out[i * (n + 1)] = gflat[i];
      for (int j = 0; j < n; ++j) out[i * (n + 1) + 1 + j] = gflat[n + i * n + j];
    }
    return out;
  };
  g.sample_feasible = [inst](Rng& rng) {
    // Dirichlet weights over the joint polytope's vertices
    static thread_local std::shared_ptr<const KyotoInstance> cached_inst;
    static thread_local std::shared_ptr<PolytopeVertices> cached_pv;
    if (!cached_pv || cached_inst.get() != inst.get()) {
      cached_pv = std::make_shared<PolytopeVertices>(kyoto_vertices(*inst));
      cached_inst = inst;
    }
    const auto& verts = cached_pv->vertices;
    const int dim = inst->n * (inst->n + 1);
    std::vector<double> lambda(verts.size());
    double s = 0.0;
    for (double& l : lambda) {
      l = rng.exponential();
      s += l;
    }
    std::vector<double> x(dim, 0.0);
    for (std::size_t k = 0; k < verts.size(); ++k)
      for (int j = 0; j < dim; ++j) x[j] += (lambda[k] / s) * verts[k][j];
    return detail::profile_from_action(inst->n,
                                       KyotoAction::from_flat(inst->n, x));
  };
  return g;
}

struct KyotoClassification {
  std::string label;
  std::vector<bool> cap_binding;
  std::vector<bool> transfer_binding;
  bool cross_investment = false;
};

// Binding-pattern taxonomy of a (near-)equilibrium action.
inline KyotoClassification classify_gne(const KyotoInstance& inst,
                                        const KyotoAction& a, double tol = 1e-4) {
  const int n = inst.n;
  KyotoClassification c;
  c.cap_binding.resize(n);
  c.transfer_binding.resize(n);
  int at_cap = 0;
  for (int i = 0; i < n; ++i) {
    double cap_lhs = a.e[i];
    for (int j = 0; j < n; ++j) cap_lhs -= a.I.at(i, j) * inst.gamma[j];
    c.cap_binding[i] = cap_lhs >= inst.cap[i] - tol;
    at_cap += c.cap_binding[i] ? 1 : 0;
    double tr = a.e[i];
    for (int j = 0; j < n; ++j) tr -= inst.gamma[i] * a.I.at(j, i);
    c.transfer_binding[i] = tr <= tol;
    for (int j = 0; j < n; ++j)
      if (j != i && a.I.at(i, j) > tol) c.cross_investment = true;
  }
  if (at_cap == 0)
    c.label = n == 2 ? "both-interior" : "all-interior";
  else if (at_cap == n)
    c.label = n == 2 ? "both-at-cap" : "all-at-cap";
  else if (at_cap == 1 && n == 2)
    c.label = "one-at-cap";
  else
    c.label = "some-at-cap";
  if (c.cross_investment) c.label += "+cross-investment";
  return c;
}

struct VeResult {
  KyotoAction action;
  double exploitability = 0.0;
  bool converged = false;
};

// Variational-equilibrium solve. The stacked own-gradient field is affine
// with a positive-definite symmetric part under these functional forms, so
// the projection method x <- proj(x - eta F(x)) contracts; candidate starts
// include the zero action and coarse Dirichlet points of the vertex hull.
inline VeResult solve_ve(const KyotoInstance& inst, std::uint64_t seed = 0) {
  const int n = inst.n;
  const int dim = n + n * n;
  auto hs = joint_halfspaces(inst).with_upper_box(kyoto_box_cap(inst));
  auto game = kyoto_pseudogame(inst, DeviationMode::joint);

  auto field = [&](const std::vector<double>& x) {
    KyotoAction act = KyotoAction::from_flat(n, x);
    std::vector<double> F(dim, 0.0);
    for (int i = 0; i < n; ++i) {
      auto g = country_payoff_grad(inst, i, act);
      F[i] = -g[i];
      for (int j = 0; j < n; ++j) F[n + i * n + j] = -g[n + i * n + j];
    }
    return F;
  };

  auto run_from = [&](std::vector<double> x) {
    for (int it = 0; it < 3000; ++it) {
      auto F = field(x);
      std::vector<double> y(dim);
      double move = 0.0;
      for (int j = 0; j < dim; ++j) y[j] = x[j] - 0.1 * F[j];
      y = project_onto_polytope(hs, y);
      for (int j = 0; j < dim; ++j) move = std::max(move, std::abs(y[j] - x[j]));
      x = std::move(y);
      if (move < 1e-13) break;
    }
    return x;
  };

  VeResult best;
  auto consider = [&](const std::vector<double>& x) {
    KyotoAction act = KyotoAction::from_flat(n, x);
    double phi =
        exploitability_value(game, detail::profile_from_action(n, act), seed);
    if (!best.converged || phi < best.exploitability) {
      best.action = act;
      best.exploitability = phi;
      best.converged = true;
    }
  };
  consider(run_from(std::vector<double>(dim, 0.0)));
  if (best.exploitability > 1e-7) {
    auto pv = kyoto_vertices(inst);
    Rng rng(derive_seed(seed, 0x5e5e));
    for (int r = 0; r < 3 && best.exploitability > 1e-7; ++r) {
      std::vector<double> lambda(pv.vertices.size());
      double s = 0.0;
      for (double& l : lambda) {
        l = rng.exponential();
        s += l;
      }
      std::vector<double> x(dim, 0.0);
      for (std::size_t k = 0; k < pv.vertices.size(); ++k)
        for (int j = 0; j < dim; ++j) x[j] += (lambda[k] / s) * pv.vertices[k][j];
      consider(run_from(x));
    }
  }
  best.converged = best.exploitability <= 1e-6;
  return best;
}

// All parameters i.i.d. Unif[0.5, 50]; order: rev, dmg, gamma, cap.
inline KyotoInstance sample_kyoto(int n_countries, std::uint64_t seed) {
  if (n_countries < 1) throw ValidationError("sample_kyoto: need >= 1 country");
  Rng rng(seed);
  KyotoInstance inst;
  inst.n = n_countries;
  inst.seed = seed;
  auto draw = [&] {
    std::vector<double> v(n_countries);
    for (double& x : v) x = rng.uniform(0.5, 50.0);
    return v;
  };
  inst.rev = draw();
  inst.dmg = draw();
  inst.gamma = draw();
  inst.cap = draw();
  return inst;
}

inline nlohmann::json kyoto_to_json(const KyotoInstance& inst) {
  return {{"rev", inst.rev},
          {"dmg", inst.dmg},
          {"gamma", inst.gamma},
          {"cap", inst.cap},
          {"seed", inst.seed}};
}

inline KyotoInstance kyoto_from_json(const nlohmann::json& j) {
  KyotoInstance inst;
  inst.rev = j.at("rev").get<std::vector<double>>();
  inst.dmg = j.at("dmg").get<std::vector<double>>();
  inst.gamma = j.at("gamma").get<std::vector<double>>();
  inst.cap = j.at("cap").get<std::vector<double>>();
  inst.n = static_cast<int>(inst.rev.size());
  inst.seed = j.value("seed", std::uint64_t{0});
  return inst;
}

}  // namespace pseudeq
