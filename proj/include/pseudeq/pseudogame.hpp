#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pseudeq/common.hpp"
#include "pseudeq/parallel.hpp"
#include "pseudeq/rng.hpp"
#include "pseudeq/tensor.hpp"

namespace pseudeq {

// Concatenated per-player action vectors.
struct ActionProfile {
  std::vector<int> dims;
  std::vector<double> x;

  ActionProfile() = default;
  ActionProfile(std::vector<int> d, std::vector<double> coords)
      : dims(std::move(d)), x(std::move(coords)) {
    int total = 0;
    for (int k : dims) total += k;
    if (static_cast<int>(x.size()) != total)
      throw ValidationError("ActionProfile: coordinate count " +
                            std::to_string(x.size()) + " != sum of dims " +
                            std::to_string(total));
  }

  static ActionProfile zeros(std::vector<int> d) {
    int total = 0;
    for (int k : d) total += k;
    return ActionProfile(std::move(d), std::vector<double>(total, 0.0));
  }

  int offset(int player) const {
    int off = 0;
    for (int i = 0; i < player; ++i) off += dims[i];
    return off;
  }

  std::span<double> player(int i) { return {x.data() + offset(i), static_cast<std::size_t>(dims[i])}; }
  std::span<const double> player(int i) const {
    return {x.data() + offset(i), static_cast<std::size_t>(dims[i])};
  }

  ActionProfile with_player(int i, std::span<const double> action) const {
    ActionProfile out = *this;
    std::copy(action.begin(), action.end(), out.x.begin() + offset(i));
    return out;
  }
};

// Which set a player may deviate into when computing regrets:
//  - individual: the player's own constraints, opponents fixed
//  - joint: every player's constraints must hold at the substituted profile
enum class DeviationMode { individual, joint };

// An n-player game whose feasible sets depend on opponents' actions.
// Evaluation members are pure; the struct is safe to share across threads.
struct PseudoGame {
  int n_players = 0;
  std::vector<int> action_dims;
  std::vector<double> box_lo, box_hi;  // per concatenated coordinate
  DeviationMode deviation_mode = DeviationMode::individual;

  std::function<double(const ActionProfile&, int)> payoff;
  // Player's constraint values; feasible iff all >= -kFeasTol.
  std::function<std::vector<double>(const ActionProfile&, int)> constraints;
  std::function<ActionProfile(const ActionProfile&)> feasible_project;
  // Optional exact best response (player, profile) -> action.
  std::function<std::vector<double>(int, const ActionProfile&)> best_response;
  // Optional projection of a candidate deviation onto the player's feasible
  // set given the rest of the profile.
  std::function<std::vector<double>(int, std::span<const double>, const ActionProfile&)>
      project_deviation;
  // Optional uniform sampler over jointly feasible profiles.
  std::function<ActionProfile(Rng&)> sample_feasible;
  // Optional analytic gradient of payoff(i) in player i's own coordinates.
  std::function<std::vector<double>(const ActionProfile&, int)> payoff_grad_own;
  // Optional analytic gradient of payoff(i) in all coordinates.
  std::function<std::vector<double>(const ActionProfile&, int)> payoff_grad_full;

  ActionProfile zero_profile() const { return ActionProfile::zeros(action_dims); }
};

namespace detail {

// First violated constraint index for the deviation, or -1 if feasible.
// In joint mode indices run over players' constraint blocks in order.
inline int deviation_violation(const PseudoGame& g, int player,
                               const ActionProfile& substituted) {
  if (g.deviation_mode == DeviationMode::individual) {
    std::vector<double> c = g.constraints(substituted, player);
    for (std::size_t k = 0; k < c.size(); ++k)
      if (c[k] < -kFeasTol) return static_cast<int>(k);
    return -1;
  }
  int base = 0;
  for (int p = 0; p < g.n_players; ++p) {
    std::vector<double> c = g.constraints(substituted, p);
    for (std::size_t k = 0; k < c.size(); ++k)
      if (c[k] < -kFeasTol) return base + static_cast<int>(k);
    base += static_cast<int>(c.size());
  }
  return -1;
}

inline bool profile_feasible(const PseudoGame& g, const ActionProfile& a) {
  for (int p = 0; p < g.n_players; ++p) {
    std::vector<double> c = g.constraints(a, p);
    for (double v : c)
      if (v < -kFeasTol) return false;
  }
  return true;
}

inline std::vector<double> finite_diff_grad_own(const PseudoGame& g,
                                                const ActionProfile& a, int player,
                                                double h = 1e-6) {
  std::vector<double> grad(a.dims[player]);
  ActionProfile work = a;
  int off = a.offset(player);
  for (int k = 0; k < a.dims[player]; ++k) {
    double x0 = work.x[off + k];
    work.x[off + k] = x0 + h;
    double up = g.payoff(work, player);
    work.x[off + k] = x0 - h;
    double dn = g.payoff(work, player);
    work.x[off + k] = x0;
    grad[k] = (up - dn) / (2.0 * h);
  }
  return grad;
}

inline std::vector<double> generic_project_deviation(const PseudoGame& g, int player,
                                                     std::span<const double> cand,
                                                     const ActionProfile& profile) {
  ActionProfile sub = profile.with_player(player, cand);
  ActionProfile proj = g.feasible_project(sub);
  auto block = proj.player(player);
  return {block.begin(), block.end()};
}

}  // namespace detail

// u_i(b_i, a_-i) - u_i(a). Rejects infeasible deviations.
inline double regret(const PseudoGame& g, int player, const ActionProfile& a,
                     std::span<const double> b_i) {
  ActionProfile sub = a.with_player(player, b_i);
  int viol = detail::deviation_violation(g, player, sub);
  if (viol >= 0)
    throw ValidationError("regret: deviation of player " + std::to_string(player) +
                          " violates constraint " + std::to_string(viol));
  return g.payoff(sub, player) - g.payoff(a, player);
}

inline double cumulative_regret(const PseudoGame& g, const ActionProfile& a,
                                const ActionProfile& b) {
  double total = 0.0;
  for (int i = 0; i < g.n_players; ++i) total += regret(g, i, a, b.player(i));
  return total;
}

struct RegretReport {
  std::vector<double> per_player;
  double cumulative = 0.0;
  double exploitability = 0.0;
};

struct ExploitResult {
  double value = 0.0;
  std::vector<double> per_player;
  ActionProfile best_deviation;
  bool converged = true;
};

namespace detail {

// Projected gradient ascent on one player's deviation. Spec'd fallback:
// 200 iterations, step 0.1/sqrt(t), 5 restarts, keep best.
inline std::pair<std::vector<double>, bool> ascend_deviation(
    const PseudoGame& g, int player, const ActionProfile& a, std::uint64_t seed) {
  const int kIters = 200, kRestarts = 5;
  auto project = [&](std::span<const double> cand) {
    if (g.project_deviation) return g.project_deviation(player, cand, a);
    return detail::generic_project_deviation(g, player, cand, a);
  };
  auto grad = [&](const ActionProfile& at) {
    if (g.payoff_grad_own) return g.payoff_grad_own(at, player);
    return detail::finite_diff_grad_own(g, at, player);
  };

  int off = a.offset(player);
  int dim = a.dims[player];
  std::vector<double> best(a.x.begin() + off, a.x.begin() + off + dim);
  double best_val = g.payoff(a, player);
  bool plateaued = false;

  Rng rng(derive_seed(seed, 0x9a5e));
  for (int r = 0; r < kRestarts; ++r) {
    std::vector<double> cur(dim);
    if (r == 0) {
      std::copy(a.x.begin() + off, a.x.begin() + off + dim, cur.begin());
    } else {
      for (int k = 0; k < dim; ++k)
        cur[k] = rng.uniform(g.box_lo[off + k], g.box_hi[off + k]);
      cur = project(cur);
    }
    int last_improvement_at = 0;
    double restart_best = -std::numeric_limits<double>::infinity();
    ActionProfile work = a;
    for (int t = 1; t <= kIters; ++t) {
      std::copy(cur.begin(), cur.end(), work.x.begin() + off);
      double val = g.payoff(work, player);
      if (val > restart_best + 1e-12) {
        restart_best = val;
        last_improvement_at = t;
      }
      if (val > best_val) {
        best_val = val;
        best = cur;
      }
      std::vector<double> gr = grad(work);
      if (!all_finite(gr)) break;
      double step = 0.1 / std::sqrt(static_cast<double>(t));
      for (int k = 0; k < dim; ++k) cur[k] += step * gr[k];
      cur = project(cur);
    }
    if (last_improvement_at < kIters - 50) plateaued = true;
  }
  return {best, plateaued};
}

}  // namespace detail

// Sum over players of the best feasible unilateral deviation gain.
// Uses the exact best-response oracle when the game provides one.
inline ExploitResult exploitability(const PseudoGame& g, const ActionProfile& a,
                                    std::uint64_t seed = 0) {
  ExploitResult res;
  res.best_deviation = a;
  res.per_player.resize(g.n_players, 0.0);
  for (int i = 0; i < g.n_players; ++i) {
    std::vector<double> b_i;
    bool conv = true;
    if (g.best_response) {
      b_i = g.best_response(i, a);
    } else {
      auto [dev, plateaued] = detail::ascend_deviation(g, i, a, derive_seed(seed, i));
      b_i = std::move(dev);
      conv = plateaued;
    }
    ActionProfile sub = a.with_player(i, b_i);
    double r = g.payoff(sub, i) - g.payoff(a, i);
    // b_i = a_i is always an admissible deviation, so the max is >= 0.
    if (r < 0.0) {
      r = 0.0;
      b_i.assign(a.player(i).begin(), a.player(i).end());
    }
    res.per_player[i] = r;
    res.value += r;
    std::copy(b_i.begin(), b_i.end(), res.best_deviation.x.begin() + a.offset(i));
    res.converged = res.converged && conv;
  }
  return res;
}

inline double exploitability_value(const PseudoGame& g, const ActionProfile& a,
                                   std::uint64_t seed = 0) {
  return exploitability(g, a, seed).value;
}

namespace detail {

inline ActionProfile rejection_sample(const PseudoGame& g, Rng& rng) {
  const int kMaxRejects = 100000;
  for (int t = 0; t < kMaxRejects; ++t) {
    ActionProfile cand = g.zero_profile();
    for (std::size_t k = 0; k < cand.x.size(); ++k)
      cand.x[k] = rng.uniform(g.box_lo[k], g.box_hi[k]);
    if (profile_feasible(g, cand)) return cand;
  }
  throw ValidationError("sample_feasible: rejection sampling exceeded 1e5 attempts");
}

}  // namespace detail

inline ActionProfile sample_feasible_profile(const PseudoGame& g, Rng& rng) {
  if (g.sample_feasible) return g.sample_feasible(rng);
  return detail::rejection_sample(g, rng);
}

// exploitability(a) divided by the mean exploitability of uniformly sampled
// feasible profiles.
inline double normalized_exploitability(const PseudoGame& g, const ActionProfile& a,
                                        int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ValidationError("normalized_exploitability: n_samples >= 1");
  std::vector<double> vals(n_samples);
  parallel_for(n_samples, [&](std::size_t k) {
    Rng rng(derive_seed(seed, 0xabcd, k));
    ActionProfile s = sample_feasible_profile(g, rng);
    vals[k] = exploitability(g, s, derive_seed(seed, 0xeF01, k)).value;
  });
  double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / n_samples;
  if (mean < 1e-12)
    throw ValidationError(
        "normalized_exploitability: degenerate denominator; game is trivially "
        "solved everywhere");
  return exploitability(g, a, seed).value / mean;
}

// Grid maximization of cumulative regret; deviations decouple per player.
// With one grid point per dim the grid is {a_i} itself.
inline double brute_force_exploitability(const PseudoGame& g, const ActionProfile& a,
                                         int grid_points_per_dim) {
  if (grid_points_per_dim < 1)
    throw ValidationError("brute_force_exploitability: need >= 1 grid point");
  double total_points = 0.0;
  for (int i = 0; i < g.n_players; ++i)
    total_points += std::pow(static_cast<double>(grid_points_per_dim), a.dims[i]);
  if (total_points > 1e7)
    throw ValidationError("brute_force_exploitability: grid size " +
                          std::to_string(total_points) + " exceeds 1e7");

  double total = 0.0;
  for (int i = 0; i < g.n_players; ++i) {
    int dim = a.dims[i];
    int off = a.offset(i);
    double base = g.payoff(a, i);
    double best = 0.0;  // b_i = a_i
    if (grid_points_per_dim == 1) {
      total += best;
      continue;
    }
    std::vector<int> idx(dim, 0);
    ActionProfile work = a;
    while (true) {
      for (int k = 0; k < dim; ++k) {
        double frac = static_cast<double>(idx[k]) / (grid_points_per_dim - 1);
        work.x[off + k] = g.box_lo[off + k] + frac * (g.box_hi[off + k] - g.box_lo[off + k]);
      }
      if (detail::deviation_violation(g, i, work) < 0) {
        double r = g.payoff(work, i) - base;
        if (r > best) best = r;
      }
      int k = 0;
      while (k < dim && ++idx[k] == grid_points_per_dim) idx[k++] = 0;
      if (k == dim) break;
    }
    total += best;
  }
  return total;
}

// Euclidean projection onto the unit simplex.
inline std::vector<double> simplex_project(std::span<const double> v) {
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, tau = 0.0;
  int rho = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    css += u[k];
    double t = (css - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) {
      rho = static_cast<int>(k + 1);
      tau = t;
    }
  }
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = std::max(0.0, v[k] - tau);
  return out;
}

// Two-player game on a product of simplices with bilinear payoffs.
// The correspondence is constant: only simplex membership constrains play.
inline PseudoGame bimatrix_adapter(const Tensor& A, const Tensor& B) {
  if (!(A.shape == B.shape) || A.shape.size() != 2)
    throw ValidationError("bimatrix_adapter: payoff matrices must share shape, got " +
                          A.shape_str() + " and " + B.shape_str());
  int r = static_cast<int>(A.rows());
  int c = static_cast<int>(A.cols());
  PseudoGame g;
  g.n_players = 2;
  g.action_dims = {r, c};
  g.box_lo.assign(r + c, 0.0);
  g.box_hi.assign(r + c, 1.0);
  auto Ap = std::make_shared<Tensor>(A);
  auto Bp = std::make_shared<Tensor>(B);

  g.payoff = [Ap, Bp, r, c](const ActionProfile& a, int player) {
    auto x = a.player(0);
    auto y = a.player(1);
    const Tensor& M = player == 0 ? *Ap : *Bp;
    double s = 0.0;
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) s += x[i] * M.at(i, j) * y[j];
    return s;
  };
  g.constraints = [](const ActionProfile& a, int player) {
    auto v = a.player(player);
    std::vector<double> out(v.begin(), v.end());
    double s = std::accumulate(v.begin(), v.end(), 0.0);
    out.push_back(1.0 - s);
    out.push_back(s - 1.0);
    return out;
  };
  g.feasible_project = [](const ActionProfile& a) {
    ActionProfile out = a;
    for (int i = 0; i < 2; ++i) {
      auto proj = simplex_project(a.player(i));
      std::copy(proj.begin(), proj.end(), out.x.begin() + out.offset(i));
    }
    return out;
  };
  g.best_response = [Ap, Bp, r, c](int player, const ActionProfile& a) {
    if (player == 0) {
      auto y = a.player(1);
      int arg = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < r; ++i) {
        double s = 0.0;
        for (int j = 0; j < c; ++j) s += Ap->at(i, j) * y[j];
        if (s > best) {
          best = s;
          arg = i;
        }
      }
      std::vector<double> out(r, 0.0);
      out[arg] = 1.0;
      return out;
    }
    auto x = a.player(0);
    int arg = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < c; ++j) {
      double s = 0.0;
      for (int i = 0; i < r; ++i) s += x[i] * Bp->at(i, j);
      if (s > best) {
        best = s;
        arg = j;
      }
    }
    std::vector<double> out(c, 0.0);
    out[arg] = 1.0;
    return out;
  };
  g.payoff_grad_own = [Ap, Bp, r, c](const ActionProfile& a, int player) {
    if (player == 0) {
      auto y = a.player(1);
      std::vector<double> grads(r, 0.0);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) grads[i] += Ap->at(i, j) * y[j];
      return grads;
    }
    auto x = a.player(0);
    std::vector<double> grads(c, 0.0);
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) grads[j] += x[i] * Bp->at(i, j);
    return grads;
  };
  g.payoff_grad_full = [Ap, Bp, r, c](const ActionProfile& a, int player) {
    const Tensor& M = player == 0 ? *Ap : *Bp;
    auto x = a.player(0);
    auto y = a.player(1);
    std::vector<double> grads(r + c, 0.0);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) {
        grads[i] += M.at(i, j) * y[j];
        grads[r + j] += x[i] * M.at(i, j);
      }
    return grads;
  };
  g.project_deviation = [](int player, std::span<const double> cand,
                           const ActionProfile&) { return simplex_project(cand); };
  g.sample_feasible = [r, c](Rng& rng) {
    ActionProfile out({r, c}, std::vector<double>(r + c, 0.0));
    auto px = rng.simplex(r);
    auto py = rng.simplex(c);
    std::copy(px.begin(), px.end(), out.x.begin());
    std::copy(py.begin(), py.end(), out.x.begin() + r);
    return out;
  };
  return g;
}

// Two players on [0,1]^2 with u_i(a) = a_i and constraints
// g_1 = a_2 - a_1^2, g_2 = a_1 - a_2^2. Exploitability has the closed form
// sqrt(a_1) + sqrt(a_2) - a_1 - a_2, whose gradient blows up at 0.
inline PseudoGame nonlipschitz_example() {
  PseudoGame g;
  g.n_players = 2;
  g.action_dims = {1, 1};
  g.box_lo = {0.0, 0.0};
  g.box_hi = {1.0, 1.0};
  g.payoff = [](const ActionProfile& a, int player) { return a.x[player]; };
  g.constraints = [](const ActionProfile& a, int player) {
    double own = a.x[player];
    double other = a.x[1 - player];
    return std::vector<double>{other - own * own, own, 1.0 - own};
  };
  g.feasible_project = [](const ActionProfile& a) {
    ActionProfile out = a;
    for (double& v : out.x) v = std::clamp(v, 0.0, 1.0);
    out.x[0] = std::min(out.x[0], std::sqrt(out.x[1]));
    out.x[1] = std::min(out.x[1], std::sqrt(out.x[0]));
    return out;
  };
  g.best_response = [](int player, const ActionProfile& a) {
    return std::vector<double>{std::min(1.0, std::sqrt(a.x[1 - player]))};
  };
  g.payoff_grad_own = [](const ActionProfile&, int) { return std::vector<double>{1.0}; };
  g.payoff_grad_full = [](const ActionProfile&, int player) {
    std::vector<double> grads(2, 0.0);
    grads[player] = 1.0;
    return grads;
  };
  g.project_deviation = [](int player, std::span<const double> cand,
                           const ActionProfile& a) {
    double cap = std::min(1.0, std::sqrt(a.x[1 - player]));
    return std::vector<double>{std::clamp(cand[0], 0.0, cap)};
  };
  return g;
}

inline nlohmann::json profile_to_json(const ActionProfile& a) {
  return {{"dims", a.dims}, {"coords", a.x}};
}

inline ActionProfile profile_from_json(const nlohmann::json& j) {
  return ActionProfile(j.at("dims").get<std::vector<int>>(),
                       j.at("coords").get<std::vector<double>>());
}

inline nlohmann::json regret_report_to_json(const RegretReport& r) {
  return {{"per_player", r.per_player},
          {"cumulative", r.cumulative},
          {"exploitability", r.exploitability}};
}

}  // namespace pseudeq
