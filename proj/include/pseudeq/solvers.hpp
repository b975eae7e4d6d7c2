#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pseudeq/exchange.hpp"
#include "pseudeq/kyoto.hpp"
#include "pseudeq/nn.hpp"
#include "pseudeq/optim.hpp"
#include "pseudeq/parallel.hpp"
#include "pseudeq/pseudogame.hpp"

namespace pseudeq {

enum class GradMode { pathwise, stop_gradient };

inline std::string to_string(GradMode m) {
  return m == GradMode::pathwise ? "pathwise" : "stop_gradient";
}
inline GradMode grad_mode_from_string(const std::string& s) {
  if (s == "pathwise") return GradMode::pathwise;
  if (s == "stop_gradient") return GradMode::stop_gradient;
  throw ValidationError("unknown grad_mode: " + s);
}

struct TrainConfig {
  std::int64_t outer_iters = 2000;   // T_h
  std::int64_t inner_iters = 1;      // T_f (0 allowed with exact oracles)
  std::int64_t warmup_iters = 2000;  // discriminator warm-up
  int batch_size = 32;
  double lr_gen = 1e-3;
  double lr_disc = 1e-3;
  LrSchedule schedule = LrSchedule::adam;
  double pl_constant = 0.0;  // 2 sigma_min lambda; required by theorem1
  GradMode grad_mode = GradMode::pathwise;
  bool reset_inner = false;  // literal inner reset w_f = 0 per outer step
  std::uint64_t seed = 0;
  std::int64_t validate_every = 100;
  int early_stop_patience = 10;

  void validate() const {
    if (outer_iters < 1 || batch_size < 1)
      throw ValidationError("TrainConfig: outer_iters and batch_size must be >= 1");
    if (inner_iters < 0) throw ValidationError("TrainConfig: inner_iters must be >= 0");
    if (schedule == LrSchedule::theorem1 && !(pl_constant > 0.0))
      throw ValidationError("TrainConfig: theorem1 schedule requires pl_constant > 0");
  }
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"outer_iters", c.outer_iters},
          {"inner_iters", c.inner_iters},
          {"warmup_iters", c.warmup_iters},
          {"batch_size", c.batch_size},
          {"lr_gen", c.lr_gen},
          {"lr_disc", c.lr_disc},
          {"schedule", to_string(c.schedule)},
          {"pl_constant", c.pl_constant},
          {"grad_mode", to_string(c.grad_mode)},
          {"reset_inner", c.reset_inner},
          {"seed", c.seed},
          {"validate_every", c.validate_every},
          {"early_stop_patience", c.early_stop_patience}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.outer_iters = j.value("outer_iters", c.outer_iters);
  c.inner_iters = j.value("inner_iters", c.inner_iters);
  c.warmup_iters = j.value("warmup_iters", c.warmup_iters);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr_gen = j.value("lr_gen", c.lr_gen);
  c.lr_disc = j.value("lr_disc", c.lr_disc);
  if (j.contains("schedule")) c.schedule = schedule_from_string(j["schedule"]);
  c.pl_constant = j.value("pl_constant", c.pl_constant);
  if (j.contains("grad_mode")) c.grad_mode = grad_mode_from_string(j["grad_mode"]);
  c.reset_inner = j.value("reset_inner", c.reset_inner);
  c.seed = j.value("seed", c.seed);
  c.validate_every = j.value("validate_every", c.validate_every);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  return c;
}

struct TrajectoryPoint {
  std::int64_t iteration = 0;
  std::int64_t snapshot_id = -1;
  double exploitability = 0.0;
  double cumulative_regret = 0.0;
  double wall_ms = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  bool diverged = false;
  bool aborted = false;
  int skipped_steps = 0;  // non-finite gradient events
  std::string note;
};

// ---------------------------------------------------------------------------
// Baselines

struct TatonnementResult {
  Trajectory traj;
  std::vector<double> prices;
  std::vector<std::vector<double>> price_path;  // length iterations+1
};

// p <- renormalize(floor(p + eta_t z(p))). The decreasing schedule
// eta0/sqrt(t+1) is the default; `increasing` applies the literal
// eta0*sqrt(t+1) form instead.
inline TatonnementResult tatonnement(const ExchangeEconomy& econ, double eta0,
                                     std::int64_t iters, bool increasing = false,
                                     std::vector<double> p0 = {}) {
  if (!(eta0 > 0.0) || iters < 1)
    throw ValidationError("tatonnement: eta0 > 0 and iters >= 1 required");
  TatonnementResult res;
  std::vector<double> p =
      p0.empty() ? std::vector<double>(econ.m_goods, 1.0 / econ.m_goods)
                 : floor_prices(p0);
  auto t0 = std::chrono::steady_clock::now();
  res.price_path.push_back(p);
  for (std::int64_t t = 0; t < iters; ++t) {
    auto z = excess_demand(econ, p);
    double zmax = *std::max_element(z.begin(), z.end());
    double pz = 0.0;
    for (int j = 0; j < econ.m_goods; ++j) pz += p[j] * z[j];
    double wall =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    res.traj.points.push_back({t, -1, std::max(0.0, zmax - pz), 0.0, wall});

    double eta = increasing ? eta0 * std::sqrt(static_cast<double>(t + 1))
                            : eta0 / std::sqrt(static_cast<double>(t + 1));
    double norm = 0.0;
    std::vector<double> raw(econ.m_goods);
    for (int j = 0; j < econ.m_goods; ++j) {
      raw[j] = p[j] + eta * z[j];
      norm += raw[j] * raw[j];
    }
    if (!std::isfinite(norm) || std::sqrt(norm) > 1e6) {
      res.traj.diverged = true;
      res.traj.note = "divergent prices at iteration " + std::to_string(t);
      break;
    }
    p = floor_prices(raw);
    res.price_path.push_back(p);
  }
  {
    auto z = excess_demand(econ, p);
    double zmax = *std::max_element(z.begin(), z.end());
    double pz = 0.0;
    for (int j = 0; j < econ.m_goods; ++j) pz += p[j] * z[j];
    double wall =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    res.traj.points.push_back({static_cast<std::int64_t>(res.price_path.size() - 1),
                               -1, std::max(0.0, zmax - pz), 0.0, wall});
  }
  res.prices = p;
  return res;
}

// Projected descent on the exploitability with the best-response-envelope
// gradient: grad of psi(a, b*) in a, holding b* fixed. Non-finite gradients
// skip the step and are counted (the non-Lipschitz regime).
inline std::pair<Trajectory, ActionProfile> exploitability_descent(
    const PseudoGame& game, double eta0, std::int64_t iters, ActionProfile a) {
  if (!(eta0 > 0.0) || iters < 1)
    throw ValidationError("exploitability_descent: eta0 > 0 and iters >= 1 required");
  Trajectory traj;
  auto t0 = std::chrono::steady_clock::now();
  auto full_grad = [&](const ActionProfile& at, int player) {
    if (game.payoff_grad_full) return game.payoff_grad_full(at, player);
    std::vector<double> g(at.x.size());
    ActionProfile work = at;
    for (std::size_t k = 0; k < at.x.size(); ++k) {
      double x0 = work.x[k];
      work.x[k] = x0 + 1e-6;
      double up = game.payoff(work, player);
      work.x[k] = x0 - 1e-6;
      double dn = game.payoff(work, player);
      work.x[k] = x0;
      g[k] = (up - dn) / 2e-6;
    }
    return g;
  };

  for (std::int64_t t = 0; t < iters; ++t) {
    auto res = exploitability(game, a, derive_seed(0xed, t));
    double wall =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    traj.points.push_back({t, -1, res.value, 0.0, wall});

    // envelope gradient of sum_i [u_i(b*_i, a_-i) - u_i(a)]
    std::vector<double> grad(a.x.size(), 0.0);
    bool finite = true;
    for (int i = 0; i < game.n_players && finite; ++i) {
      ActionProfile sub = a.with_player(i, res.best_deviation.player(i));
      auto gdev = full_grad(sub, i);
      auto gcur = full_grad(a, i);
      int off = a.offset(i), dim = a.dims[i];
      for (std::size_t k = 0; k < a.x.size(); ++k) {
        bool own = static_cast<int>(k) >= off && static_cast<int>(k) < off + dim;
        double term = (own ? 0.0 : gdev[k]) - gcur[k];
        if (!std::isfinite(term)) {
          finite = false;
          break;
        }
        grad[k] += term;
      }
    }
    if (!finite) {
      ++traj.skipped_steps;
      continue;
    }
    double eta = eta0 / std::sqrt(static_cast<double>(t + 1));
    ActionProfile next = a;
    for (std::size_t k = 0; k < a.x.size(); ++k) next.x[k] -= eta * grad[k];
    a = game.feasible_project(next);
  }
  auto res = exploitability(game, a, derive_seed(0xed, iters));
  double wall =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
          .count();
  traj.points.push_back({iters, -1, res.value, 0.0, wall});
  return {traj, a};
}

// ---------------------------------------------------------------------------
// GAES over exchange economies

struct ExchangeGenerator {
  int n = 0, m = 0;
  MlpParams trunk;       // features -> hidden
  MlpParams price_head;  // hidden -> m (softmax applied explicitly)
  MlpParams share_head;  // hidden -> n*m logits, chunk-softmax per buyer
};

struct ExchangeDiscriminator {
  int n = 0, m = 0;
  MlpParams trunk;       // features ++ prices ++ allocation -> hidden
  MlpParams share_head;  // hidden -> n*m logits
};

struct GaesExchangeModel {
  ExchangeGenerator gen;
  std::optional<ExchangeDiscriminator> disc;  // nullopt = exact oracle
};

inline std::vector<double> economy_features(const ExchangeEconomy& econ) {
  std::vector<double> f;
  f.reserve(2 * econ.n_buyers * econ.m_goods + econ.n_buyers);
  f.insert(f.end(), econ.V.values.begin(), econ.V.values.end());
  f.insert(f.end(), econ.E.values.begin(), econ.E.values.end());
  f.insert(f.end(), econ.rho.begin(), econ.rho.end());
  return f;
}

inline GaesExchangeModel make_exchange_gaes_model(int n, int m, bool learned_disc,
                                                  std::uint64_t seed, int hidden = 64) {
  GaesExchangeModel model;
  Rng rng(derive_seed(seed, 0x9e4));
  std::size_t fdim = static_cast<std::size_t>(2 * n * m + n);
  std::size_t h = static_cast<std::size_t>(hidden);
  model.gen.n = n;
  model.gen.m = m;
  model.gen.trunk = make_mlp({fdim, h, h}, {Activation::relu, Activation::relu}, rng);
  model.gen.price_head =
      make_mlp({h, static_cast<std::size_t>(m)}, {Activation::identity}, rng);
  model.gen.share_head =
      make_mlp({h, static_cast<std::size_t>(n * m)}, {Activation::identity}, rng);
  if (learned_disc) {
    ExchangeDiscriminator d;
    d.n = n;
    d.m = m;
    std::size_t din = fdim + static_cast<std::size_t>(m) +
                      static_cast<std::size_t>(n * m);
    d.trunk = make_mlp({din, h, h}, {Activation::relu, Activation::relu}, rng);
    d.share_head =
        make_mlp({h, static_cast<std::size_t>(n * m)}, {Activation::identity}, rng);
    model.disc = std::move(d);
  }
  return model;
}

namespace detail {

// Taped feasibility construction shared by generator and discriminator:
// chunk-softmax shares scaled by the allocation coefficients (E_i.p)/p_j.
struct TapedOutcome {
  Tape::NodeId prices;      // [m]
  Tape::NodeId allocation;  // [n x m]
};

inline Tape::NodeId chunk_softmax(Tape& tape, Tape::NodeId logits, int n, int m) {
  return tape.softmax(tape.reshape(logits, {static_cast<std::size_t>(n),
                                            static_cast<std::size_t>(m)}));
}

inline Tape::NodeId normalize_prices_tape(Tape& tape, Tape::NodeId raw_simplex,
                                          int m) {
  auto floored = tape.clamp_min(raw_simplex, kPriceFloor);
  auto total = tape.sum(floored);
  return tape.div(floored, tape.broadcast(total, static_cast<std::size_t>(m)));
}

inline TapedOutcome allocation_from_shares(Tape& tape, const ExchangeEconomy& econ,
                                           Tape::NodeId prices,
                                           Tape::NodeId share_logits) {
  auto shares = chunk_softmax(tape, share_logits, econ.n_buyers, econ.m_goods);
  auto Ec = tape.leaf(econ.E);
  auto budgets = tape.matvec(Ec, prices);             // [n]
  auto coef = tape.outer(budgets, tape.recip(prices));  // [n x m]
  return {prices, tape.mul(shares, coef)};
}

inline Tape::NodeId utility_tape(Tape& tape, const ExchangeEconomy& econ, int buyer,
                                 Tape::NodeId bundle /* [m] */) {
  const int m = econ.m_goods;
  std::vector<double> v(m);
  for (int j = 0; j < m; ++j) v[j] = econ.V.at(buyer, j);
  auto vc = tape.leaf(Tensor::vec(v));
  switch (econ.family) {
    case UtilityFamily::Linear:
      return tape.dot(vc, bundle);
    case UtilityFamily::CobbDouglas: {
      auto safe = tape.clamp_min(bundle, 1e-300);
      return tape.exp(tape.dot(vc, tape.log(safe)));
    }
    case UtilityFamily::Leontief: {
      std::vector<Tape::NodeId> ratios;
      for (int j = 0; j < m; ++j) {
        if (v[j] <= 0.0) continue;
        ratios.push_back(tape.scale(tape.slice(bundle, j, 1), 1.0 / v[j]));
      }
      return tape.min_all(tape.concat(ratios));
    }
    case UtilityFamily::CES: {
      double rho = econ.rho[buyer];
      auto safe = tape.clamp_min(bundle, 1e-30);
      auto powed = tape.pow_const(safe, rho);
      return tape.pow_const(tape.dot(vc, powed), 1.0 / rho);
    }
  }
  throw ValidationError("utility_tape: unknown family");
}

struct TapedGenerator {
  TapedMlp trunk, price_head, share_head;
  TapedOutcome out;
};

inline TapedGenerator generator_forward_tape(Tape& tape, const ExchangeGenerator& gen,
                                             const ExchangeEconomy& econ) {
  if (econ.n_buyers != gen.n || econ.m_goods != gen.m)
    throw ValidationError("generator dims (" + std::to_string(gen.n) + "x" +
                          std::to_string(gen.m) + ") do not match economy (" +
                          std::to_string(econ.n_buyers) + "x" +
                          std::to_string(econ.m_goods) + ")");
  TapedGenerator tg;
  tg.trunk = place_on_tape(tape, gen.trunk);
  tg.price_head = place_on_tape(tape, gen.price_head);
  tg.share_head = place_on_tape(tape, gen.share_head);
  auto features = tape.leaf(Tensor::vec(economy_features(econ)));
  auto hiddenv = mlp_forward_tape(tape, tg.trunk, features);
  auto price_logits = mlp_forward_tape(tape, tg.price_head, hiddenv);
  auto prices = normalize_prices_tape(tape, tape.softmax(price_logits), econ.m_goods);
  auto share_logits = mlp_forward_tape(tape, tg.share_head, hiddenv);
  tg.out = allocation_from_shares(tape, econ, prices, share_logits);
  return tg;
}

struct TapedDiscriminator {
  TapedMlp trunk, share_head;
  Tape::NodeId allocation;  // deviation allocations [n x m]
};

inline TapedDiscriminator discriminator_forward_tape(Tape& tape,
                                                     const ExchangeDiscriminator& disc,
                                                     const ExchangeEconomy& econ,
                                                     Tape::NodeId prices,
                                                     Tape::NodeId allocation) {
  TapedDiscriminator td;
  td.trunk = place_on_tape(tape, disc.trunk);
  td.share_head = place_on_tape(tape, disc.share_head);
  auto features = tape.leaf(Tensor::vec(economy_features(econ)));
  auto flat_alloc = tape.reshape(
      allocation, {static_cast<std::size_t>(econ.n_buyers * econ.m_goods)});
  auto input = tape.concat({features, prices, flat_alloc});
  auto hiddenv = mlp_forward_tape(tape, td.trunk, input);
  auto share_logits = mlp_forward_tape(tape, td.share_head, hiddenv);
  td.allocation =
      allocation_from_shares(tape, econ, prices, share_logits).allocation;
  return td;
}

}  // namespace detail

// Plain (untaped) generator forward; output is feasible by construction.
inline MarketOutcome generator_forward_exchange(const GaesExchangeModel& model,
                                                const ExchangeEconomy& econ) {
  Tape tape;
  auto tg = detail::generator_forward_tape(tape, model.gen, econ);
  MarketOutcome o;
  o.prices = tape.val(tg.out.prices).values;
  o.allocation = tape.val(tg.out.allocation);
  return o;
}

// Deviation profile against `outcome`: exact closed-form demands (and the
// one-hot seller rule) when no learned discriminator is present; otherwise
// the learned allocation head with the same one-hot price rule.
inline ActionProfile discriminator_forward_exchange(const GaesExchangeModel& model,
                                                    const ExchangeEconomy& econ,
                                                    const MarketOutcome& outcome) {
  const int n = econ.n_buyers, m = econ.m_goods;
  std::vector<int> dims(n + 1, m);
  ActionProfile dev = ActionProfile::zeros(dims);
  auto z = outcome_net_demand(econ, outcome.allocation);
  int arg = 0;
  for (int j = 1; j < m; ++j)
    if (z[j] > z[arg]) arg = j;
  dev.x[dev.offset(n) + arg] = 1.0;

  if (!model.disc.has_value()) {
    auto fp = floor_prices(outcome.prices);
    for (int i = 0; i < n; ++i) {
      double budget = 0.0;
      for (int j = 0; j < m; ++j) budget += econ.E.at(i, j) * outcome.prices[j];
      auto d = demand(econ, i, fp, budget);
      std::copy(d.begin(), d.end(), dev.x.begin() + dev.offset(i));
    }
    return dev;
  }
  Tape tape;
  auto prices = tape.leaf(Tensor::vec(outcome.prices));
  auto alloc = tape.leaf(outcome.allocation);
  auto td = detail::discriminator_forward_tape(tape, *model.disc, econ, prices, alloc);
  const Tensor& B = tape.val(td.allocation);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) dev.x[dev.offset(i) + j] = B.at(i, j);
  return dev;
}

namespace detail {

// psi(outcome, deviation) with exact-oracle deviations equals the
// exploitability of the outcome; used for metrics and the generator loss.
inline double exact_cumulative_regret(const ExchangeEconomy& econ,
                                      const MarketOutcome& o) {
  const int n = econ.n_buyers, m = econ.m_goods;
  double psi = 0.0;
  auto fp = floor_prices(o.prices);
  for (int i = 0; i < n; ++i) {
    double budget = 0.0;
    for (int j = 0; j < m; ++j) budget += econ.E.at(i, j) * o.prices[j];
    auto d = demand(econ, i, fp, budget);
    std::vector<double> xi(m);
    for (int j = 0; j < m; ++j) xi[j] = o.allocation.at(i, j);
    psi += utility(econ, i, d) - utility(econ, i, xi);
  }
  auto z = outcome_net_demand(econ, o.allocation);
  double zmax = *std::max_element(z.begin(), z.end());
  double pz = 0.0;
  for (int j = 0; j < m; ++j) pz += o.prices[j] * z[j];
  return psi + zmax - pz;
}

}  // namespace detail

// Mean exact exploitability of generator outputs over a set of economies.
inline double mean_exact_exploitability(const GaesExchangeModel& model,
                                        const std::vector<ExchangeEconomy>& econs) {
  std::vector<double> vals(econs.size());
  parallel_for(econs.size(), [&](std::size_t k) {
    vals[k] = detail::exact_cumulative_regret(
        econs[k], generator_forward_exchange(model, econs[k]));
  });
  double s = 0.0;
  for (double v : vals) s += v;
  return econs.empty() ? 0.0 : s / static_cast<double>(econs.size());
}

struct ExchangeDataset {
  std::vector<ExchangeEconomy> train, valid;
};

namespace detail {

inline std::vector<std::size_t> batch_indices(std::size_t data_size, int batch_size,
                                              std::uint64_t seed, const char* stream,
                                              std::int64_t chunk) {
  std::uint64_t stream_tag = 0;
  for (const char* c = stream; *c; ++c) stream_tag = stream_tag * 131 + *c;
  std::size_t bs = std::min<std::size_t>(batch_size, data_size);
  std::size_t chunks_per_epoch = std::max<std::size_t>(1, data_size / bs);
  std::uint64_t epoch = static_cast<std::uint64_t>(chunk) / chunks_per_epoch;
  std::size_t within = static_cast<std::size_t>(chunk) % chunks_per_epoch;
  Rng rng(derive_seed(seed, stream_tag, epoch));
  auto perm = rng.permutation(data_size);
  std::vector<std::size_t> out(perm.begin() + within * bs,
                               perm.begin() + within * bs + bs);
  return out;
}

struct GenStep {
  MlpGrads trunk, price_head, share_head;
  double mean_psi = 0.0;
};

// Batch-mean generator gradient of the empirical cumulative regret.
inline GenStep generator_gradient(const GaesExchangeModel& model,
                                  const std::vector<ExchangeEconomy>& econs,
                                  const std::vector<std::size_t>& batch,
                                  GradMode grad_mode) {
  GenStep acc;
  acc.trunk = MlpGrads::zeros_like(model.gen.trunk);
  acc.price_head = MlpGrads::zeros_like(model.gen.price_head);
  acc.share_head = MlpGrads::zeros_like(model.gen.share_head);
  const double coef = 1.0 / static_cast<double>(batch.size());

  struct Item {
    MlpGrads trunk, price_head, share_head;
    double psi = 0.0;
  };
  std::vector<Item> items(batch.size());

  parallel_for(batch.size(), [&](std::size_t bi) {
    const ExchangeEconomy& econ = econs[batch[bi]];
    const int n = econ.n_buyers, m = econ.m_goods;
    Tape tape;
    auto tg = generator_forward_tape(tape, model.gen, econ);

    // deviations
    Tape::NodeId psi = tape.leaf(Tensor::scalar(0.0));
    MarketOutcome value_outcome;
    value_outcome.prices = tape.val(tg.out.prices).values;
    value_outcome.allocation = tape.val(tg.out.allocation);

    bool learned = model.disc.has_value();
    Tape::NodeId dev_alloc = -1;
    ActionProfile dev;
    if (learned && grad_mode == GradMode::pathwise) {
      auto td = discriminator_forward_tape(tape, *model.disc, econ, tg.out.prices,
                                           tg.out.allocation);
      dev_alloc = td.allocation;
    } else {
      dev = discriminator_forward_exchange(model, econ, value_outcome);
    }

    // buyer regrets
    for (int i = 0; i < n; ++i) {
      Tape::NodeId u_dev;
      if (dev_alloc >= 0) {
        u_dev = utility_tape(tape, econ, i, tape.row(dev_alloc, i));
      } else {
        std::vector<double> b(dev.x.begin() + dev.offset(i),
                              dev.x.begin() + dev.offset(i) + m);
        u_dev = tape.leaf(Tensor::scalar(utility(econ, i, b)));
      }
      auto u_cur = utility_tape(tape, econ, i, tape.row(tg.out.allocation, i));
      psi = tape.add(psi, tape.sub(u_dev, u_cur));
    }
    // seller regret: one-hot argmax from values, p.z on tape
    std::vector<double> supply(m, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) supply[j] += econ.E.at(i, j);
    auto z = tape.sub(tape.col_sum(tg.out.allocation), tape.leaf(Tensor::vec(supply)));
    {
      auto zv = tape.val(z).values;
      int arg = 0;
      for (int j = 1; j < m; ++j)
        if (zv[j] > zv[arg]) arg = j;
      auto dev_term = tape.slice(z, arg, 1);
      auto cur_term = tape.dot(tg.out.prices, z);
      psi = tape.add(psi, tape.sub(dev_term, cur_term));
    }

    auto grads = tape.backward(psi, Tensor::scalar(1.0));
    items[bi].trunk = collect_grads(tg.trunk, grads);
    items[bi].price_head = collect_grads(tg.price_head, grads);
    items[bi].share_head = collect_grads(tg.share_head, grads);
    items[bi].psi = tape.val(psi).values[0];
  });

  for (const auto& item : items) {
    acc.trunk.accumulate(item.trunk, coef);
    acc.price_head.accumulate(item.price_head, coef);
    acc.share_head.accumulate(item.share_head, coef);
    acc.mean_psi += coef * item.psi;
  }
  return acc;
}

struct DiscStep {
  MlpGrads trunk, share_head;
  double mean_psi = 0.0;
};

// Batch-mean discriminator gradient of psi against fixed outcomes.
inline DiscStep discriminator_gradient(
    const GaesExchangeModel& model, const std::vector<ExchangeEconomy>& econs,
    const std::vector<std::size_t>& batch,
    const std::vector<MarketOutcome>& outcomes) {
  const ExchangeDiscriminator& disc = *model.disc;
  DiscStep acc;
  acc.trunk = MlpGrads::zeros_like(disc.trunk);
  acc.share_head = MlpGrads::zeros_like(disc.share_head);
  const double coef = 1.0 / static_cast<double>(batch.size());

  struct Item {
    MlpGrads trunk, share_head;
    double psi = 0.0;
  };
  std::vector<Item> items(batch.size());

  parallel_for(batch.size(), [&](std::size_t bi) {
    const ExchangeEconomy& econ = econs[batch[bi]];
    const MarketOutcome& o = outcomes[bi];
    const int n = econ.n_buyers;
    Tape tape;
    auto prices = tape.leaf(Tensor::vec(o.prices));
    auto alloc = tape.leaf(o.allocation);
    auto td = discriminator_forward_tape(tape, disc, econ, prices, alloc);
    Tape::NodeId psi = tape.leaf(Tensor::scalar(0.0));
    for (int i = 0; i < n; ++i) {
      auto u_dev = utility_tape(tape, econ, i, tape.row(td.allocation, i));
      std::vector<double> xi(econ.m_goods);
      for (int j = 0; j < econ.m_goods; ++j) xi[j] = o.allocation.at(i, j);
      auto u_cur = tape.leaf(Tensor::scalar(utility(econ, i, xi)));
      psi = tape.add(psi, tape.sub(u_dev, u_cur));
    }
    auto grads = tape.backward(psi, Tensor::scalar(1.0));
    items[bi].trunk = collect_grads(td.trunk, grads);
    items[bi].share_head = collect_grads(td.share_head, grads);
    // report psi including the (constant) seller term for monitoring
    items[bi].psi = tape.val(psi).values[0];
  });
  for (const auto& item : items) {
    acc.trunk.accumulate(item.trunk, coef);
    acc.share_head.accumulate(item.share_head, coef);
    acc.mean_psi += coef * item.psi;
  }
  return acc;
}

inline std::vector<Tensor*> gen_params(GaesExchangeModel& model) {
  std::vector<Tensor*> out;
  for (auto* mlp : {&model.gen.trunk, &model.gen.price_head, &model.gen.share_head})
    for (auto& layer : mlp->layers) {
      out.push_back(&layer.w);
      out.push_back(&layer.b);
    }
  return out;
}

inline std::vector<Tensor*> disc_params(GaesExchangeModel& model) {
  std::vector<Tensor*> out;
  if (!model.disc) return out;
  for (auto* mlp : {&model.disc->trunk, &model.disc->share_head})
    for (auto& layer : mlp->layers) {
      out.push_back(&layer.w);
      out.push_back(&layer.b);
    }
  return out;
}

inline std::vector<const Tensor*> gen_grad_ptrs(const GenStep& g) {
  std::vector<const Tensor*> out;
  for (const auto* mg : {&g.trunk, &g.price_head, &g.share_head})
    for (std::size_t k = 0; k < mg->w.size(); ++k) {
      out.push_back(&mg->w[k]);
      out.push_back(&mg->b[k]);
    }
  return out;
}

inline std::vector<const Tensor*> disc_grad_ptrs(const DiscStep& g) {
  std::vector<const Tensor*> out;
  for (const auto* mg : {&g.trunk, &g.share_head})
    for (std::size_t k = 0; k < mg->w.size(); ++k) {
      out.push_back(&mg->w[k]);
      out.push_back(&mg->b[k]);
    }
  return out;
}

}  // namespace detail

// Stochastic exploitability descent: an outer stochastic descent step on the
// generator per iteration, preceded (warm-up) and followed (inner loop) by
// stochastic ascent steps on the discriminator when one is learned.
// Snapshots the best-validation weights; early-stops on stagnation.
struct GaesTrainResult {
  GaesExchangeModel model;       // final weights
  GaesExchangeModel best_model;  // best validation snapshot
  Trajectory trajectory;
  double best_validation = 0.0;
};

inline GaesTrainResult gaes_train(const ExchangeDataset& data, GaesExchangeModel model,
                                  const TrainConfig& cfg) {
  cfg.validate();
  if (data.train.empty()) throw ValidationError("gaes_train: empty training set");
  const bool learned = model.disc.has_value();

  GaesTrainResult result;
  auto t0 = std::chrono::steady_clock::now();
  auto wall_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     t0)
        .count();
  };

  auto gen_ptrs = detail::gen_params(model);
  OptState gen_opt = cfg.schedule == LrSchedule::adam
                         ? OptState::adam_state(std::vector<const Tensor*>(
                               gen_ptrs.begin(), gen_ptrs.end()))
                         : OptState::sgd_state();
  auto disc_ptrs = detail::disc_params(model);
  OptState disc_opt = cfg.schedule == LrSchedule::adam
                          ? OptState::adam_state(std::vector<const Tensor*>(
                                disc_ptrs.begin(), disc_ptrs.end()))
                          : OptState::sgd_state();

  auto disc_ascent = [&](std::int64_t chunk, std::int64_t s, const char* stream) {
    auto batch = detail::batch_indices(data.train.size(), cfg.batch_size, cfg.seed,
                                       stream, chunk);
    std::vector<MarketOutcome> outcomes(batch.size());
    bool warm = std::string(stream) == "warmup";
    for (std::size_t k = 0; k < batch.size(); ++k) {
      if (warm) {
        Rng rng(derive_seed(cfg.seed, 0xa10c, static_cast<std::uint64_t>(chunk) *
                                                  batch.size() + k));
        outcomes[k] = uniform_feasible_outcome(data.train[batch[k]], rng);
      } else {
        outcomes[k] = generator_forward_exchange(model, data.train[batch[k]]);
      }
    }
    auto step = detail::discriminator_gradient(model, data.train, batch, outcomes);
    double lr = inner_lr(cfg.schedule, cfg.lr_disc, cfg.pl_constant, s);
    opt_step(disc_ptrs, detail::disc_grad_ptrs(step), disc_opt, lr, /*ascent=*/true);
  };

  // discriminator warm-up on random economies and random feasible outcomes
  if (learned) {
    for (std::int64_t it = 0; it < cfg.warmup_iters; ++it)
      disc_ascent(it, it, "warmup");
  }

  double best_val = std::numeric_limits<double>::infinity();
  int stagnant = 0;
  result.best_model = model;

  std::int64_t last_good_iter = 0;
  for (std::int64_t t = 1; t <= cfg.outer_iters; ++t) {
    auto batch = detail::batch_indices(data.train.size(), cfg.batch_size, cfg.seed,
                                       "gen", t - 1);
    double mean_psi = 0.0;
    try {
      auto step = detail::generator_gradient(model, data.train, batch, cfg.grad_mode);
      mean_psi = step.mean_psi;
      if (!std::isfinite(mean_psi))
        throw NumericalError("non-finite loss at iteration " + std::to_string(t));
      double lr = outer_lr(cfg.schedule, cfg.lr_gen, t);
      opt_step(gen_ptrs, detail::gen_grad_ptrs(step), gen_opt, lr);
    } catch (const NumericalError& e) {
      result.trajectory.aborted = true;
      result.trajectory.note = std::string(e.what()) + " (aborted at iteration " +
                               std::to_string(t) + ", last good " +
                               std::to_string(last_good_iter) + ")";
      model = result.best_model;
      break;
    }
    last_good_iter = t;

    if (learned) {
      if (cfg.reset_inner)
        for (Tensor* p : disc_ptrs)
          std::fill(p->values.begin(), p->values.end(), 0.0);
      for (std::int64_t s = 0; s < cfg.inner_iters; ++s)
        disc_ascent((t - 1) * std::max<std::int64_t>(cfg.inner_iters, 1) + s, s,
                    "disc");
    }

    if (t % cfg.validate_every == 0 || t == cfg.outer_iters) {
      double val = data.valid.empty()
                       ? mean_psi
                       : mean_exact_exploitability(model, data.valid);
      result.trajectory.points.push_back({t, t, val, mean_psi, wall_ms()});
      if (val < best_val - 1e-12) {
        best_val = val;
        result.best_model = model;
        stagnant = 0;
      } else if (++stagnant >= cfg.early_stop_patience) {
        result.trajectory.note = "early stop at iteration " + std::to_string(t);
        break;
      }
    }
  }
  result.model = model;
  result.best_validation = best_val;
  return result;
}

// Batch-mean cumulative regret with exact-oracle deviations on two sets.
struct GeneralizationGap {
  double train_mean = 0.0, test_mean = 0.0, gap = 0.0;
};

inline GeneralizationGap eval_generalization_gap(
    const GaesExchangeModel& model, const std::vector<ExchangeEconomy>& train_set,
    const std::vector<ExchangeEconomy>& test_set) {
  if (train_set.empty() || test_set.empty())
    throw ValidationError("eval_generalization_gap: empty set");
  GeneralizationGap g;
  g.train_mean = mean_exact_exploitability(model, train_set);
  g.test_mean = mean_exact_exploitability(model, test_set);
  g.gap = std::abs(g.train_mean - g.test_mean);
  return g;
}

// ---------------------------------------------------------------------------
// GAES over Kyoto instances: softmax weights over padded vertex matrices.

struct KyotoGaesModel {
  int n = 0;
  int max_vertices = 0;
  MlpParams gen_trunk, gen_head;
  MlpParams disc_trunk, disc_head;
};

struct KyotoDataset {
  std::vector<KyotoInstance> train, valid;
  std::vector<PolytopeVertices> train_vertices, valid_vertices;
  int max_vertices = 0;

  void finalize() {
    train_vertices.clear();
    valid_vertices.clear();
    max_vertices = 0;
    for (const auto& inst : train) {
      train_vertices.push_back(kyoto_vertices(inst));
      max_vertices = std::max(max_vertices,
                              static_cast<int>(train_vertices.back().vertices.size()));
    }
    for (const auto& inst : valid) {
      valid_vertices.push_back(kyoto_vertices(inst));
      max_vertices = std::max(max_vertices,
                              static_cast<int>(valid_vertices.back().vertices.size()));
    }
  }
};

inline std::vector<double> kyoto_features(const KyotoInstance& inst) {
  std::vector<double> f;
  f.reserve(4 * inst.n);
  for (const auto* v : {&inst.rev, &inst.dmg, &inst.gamma, &inst.cap})
    for (double x : *v) f.push_back(x / 50.0);
  return f;
}

inline KyotoGaesModel make_kyoto_gaes_model(int n, int max_vertices,
                                            std::uint64_t seed, int hidden = 64) {
  Rng rng(derive_seed(seed, 0x6b1));
  KyotoGaesModel model;
  model.n = n;
  model.max_vertices = max_vertices;
  std::size_t fdim = static_cast<std::size_t>(4 * n);
  std::size_t adim = static_cast<std::size_t>(n * (n + 1));
  std::size_t h = static_cast<std::size_t>(hidden);
  std::size_t K = static_cast<std::size_t>(max_vertices);
  model.gen_trunk = make_mlp({fdim, h, h}, {Activation::relu, Activation::relu}, rng);
  model.gen_head = make_mlp({h, K}, {Activation::identity}, rng);
  model.disc_trunk =
      make_mlp({fdim + adim, h, h}, {Activation::relu, Activation::relu}, rng);
  model.disc_head = make_mlp({h, K}, {Activation::identity}, rng);
  return model;
}

namespace detail {

// Padded vertex matrix [K x dim]; zero rows are feasible (the zero action).
inline Tensor padded_vertex_matrix(const PolytopeVertices& pv, int max_vertices,
                                   int dim) {
  Tensor V = Tensor::zeros({static_cast<std::size_t>(max_vertices),
                            static_cast<std::size_t>(dim)});
  for (std::size_t k = 0; k < pv.vertices.size(); ++k)
    for (int j = 0; j < dim; ++j) V.at(k, j) = pv.vertices[k][j];
  return V;
}

inline Tape::NodeId kyoto_action_tape(Tape& tape, const TapedMlp& trunk,
                                      const TapedMlp& head, Tape::NodeId input,
                                      const Tensor& vertex_matrix) {
  auto hiddenv = mlp_forward_tape(tape, trunk, input);
  auto lambda = tape.softmax(mlp_forward_tape(tape, head, hiddenv));
  // action = lambda' V: [K] x [K x dim] -> [dim]
  auto Vt = tape.leaf(vertex_matrix);
  auto lam_row = tape.reshape(lambda, {1, vertex_matrix.shape[0]});
  return tape.reshape(tape.matmul(lam_row, Vt), {vertex_matrix.shape[1]});
}

inline Tape::NodeId country_payoff_tape(Tape& tape, const KyotoInstance& inst,
                                        int country, Tape::NodeId flat) {
  const int n = inst.n;
  auto e_i = tape.slice(flat, country, 1);
  // revenue e_i (beta_i - e_i / 2)
  auto rev = tape.sub(tape.scale(e_i, inst.rev[country]),
                      tape.scale(tape.mul(e_i, e_i), 0.5));
  // cost
  auto I_ii = tape.slice(flat, n + country * n + country, 1);
  Tape::NodeId cost = tape.scale(tape.mul(I_ii, I_ii), 0.5);
  for (int j = 0; j < n; ++j) {
    if (j == country) continue;
    auto I_ij = tape.slice(flat, n + country * n + j, 1);
    auto I_jj = tape.slice(flat, n + j * n + j, 1);
    auto pair = tape.add(I_ij, I_jj);
    cost = tape.add(cost, tape.scale(tape.sub(tape.mul(pair, pair),
                                              tape.mul(I_jj, I_jj)),
                                     0.5));
  }
  // damage: delta_i (sum e - sum I)
  auto net = tape.sub(tape.sum(tape.slice(flat, 0, n)),
                      tape.sum(tape.slice(flat, n, n * n)));
  auto dmg = tape.scale(net, inst.dmg[country]);
  return tape.sub(tape.sub(rev, cost), dmg);
}

// psi(a, b) with a single jointly feasible deviation profile b: each
// country's regret mixes its own block of b into a.
inline Tape::NodeId kyoto_psi_tape(Tape& tape, const KyotoInstance& inst,
                                   Tape::NodeId a_flat, Tape::NodeId b_flat) {
  const int n = inst.n;
  Tape::NodeId psi = tape.leaf(Tensor::scalar(0.0));
  for (int i = 0; i < n; ++i) {
    auto mixed = tape.splice(a_flat, tape.slice(b_flat, i, 1), i);
    mixed = tape.splice(mixed, tape.slice(b_flat, n + i * n, n), n + i * n);
    auto u_dev = country_payoff_tape(tape, inst, i, mixed);
    auto u_cur = country_payoff_tape(tape, inst, i, a_flat);
    psi = tape.add(psi, tape.sub(u_dev, u_cur));
  }
  return psi;
}

}  // namespace detail

inline KyotoAction kyoto_generator_forward(const KyotoGaesModel& model,
                                           const KyotoInstance& inst,
                                           const PolytopeVertices& pv) {
  Tape tape;
  auto trunk = place_on_tape(tape, model.gen_trunk);
  auto head = place_on_tape(tape, model.gen_head);
  auto input = tape.leaf(Tensor::vec(kyoto_features(inst)));
  auto V = detail::padded_vertex_matrix(pv, model.max_vertices, inst.n * (inst.n + 1));
  auto flat = detail::kyoto_action_tape(tape, trunk, head, input, V);
  return KyotoAction::from_flat(inst.n, tape.val(flat).values);
}

inline KyotoAction kyoto_discriminator_forward(const KyotoGaesModel& model,
                                               const KyotoInstance& inst,
                                               const PolytopeVertices& pv,
                                               const KyotoAction& action) {
  Tape tape;
  auto trunk = place_on_tape(tape, model.disc_trunk);
  auto head = place_on_tape(tape, model.disc_head);
  auto feats = kyoto_features(inst);
  auto aflat = action.flat();
  double box = kyoto_box_cap(inst);
  for (double& v : aflat) v /= box;
  feats.insert(feats.end(), aflat.begin(), aflat.end());
  auto input = tape.leaf(Tensor::vec(feats));
  auto V = detail::padded_vertex_matrix(pv, model.max_vertices, inst.n * (inst.n + 1));
  auto flat = detail::kyoto_action_tape(tape, trunk, head, input, V);
  return KyotoAction::from_flat(inst.n, tape.val(flat).values);
}

struct KyotoTrainResult {
  KyotoGaesModel model;
  KyotoGaesModel best_model;
  Trajectory trajectory;
  double best_validation = 0.0;
};

// Same loop as gaes_train with the vertex-weight heads; deviations are
// jointly feasible by construction (VE mode).
inline KyotoTrainResult gaes_train_kyoto(const KyotoDataset& data, KyotoGaesModel model,
                                         const TrainConfig& cfg) {
  cfg.validate();
  if (data.train.empty()) throw ValidationError("gaes_train_kyoto: empty training set");
  if (data.train_vertices.size() != data.train.size())
    throw ValidationError("gaes_train_kyoto: dataset not finalized");
  for (const auto& pv : data.train_vertices)
    if (static_cast<int>(pv.vertices.size()) > model.max_vertices)
      throw ValidationError("gaes_train_kyoto: vertex count exceeds model padding");

  KyotoTrainResult result;
  auto t0 = std::chrono::steady_clock::now();
  auto wall_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     t0)
        .count();
  };

  auto collect_mlp_params = [](MlpParams& a, MlpParams& b) {
    std::vector<Tensor*> out;
    for (auto* mlp : {&a, &b})
      for (auto& layer : mlp->layers) {
        out.push_back(&layer.w);
        out.push_back(&layer.b);
      }
    return out;
  };
  auto gen_ptrs = collect_mlp_params(model.gen_trunk, model.gen_head);
  auto disc_ptrs = collect_mlp_params(model.disc_trunk, model.disc_head);
  OptState gen_opt = cfg.schedule == LrSchedule::adam
                         ? OptState::adam_state(std::vector<const Tensor*>(
                               gen_ptrs.begin(), gen_ptrs.end()))
                         : OptState::sgd_state();
  OptState disc_opt = cfg.schedule == LrSchedule::adam
                          ? OptState::adam_state(std::vector<const Tensor*>(
                                disc_ptrs.begin(), disc_ptrs.end()))
                          : OptState::sgd_state();

  const int dim = model.n * (model.n + 1);

  // one discriminator ascent step on a batch of (instance, action) pairs
  auto disc_ascent = [&](std::int64_t chunk, std::int64_t s, const char* stream) {
    auto batch = detail::batch_indices(data.train.size(), cfg.batch_size, cfg.seed,
                                       stream, chunk);
    bool warm = std::string(stream) == "warmup";
    struct Item {
      MlpGrads trunk, head;
      double psi = 0.0;
    };
    std::vector<Item> items(batch.size());
    parallel_for(batch.size(), [&](std::size_t k) {
      const KyotoInstance& inst = data.train[batch[k]];
      const PolytopeVertices& pv = data.train_vertices[batch[k]];
      KyotoAction action;
      if (warm) {
        Rng rng(derive_seed(cfg.seed, 0x6f2,
                            static_cast<std::uint64_t>(chunk) * batch.size() + k));
        // random convex combination of the instance's vertices
        std::vector<double> lambda(pv.vertices.size());
        double ssum = 0.0;
        for (double& l : lambda) {
          l = rng.exponential();
          ssum += l;
        }
        std::vector<double> x(dim, 0.0);
        for (std::size_t v = 0; v < pv.vertices.size(); ++v)
          for (int j = 0; j < dim; ++j) x[j] += (lambda[v] / ssum) * pv.vertices[v][j];
        action = KyotoAction::from_flat(model.n, x);
      } else {
        action = kyoto_generator_forward(model, inst, pv);
      }
      Tape tape;
      auto trunk = place_on_tape(tape, model.disc_trunk);
      auto head = place_on_tape(tape, model.disc_head);
      auto feats = kyoto_features(inst);
      auto aflat = action.flat();
      double box = kyoto_box_cap(inst);
      for (double& v : aflat) v /= box;
      feats.insert(feats.end(), aflat.begin(), aflat.end());
      auto input = tape.leaf(Tensor::vec(feats));
      auto V = detail::padded_vertex_matrix(pv, model.max_vertices, dim);
      auto b_flat = detail::kyoto_action_tape(tape, trunk, head, input, V);
      auto a_leaf = tape.leaf(Tensor::vec(action.flat()));
      auto psi = detail::kyoto_psi_tape(tape, inst, a_leaf, b_flat);
      auto grads = tape.backward(psi, Tensor::scalar(1.0));
      items[k].trunk = collect_grads(trunk, grads);
      items[k].head = collect_grads(head, grads);
      items[k].psi = tape.val(psi).values[0];
    });
    MlpGrads gt = MlpGrads::zeros_like(model.disc_trunk);
    MlpGrads gh = MlpGrads::zeros_like(model.disc_head);
    const double coef = 1.0 / static_cast<double>(batch.size());
    for (auto& item : items) {
      gt.accumulate(item.trunk, coef);
      gh.accumulate(item.head, coef);
    }
    std::vector<const Tensor*> gptr;
    for (std::size_t k2 = 0; k2 < gt.w.size(); ++k2) {
      gptr.push_back(&gt.w[k2]);
      gptr.push_back(&gt.b[k2]);
    }
    for (std::size_t k2 = 0; k2 < gh.w.size(); ++k2) {
      gptr.push_back(&gh.w[k2]);
      gptr.push_back(&gh.b[k2]);
    }
    double lr = inner_lr(cfg.schedule, cfg.lr_disc, cfg.pl_constant, s);
    opt_step(disc_ptrs, gptr, disc_opt, lr, /*ascent=*/true);
  };

  for (std::int64_t it = 0; it < cfg.warmup_iters; ++it) disc_ascent(it, it, "warmup");

  auto validation_phi = [&] {
    if (data.valid.empty()) return 0.0;
    std::vector<double> vals(data.valid.size());
    parallel_for(data.valid.size(), [&](std::size_t k) {
      auto game = kyoto_pseudogame(data.valid[k], DeviationMode::joint);
      auto action =
          kyoto_generator_forward(model, data.valid[k], data.valid_vertices[k]);
      vals[k] = exploitability_value(
          game, detail::profile_from_action(model.n, action));
    });
    double s = 0.0;
    for (double v : vals) s += v;
    return s / static_cast<double>(vals.size());
  };

  double best_val = std::numeric_limits<double>::infinity();
  int stagnant = 0;
  result.best_model = model;
  for (std::int64_t t = 1; t <= cfg.outer_iters; ++t) {
    auto batch = detail::batch_indices(data.train.size(), cfg.batch_size, cfg.seed,
                                       "gen", t - 1);
    struct Item {
      MlpGrads trunk, head;
      double psi = 0.0;
    };
    std::vector<Item> items(batch.size());
    bool failed = false;
    std::string fail_note;
    try {
      parallel_for(batch.size(), [&](std::size_t k) {
        const KyotoInstance& inst = data.train[batch[k]];
        const PolytopeVertices& pv = data.train_vertices[batch[k]];
        Tape tape;
        auto trunk = place_on_tape(tape, model.gen_trunk);
        auto head = place_on_tape(tape, model.gen_head);
        auto input = tape.leaf(Tensor::vec(kyoto_features(inst)));
        auto V = detail::padded_vertex_matrix(pv, model.max_vertices, dim);
        auto a_flat = detail::kyoto_action_tape(tape, trunk, head, input, V);

        // deviation from the current discriminator (pathwise keeps it on
        // tape; stop_gradient treats it as a constant)
        Tape::NodeId b_flat;
        if (cfg.grad_mode == GradMode::pathwise) {
          auto dtrunk = place_on_tape(tape, model.disc_trunk);
          auto dhead = place_on_tape(tape, model.disc_head);
          auto feats_leaf = tape.leaf(Tensor::vec(kyoto_features(inst)));
          auto scaled_a = tape.scale(a_flat, 1.0 / kyoto_box_cap(inst));
          auto dinput = tape.concat({feats_leaf, scaled_a});
          b_flat = detail::kyoto_action_tape(tape, dtrunk, dhead, dinput, V);
        } else {
          auto action = KyotoAction::from_flat(model.n, tape.val(a_flat).values);
          auto bdev = kyoto_discriminator_forward(model, inst, pv, action);
          b_flat = tape.leaf(Tensor::vec(bdev.flat()));
        }
        auto psi = detail::kyoto_psi_tape(tape, inst, a_flat, b_flat);
        auto grads = tape.backward(psi, Tensor::scalar(1.0));
        items[k].trunk = collect_grads(trunk, grads);
        items[k].head = collect_grads(head, grads);
        items[k].psi = tape.val(psi).values[0];
      });
      MlpGrads gt = MlpGrads::zeros_like(model.gen_trunk);
      MlpGrads gh = MlpGrads::zeros_like(model.gen_head);
      const double coef = 1.0 / static_cast<double>(batch.size());
      double mean_psi = 0.0;
      for (auto& item : items) {
        gt.accumulate(item.trunk, coef);
        gh.accumulate(item.head, coef);
        mean_psi += coef * item.psi;
      }
      if (!std::isfinite(mean_psi))
        throw NumericalError("non-finite loss at iteration " + std::to_string(t));
      std::vector<const Tensor*> gptr;
      for (std::size_t k2 = 0; k2 < gt.w.size(); ++k2) {
        gptr.push_back(&gt.w[k2]);
        gptr.push_back(&gt.b[k2]);
      }
      for (std::size_t k2 = 0; k2 < gh.w.size(); ++k2) {
        gptr.push_back(&gh.w[k2]);
        gptr.push_back(&gh.b[k2]);
      }
      double lr = outer_lr(cfg.schedule, cfg.lr_gen, t);
      opt_step(gen_ptrs, gptr, gen_opt, lr);

      if (cfg.reset_inner)
        for (Tensor* p : disc_ptrs)
          std::fill(p->values.begin(), p->values.end(), 0.0);
      for (std::int64_t s = 0; s < cfg.inner_iters; ++s)
        disc_ascent((t - 1) * std::max<std::int64_t>(cfg.inner_iters, 1) + s, s,
                    "disc");

      if (t % cfg.validate_every == 0 || t == cfg.outer_iters) {
        double val = validation_phi();
        result.trajectory.points.push_back({t, t, val, mean_psi, wall_ms()});
        if (val < best_val - 1e-12) {
          best_val = val;
          result.best_model = model;
          stagnant = 0;
        } else if (++stagnant >= cfg.early_stop_patience) {
          result.trajectory.note = "early stop at iteration " + std::to_string(t);
          break;
        }
      }
    } catch (const NumericalError& e) {
      failed = true;
      fail_note = e.what();
    }
    if (failed) {
      result.trajectory.aborted = true;
      result.trajectory.note = fail_note;
      model = result.best_model;
      break;
    }
  }
  result.model = model;
  result.best_validation = best_val;
  return result;
}

// ---------------------------------------------------------------------------
// Model serialization

inline nlohmann::json exchange_model_to_json(const GaesExchangeModel& model) {
  nlohmann::json j{{"kind", "exchange_gaes"},
                   {"n", model.gen.n},
                   {"m", model.gen.m},
                   {"generator",
                    {{"trunk", mlp_to_json(model.gen.trunk)},
                     {"price_head", mlp_to_json(model.gen.price_head)},
                     {"share_head", mlp_to_json(model.gen.share_head)}}}};
  if (model.disc) {
    j["discriminator"] = {{"trunk", mlp_to_json(model.disc->trunk)},
                          {"share_head", mlp_to_json(model.disc->share_head)}};
  } else {
    j["discriminator"] = nullptr;
  }
  return j;
}

inline GaesExchangeModel exchange_model_from_json(const nlohmann::json& j) {
  GaesExchangeModel model;
  model.gen.n = j.at("n").get<int>();
  model.gen.m = j.at("m").get<int>();
  model.gen.trunk = mlp_from_json(j.at("generator").at("trunk"));
  model.gen.price_head = mlp_from_json(j.at("generator").at("price_head"));
  model.gen.share_head = mlp_from_json(j.at("generator").at("share_head"));
  if (!j.at("discriminator").is_null()) {
    ExchangeDiscriminator d;
    d.n = model.gen.n;
    d.m = model.gen.m;
    d.trunk = mlp_from_json(j.at("discriminator").at("trunk"));
    d.share_head = mlp_from_json(j.at("discriminator").at("share_head"));
    model.disc = std::move(d);
  }
  return model;
}

inline nlohmann::json kyoto_model_to_json(const KyotoGaesModel& model) {
  return {{"kind", "kyoto_gaes"},
          {"n", model.n},
          {"max_vertices", model.max_vertices},
          {"generator",
           {{"trunk", mlp_to_json(model.gen_trunk)},
            {"head", mlp_to_json(model.gen_head)}}},
          {"discriminator",
           {{"trunk", mlp_to_json(model.disc_trunk)},
            {"head", mlp_to_json(model.disc_head)}}}};
}

inline KyotoGaesModel kyoto_model_from_json(const nlohmann::json& j) {
  KyotoGaesModel model;
  model.n = j.at("n").get<int>();
  model.max_vertices = j.at("max_vertices").get<int>();
  model.gen_trunk = mlp_from_json(j.at("generator").at("trunk"));
  model.gen_head = mlp_from_json(j.at("generator").at("head"));
  model.disc_trunk = mlp_from_json(j.at("discriminator").at("trunk"));
  model.disc_head = mlp_from_json(j.at("discriminator").at("head"));
  return model;
}

}  // namespace pseudeq
