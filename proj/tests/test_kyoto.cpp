#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "pseudeq/kyoto.hpp"

using namespace pseudeq;

namespace {

KyotoInstance two_country(std::vector<double> rev, std::vector<double> dmg,
                          std::vector<double> gamma, std::vector<double> cap) {
  KyotoInstance k;
  k.n = 2;
  k.rev = std::move(rev);
  k.dmg = std::move(dmg);
  k.gamma = std::move(gamma);
  k.cap = std::move(cap);
  return k;
}

}  // namespace

TEST_CASE("country payoff formulas") {
  // zero action has zero revenue, cost and damage
  auto inst = two_country({3, 4}, {1, 2}, {1, 1}, {1, 1});
  auto zero = KyotoAction::zeros(2);
  REQUIRE(country_payoff(inst, 0, zero) == 0.0);
  REQUIRE(country_payoff(inst, 1, zero) == 0.0);

  // one country at the revenue parabola vertex
  KyotoInstance solo;
  solo.n = 1;
  solo.rev = {5.0};
  solo.dmg = {0.0};
  solo.gamma = {1.0};
  solo.cap = {100.0};
  auto a = KyotoAction::zeros(1);
  a.e[0] = 5.0;
  REQUIRE(country_payoff(solo, 0, a) == Catch::Approx(5.0 * 5.0 / 2.0));

  // cross-investment cost: I_12 = 1 with host investment I_22 = 1
  auto inst2 = two_country({0, 0}, {0, 0}, {1, 1}, {1, 1});
  auto act = KyotoAction::zeros(2);
  act.I.at(0, 1) = 1.0;
  act.I.at(1, 1) = 1.0;
  REQUIRE(country_payoff(inst2, 0, act) == Catch::Approx(-1.5));
}

TEST_CASE("payoff gradient matches finite differences") {
  auto inst = two_country({3.5, 7.0}, {1.2, 0.7}, {2.0, 0.8}, {4.0, 2.0});
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(6);
    for (double& v : x) v = rng.uniform(0.0, 3.0);
    for (int player = 0; player < 2; ++player) {
      auto f = [&](const std::vector<double>& xv) {
        return country_payoff(inst, player, KyotoAction::from_flat(2, xv));
      };
      auto gn = oracles::numeric_gradient(f, x);
      auto ga = country_payoff_grad(inst, player, KyotoAction::from_flat(2, x));
      for (int k = 0; k < 6; ++k) REQUIRE(oracles::rel_err(ga[k], gn[k]) <= 1e-6);
    }
  }
}

TEST_CASE("joint halfspaces") {
  KyotoInstance solo;
  solo.n = 1;
  solo.rev = {1};
  solo.dmg = {1};
  solo.gamma = {1};
  solo.cap = {1};
  auto hs = joint_halfspaces(solo);
  REQUIRE(hs.rows() == 2 * 1 + 1 * 2);
  REQUIRE(hs.dim() == 2);
  // feasible iff 0 <= e - I <= 1 and e, I >= 0
  REQUIRE(hs.contains(std::vector<double>{0.5, 0.2}));
  REQUIRE(hs.contains(std::vector<double>{0.0, 0.0}));
  REQUIRE_FALSE(hs.contains(std::vector<double>{1.5, 0.2}));
  REQUIRE_FALSE(hs.contains(std::vector<double>{0.2, 0.5}));

  auto inst = two_country({3, 4}, {1, 2}, {1.5, 2.5}, {2, 3});
  auto hs2 = joint_halfspaces(inst);
  REQUIRE(hs2.rows() == 2 * 2 + 2 * 3);
  REQUIRE(hs2.contains(KyotoAction::zeros(2).flat()));
}

TEST_CASE("kyoto vertices against the grid oracle") {
  KyotoInstance solo;
  solo.n = 1;
  solo.rev = {1};
  solo.dmg = {1};
  solo.gamma = {1};
  solo.cap = {1};
  auto pv = enumerate_vertices(joint_halfspaces(solo), 8.0);
  REQUIRE(pv.vertices.size() == 4);
  REQUIRE(pv.box_clipped);

  // sampled instance: every vertex feasible and extreme; random convex
  // combinations stay feasible
  auto inst = sample_kyoto(2, 77);
  auto pv2 = kyoto_vertices(inst);
  REQUIRE(!pv2.vertices.empty());
  const auto& sys = pv2.halfspaces;
  Rng rng(9);
  for (const auto& v : pv2.vertices) {
    REQUIRE(sys.contains(v, 1e-8));
    int tight = 0;
    for (std::size_t r = 0; r < sys.rows(); ++r)
      if (std::abs(sys.slack(r, v)) <= 1e-8) ++tight;
    REQUIRE(tight >= 6);
  }
  for (int t = 0; t < 20; ++t) {
    std::vector<double> lambda(pv2.vertices.size());
    double s = 0;
    for (double& l : lambda) {
      l = rng.exponential();
      s += l;
    }
    std::vector<double> x(6, 0.0);
    for (std::size_t k = 0; k < pv2.vertices.size(); ++k)
      for (int j = 0; j < 6; ++j) x[j] += (lambda[k] / s) * pv2.vertices[k][j];
    REQUIRE(sys.contains(x, 1e-8));
  }
}

TEST_CASE("payoff is concave along own-action segments") {
  auto inst = sample_kyoto(2, 31);
  auto game = kyoto_pseudogame(inst, DeviationMode::individual);
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    auto a = sample_feasible_profile(game, rng);
    int player = t % 2;
    auto b = a;
    int off = a.offset(player);
    for (int k = 0; k < 3; ++k) b.x[off + k] = rng.uniform(0.0, 5.0);
    auto mid = a;
    for (int k = 0; k < 3; ++k) mid.x[off + k] = 0.5 * (a.x[off + k] + b.x[off + k]);
    double chord = 0.5 * (game.payoff(a, player) + game.payoff(b, player));
    REQUIRE(chord <= game.payoff(mid, player) + 1e-9);
  }
}

TEST_CASE("best response: exact QP vs vertex-hull ascent and grid") {
  auto inst = two_country({3, 4}, {1, 2}, {1, 1}, {1, 1});
  auto game = kyoto_pseudogame(inst, DeviationMode::joint);
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    auto a = sample_feasible_profile(game, rng);
    for (int player = 0; player < 2; ++player) {
      auto br = game.best_response(player, a);
      auto sub = a.with_player(player, br);
      double qp_val = game.payoff(sub, player);
      // vertex-hull projected gradient lands within 1e-3 of the QP value
      auto pga = detail::vertex_hull_best_response(inst, player, a,
                                                   DeviationMode::joint, 123);
      auto sub2 = a.with_player(player, pga);
      double pga_val = game.payoff(sub2, player);
      REQUIRE(pga_val <= qp_val + 1e-9);
      REQUIRE(qp_val - pga_val <= 1e-3);
      // deviation stays jointly feasible
      for (int p = 0; p < 2; ++p)
        for (double cval : game.constraints(sub, p)) REQUIRE(cval >= -1e-8);
    }
  }
}

TEST_CASE("zero action is a VE when investment-routed emissions do not pay") {
  // joint deviations force e_i = gamma_i I_ii at caps 0, so the marginal
  // value at zero is beta_i - delta_i (1 - 1/gamma_i); make it negative
  auto inst = two_country({1, 1}, {10, 10}, {2, 2}, {0, 0});
  auto game = kyoto_pseudogame(inst, DeviationMode::joint);
  auto zero = game.zero_profile();
  REQUIRE(exploitability_value(game, zero) <= 1e-6);

  // individually (ignoring other countries' transfer balances), paying for
  // cross investments that reduce damage is profitable, so the GNE reading
  // gives strictly positive exploitability here
  auto game_ind = kyoto_pseudogame(inst, DeviationMode::individual);
  REQUIRE(exploitability_value(game_ind, zero) > 1e-3);
}

TEST_CASE("joint-mode exploitability never exceeds individual-mode") {
  auto inst = sample_kyoto(2, 5);
  auto joint = kyoto_pseudogame(inst, DeviationMode::joint);
  auto indiv = kyoto_pseudogame(inst, DeviationMode::individual);
  Rng rng(8);
  for (int t = 0; t < 15; ++t) {
    auto a = sample_feasible_profile(joint, rng);
    REQUIRE(exploitability_value(joint, a) <=
            exploitability_value(indiv, a) + 1e-9);
  }
}

TEST_CASE("solve_ve reaches near-zero exploitability") {
  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    auto inst = sample_kyoto(2, seed);
    auto ve = solve_ve(inst, seed);
    REQUIRE(ve.converged);
    REQUIRE(ve.exploitability <= 1e-6);
  }
}

TEST_CASE("classification labels") {
  auto inst = two_country({3, 4}, {1, 2}, {1, 1}, {5, 5});
  auto a = KyotoAction::zeros(2);
  a.e = {1.0, 2.0};  // well below caps
  auto c = classify_gne(inst, a, 1e-4);
  REQUIRE(c.label == "both-interior");

  a.e = {5.0, 5.0};  // exactly at cap
  c = classify_gne(inst, a, 1e-4);
  REQUIRE(c.label == "both-at-cap");
  REQUIRE_FALSE(c.cross_investment);

  a.e = {5.0, 2.0};
  c = classify_gne(inst, a, 1e-4);
  REQUIRE(c.label == "one-at-cap");

  a.I.at(0, 1) = 1.0;  // cap_0 lhs becomes 5 - 1 < 5: no longer binding
  c = classify_gne(inst, a, 1e-4);
  REQUIRE(c.label == "both-interior+cross-investment");

  // labels are stable when the tolerance halves and slacks are 10x away
  a = KyotoAction::zeros(2);
  a.e = {5.0 - 1e-2, 5.0 - 1e-2};
  REQUIRE(classify_gne(inst, a, 1e-4).label ==
          classify_gne(inst, a, 5e-5).label);
}

TEST_CASE("forced interior and at-cap equilibria classify as expected") {
  // heavy damages, large caps: equilibrium emissions far below cap
  auto interior = two_country({1, 1}, {40, 40}, {2, 2}, {45, 45});
  auto ve1 = solve_ve(interior, 1);
  REQUIRE(ve1.converged);
  REQUIRE(classify_gne(interior, ve1.action).label == "both-interior");

  // huge revenue slopes, tiny caps, low damage: caps bind
  auto atcap = two_country({45, 45}, {1, 1}, {1, 1}, {2, 2});
  auto ve2 = solve_ve(atcap, 2);
  REQUIRE(ve2.converged);
  auto label2 = classify_gne(atcap, ve2.action).label;
  REQUIRE(label2.substr(0, 11) == "both-at-cap");
}

TEST_CASE("kyoto sampling determinism and range") {
  auto a = sample_kyoto(2, 123);
  auto b = sample_kyoto(2, 123);
  REQUIRE(a.rev == b.rev);
  REQUIRE(a.dmg == b.dmg);
  REQUIRE(a.gamma == b.gamma);
  REQUIRE(a.cap == b.cap);
  Rng seeds(9);
  for (int t = 0; t < 1000; ++t) {
    auto k = sample_kyoto(2, seeds.bits());
    for (auto vecp : {&k.rev, &k.dmg, &k.gamma, &k.cap})
      for (double v : *vecp) {
        REQUIRE(v >= 0.5);
        REQUIRE(v <= 50.0);
      }
  }
}

TEST_CASE("kyoto JSON round trip") {
  auto inst = sample_kyoto(3, 55);
  auto j = kyoto_to_json(inst);
  auto back = kyoto_from_json(j);
  REQUIRE(back.n == 3);
  REQUIRE(back.rev == inst.rev);
  REQUIRE(back.cap == inst.cap);
  REQUIRE(back.seed == inst.seed);
}
