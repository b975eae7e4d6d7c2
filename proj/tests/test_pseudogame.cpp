#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "pseudeq/pseudogame.hpp"

using namespace pseudeq;

namespace {

// Matching pennies with the mismatch convention for player 1:
// at ((1,0),(1,0)) player 1 regrets 2 by switching rows.
PseudoGame matching_pennies() {
  Tensor A = Tensor::matrix(2, 2, {-1, 1, 1, -1});
  Tensor B = Tensor::matrix(2, 2, {1, -1, -1, 1});
  return bimatrix_adapter(A, B);
}

ActionProfile profile2(std::vector<double> x, std::vector<double> y) {
  std::vector<double> all = x;
  all.insert(all.end(), y.begin(), y.end());
  return ActionProfile({(int)x.size(), (int)y.size()}, all);
}

double closed_form_phi(double a1, double a2) {
  return std::sqrt(a1) + std::sqrt(a2) - a1 - a2;
}

}  // namespace

TEST_CASE("regret: identity deviation and bilinear evaluation") {
  auto mp = matching_pennies();
  auto a = profile2({1, 0}, {1, 0});
  REQUIRE(regret(mp, 0, a, a.player(0)) == 0.0);
  std::vector<double> dev{0.0, 1.0};
  REQUIRE(regret(mp, 0, a, dev) == Catch::Approx(2.0));
}

TEST_CASE("regret on the non-Lipschitz example") {
  auto g = nonlipschitz_example();
  auto a = profile2({0.25}, {0.25});
  std::vector<double> dev{0.5};
  REQUIRE(regret(g, 0, a, dev) == Catch::Approx(0.25));
  // deviation beyond sqrt(a2) violates the constraint and is rejected
  std::vector<double> bad{0.6};
  REQUIRE_THROWS_AS(regret(g, 0, a, bad), ValidationError);
}

TEST_CASE("cumulative regret") {
  auto g = nonlipschitz_example();
  auto a = profile2({0.25}, {0.25});
  REQUIRE(cumulative_regret(g, a, a) == 0.0);
  auto b = profile2({0.5}, {0.5});
  REQUIRE(cumulative_regret(g, a, b) == Catch::Approx(0.5));
}

TEST_CASE("cumulative regret is additive over independent subgames") {
  // two decoupled players, each with payoff = own scalar action on [0,1]
  PseudoGame g;
  g.n_players = 2;
  g.action_dims = {1, 1};
  g.box_lo = {0, 0};
  g.box_hi = {1, 1};
  g.payoff = [](const ActionProfile& a, int i) { return a.x[i]; };
  g.constraints = [](const ActionProfile& a, int i) {
    return std::vector<double>{a.x[i], 1.0 - a.x[i]};
  };
  g.feasible_project = [](const ActionProfile& a) {
    ActionProfile out = a;
    for (double& v : out.x) v = std::clamp(v, 0.0, 1.0);
    return out;
  };
  auto a = profile2({0.2}, {0.6});
  auto b = profile2({0.9}, {0.7});
  double r0 = regret(g, 0, a, b.player(0));
  double r1 = regret(g, 1, a, b.player(1));
  REQUIRE(cumulative_regret(g, a, b) == Catch::Approx(r0 + r1).margin(1e-15));
}

TEST_CASE("exploitability closed form on the non-Lipschitz example") {
  auto g = nonlipschitz_example();
  REQUIRE(exploitability_value(g, profile2({0.25}, {0.25})) == Catch::Approx(0.5));
  REQUIRE(exploitability_value(g, profile2({1.0}, {1.0})) ==
          Catch::Approx(0.0).margin(1e-12));

  // the closed form holds on a grid of jointly feasible points
  for (int i = 0; i <= 20; ++i) {
    for (int j = 0; j <= 20; ++j) {
      double a1 = i / 20.0, a2 = j / 20.0;
      if (a2 - a1 * a1 < 0 || a1 - a2 * a2 < 0) continue;
      auto phi = exploitability_value(g, profile2({a1}, {a2}));
      REQUIRE(phi == Catch::Approx(closed_form_phi(a1, a2)).margin(1e-9));
    }
  }
}

TEST_CASE("exploitability gradient blows up near zero") {
  auto g = nonlipschitz_example();
  double h = 1e-5;
  double base = 1e-4;
  // centered difference of phi along each coordinate at (1e-4, 1e-4)
  for (int k = 0; k < 2; ++k) {
    auto lo = profile2({k == 0 ? base - h : base}, {k == 1 ? base - h : base});
    auto hi = profile2({k == 0 ? base + h : base}, {k == 1 ? base + h : base});
    double grad =
        (exploitability_value(g, hi) - exploitability_value(g, lo)) / (2 * h);
    REQUIRE(grad > 40.0);
  }
}

TEST_CASE("matching pennies exploitability") {
  auto mp = matching_pennies();
  auto uniform = profile2({0.5, 0.5}, {0.5, 0.5});
  REQUIRE(exploitability_value(mp, uniform) == Catch::Approx(0.0).margin(1e-12));

  // pure non-equilibrium profile: the mismatched player regrets 2, the
  // matched player regrets 0 (checked by enumerating the 2x2 deviations)
  auto pure = profile2({1, 0}, {1, 0});
  double best0 = 0, best1 = 0;
  for (int r = 0; r < 2; ++r) {
    std::vector<double> d{r == 0 ? 1.0 : 0.0, r == 0 ? 0.0 : 1.0};
    best0 = std::max(best0, regret(mp, 0, pure, d));
    best1 = std::max(best1, regret(mp, 1, pure, d));
  }
  REQUIRE(exploitability_value(mp, pure) == Catch::Approx(best0 + best1));
  REQUIRE(exploitability_value(mp, pure) == Catch::Approx(2.0));
}

TEST_CASE("dominant strategy best response ignores the opponent") {
  Tensor A = Tensor::matrix(2, 2, {1, 1, 0, 0});
  Tensor B = Tensor::matrix(2, 2, {0, 0, 0, 0});
  auto g = bimatrix_adapter(A, B);
  Rng rng(3);
  for (int t = 0; t < 5; ++t) {
    auto y = rng.simplex(2);
    auto a = profile2({0.3, 0.7}, y);
    auto br = g.best_response(0, a);
    REQUIRE(br == std::vector<double>{1.0, 0.0});
  }
}

TEST_CASE("brute force exploitability") {
  auto g = nonlipschitz_example();
  auto a = profile2({0.25}, {0.25});
  REQUIRE(brute_force_exploitability(g, a, 101) == Catch::Approx(0.5).margin(0.01));
  REQUIRE(brute_force_exploitability(g, a, 1) == 0.0);

  auto mp = matching_pennies();
  auto uniform = profile2({0.5, 0.5}, {0.5, 0.5});
  REQUIRE(brute_force_exploitability(mp, uniform, 101) ==
          Catch::Approx(0.0).margin(1e-9));

  // refinement approaches the oracle exploitability from below
  auto mid = profile2({0.36}, {0.49});
  double oracle = exploitability_value(g, mid);
  double coarse = brute_force_exploitability(g, mid, 11);
  double fine = brute_force_exploitability(g, mid, 201);
  REQUIRE(coarse <= oracle + 1e-9);
  REQUIRE(fine <= oracle + 1e-9);
  REQUIRE(std::abs(fine - oracle) <= std::abs(coarse - oracle) + 1e-12);
  REQUIRE(std::abs(fine - oracle) <= 0.005);

  PseudoGame big;
  big.n_players = 1;
  big.action_dims = {8};
  big.box_lo.assign(8, 0.0);
  big.box_hi.assign(8, 1.0);
  big.payoff = [](const ActionProfile&, int) { return 0.0; };
  big.constraints = [](const ActionProfile&, int) { return std::vector<double>{}; };
  big.feasible_project = [](const ActionProfile& a) { return a; };
  REQUIRE_THROWS_AS(brute_force_exploitability(big, big.zero_profile(), 101),
                    ValidationError);
}

TEST_CASE("exploitability dominates cumulative regret on random profiles") {
  auto mp = matching_pennies();
  Rng rng(17);
  for (int t = 0; t < 30; ++t) {
    auto a = sample_feasible_profile(mp, rng);
    auto b = sample_feasible_profile(mp, rng);
    REQUIRE(exploitability_value(mp, a) >= cumulative_regret(mp, a, b) - 1e-9);
  }
  auto g = nonlipschitz_example();
  Rng rng2(18);
  for (int t = 0; t < 30; ++t) {
    auto a = sample_feasible_profile(g, rng2);
    // a feasible deviation: any b with b_i <= sqrt(a_{-i})
    auto b = a;
    b.x[0] = rng2.uniform(0.0, std::sqrt(a.x[1]));
    b.x[1] = rng2.uniform(0.0, std::sqrt(a.x[0]));
    REQUIRE(exploitability_value(g, a) >= cumulative_regret(g, a, b) - 1e-9);
  }
}

TEST_CASE("player permutation symmetry via transposed bimatrix") {
  Tensor A = Tensor::matrix(2, 2, {-1, 1, 1, -1});
  Tensor B = Tensor::matrix(2, 2, {1, -1, -1, 1});
  auto g1 = bimatrix_adapter(A, B);
  // swap players: payoff matrices transpose and swap roles
  Tensor At = Tensor::matrix(2, 2, {B.at(0, 0), B.at(1, 0), B.at(0, 1), B.at(1, 1)});
  Tensor Bt = Tensor::matrix(2, 2, {A.at(0, 0), A.at(1, 0), A.at(0, 1), A.at(1, 1)});
  auto g2 = bimatrix_adapter(At, Bt);
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    auto x = rng.simplex(2);
    auto y = rng.simplex(2);
    auto p1 = profile2(x, y);
    auto p2 = profile2(y, x);
    REQUIRE(exploitability_value(g1, p1) ==
            Catch::Approx(exploitability_value(g2, p2)).margin(1e-12));
  }
}

TEST_CASE("payoff shifts leave regrets unchanged") {
  Tensor A = Tensor::matrix(2, 2, {-1, 1, 1, -1});
  Tensor B = Tensor::matrix(2, 2, {1, -1, -1, 1});
  Tensor Ashift = A;
  for (double& v : Ashift.values) v += 7.5;
  auto g1 = bimatrix_adapter(A, B);
  auto g2 = bimatrix_adapter(Ashift, B);
  Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    auto a = sample_feasible_profile(g1, rng);
    auto b = sample_feasible_profile(g1, rng);
    REQUIRE(regret(g1, 0, a, b.player(0)) ==
            Catch::Approx(regret(g2, 0, a, b.player(0))).margin(1e-12));
    REQUIRE(exploitability_value(g1, a) ==
            Catch::Approx(exploitability_value(g2, a)).margin(1e-12));
  }
}

TEST_CASE("feasible_project is idempotent") {
  auto g = nonlipschitz_example();
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    ActionProfile raw({1, 1}, {rng.uniform(-0.5, 1.5), rng.uniform(-0.5, 1.5)});
    auto once = g.feasible_project(raw);
    auto twice = g.feasible_project(once);
    REQUIRE(once.x[0] == Catch::Approx(twice.x[0]).margin(1e-12));
    REQUIRE(once.x[1] == Catch::Approx(twice.x[1]).margin(1e-12));
    REQUIRE(detail::profile_feasible(g, once));
  }
  auto mp = matching_pennies();
  Rng rng2(22);
  for (int t = 0; t < 50; ++t) {
    ActionProfile raw({2, 2}, {rng2.uniform(-1, 2), rng2.uniform(-1, 2),
                               rng2.uniform(-1, 2), rng2.uniform(-1, 2)});
    auto once = mp.feasible_project(raw);
    auto twice = mp.feasible_project(once);
    for (int k = 0; k < 4; ++k)
      REQUIRE(once.x[k] == Catch::Approx(twice.x[k]).margin(1e-12));
  }
}

TEST_CASE("best responses of bimatrix and non-Lipschitz games are feasible") {
  auto g = nonlipschitz_example();
  Rng rng(31);
  for (int t = 0; t < 30; ++t) {
    auto a = sample_feasible_profile(g, rng);
    for (int i = 0; i < 2; ++i) {
      auto br = g.best_response(i, a);
      auto sub = a.with_player(i, br);
      for (double c : g.constraints(sub, i)) REQUIRE(c >= -1e-9);
    }
  }
}

TEST_CASE("normalized exploitability") {
  auto mp = matching_pennies();
  auto uniform = profile2({0.5, 0.5}, {0.5, 0.5});
  double norm = normalized_exploitability(mp, uniform, 200, 7);
  REQUIRE(norm == Catch::Approx(0.0).margin(1e-9));

  // profiles drawn from the same sampler average out to about 1
  Rng rng(14);
  double acc = 0.0;
  const int kDraws = 300;
  for (int t = 0; t < kDraws; ++t) {
    auto a = sample_feasible_profile(mp, rng);
    acc += normalized_exploitability(mp, a, 400, 1000 + t);
  }
  REQUIRE(acc / kDraws == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("normalized exploitability rejects degenerate games") {
  // constant payoffs: exploitability is identically zero
  PseudoGame g;
  g.n_players = 1;
  g.action_dims = {1};
  g.box_lo = {0};
  g.box_hi = {1};
  g.payoff = [](const ActionProfile&, int) { return 1.0; };
  g.constraints = [](const ActionProfile&, int) { return std::vector<double>{}; };
  g.feasible_project = [](const ActionProfile& a) { return a; };
  REQUIRE_THROWS_AS(normalized_exploitability(g, g.zero_profile(), 10, 1),
                    ValidationError);
}

TEST_CASE("profile and report serialization") {
  auto a = profile2({0.25, 0.75}, {0.5, 0.5});
  auto j = profile_to_json(a);
  auto back = profile_from_json(j);
  REQUIRE(back.dims == a.dims);
  REQUIRE(back.x == a.x);
  RegretReport rep{{0.1, 0.2}, 0.3, 0.5};
  auto jr = regret_report_to_json(rep);
  REQUIRE(jr["cumulative"] == 0.3);
}
