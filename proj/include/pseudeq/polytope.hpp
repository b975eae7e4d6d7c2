#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pseudeq/common.hpp"
#include "pseudeq/tensor.hpp"

namespace pseudeq {

// Halfspace system { x : A x <= b }.
struct Halfspaces {
  Tensor A;               // rows x dim
  std::vector<double> b;  // rows

  std::size_t rows() const { return A.rows(); }
  std::size_t dim() const { return A.cols(); }

  double slack(std::size_t row, std::span<const double> x) const {
    double s = b[row];
    for (std::size_t j = 0; j < dim(); ++j) s -= A.at(row, j) * x[j];
    return s;
  }

  bool contains(std::span<const double> x, double tol = 1e-8) const {
    for (std::size_t r = 0; r < rows(); ++r)
      if (slack(r, x) < -tol) return false;
    return true;
  }

  Halfspaces with_upper_box(double cap) const {
    Halfspaces out = *this;
    std::size_t d = dim();
    Tensor A2 = Tensor::zeros({rows() + d, d});
    for (std::size_t r = 0; r < rows(); ++r)
      for (std::size_t j = 0; j < d; ++j) A2.at(r, j) = A.at(r, j);
    for (std::size_t j = 0; j < d; ++j) {
      A2.at(rows() + j, j) = 1.0;
      out.b.push_back(cap);
    }
    out.A = std::move(A2);
    return out;
  }
};

struct PolytopeVertices {
  std::vector<std::vector<double>> vertices;
  Halfspaces halfspaces;   // the system the vertices satisfy (box included)
  bool box_clipped = false;  // some vertex sits on the added box
};

namespace detail {

// Gaussian elimination with partial pivoting; returns false when singular.
inline bool solve_linear(std::vector<double> M, std::vector<double> rhs, int n,
                         std::vector<double>& out) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(M[r * n + col]) > std::abs(M[piv * n + col])) piv = r;
    if (std::abs(M[piv * n + col]) < 1e-12) return false;
    if (piv != col) {
      for (int j = 0; j < n; ++j) std::swap(M[col * n + j], M[piv * n + j]);
      std::swap(rhs[col], rhs[piv]);
    }
    for (int r = col + 1; r < n; ++r) {
      double f = M[r * n + col] / M[col * n + col];
      if (f == 0.0) continue;
      for (int j = col; j < n; ++j) M[r * n + j] -= f * M[col * n + j];
      rhs[r] -= f * rhs[col];
    }
  }
  out.assign(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double s = rhs[r];
    for (int j = r + 1; j < n; ++j) s -= M[r * n + j] * out[j];
    out[r] = s / M[r * n + r];
  }
  return true;
}

}  // namespace detail

// All vertices of {Ax <= b} intersected with the upper box x <= box_cap.
// Exhaustive basis enumeration: every dim-subset of rows is solved as a
// square system and kept when feasible. Dedup tolerance 1e-7.
inline PolytopeVertices enumerate_vertices(const Halfspaces& hs, double box_cap) {
  const int d = static_cast<int>(hs.dim());
  if (d > 8) throw ValidationError("enumerate_vertices: dimension > 8");
  Halfspaces sys = hs.with_upper_box(box_cap);
  const int rows = static_cast<int>(sys.rows());

  PolytopeVertices out;
  out.halfspaces = sys;

  std::vector<int> comb(d);
  for (int i = 0; i < d; ++i) comb[i] = i;
  std::vector<double> M(d * d), rhs(d), x;

  auto process = [&] {
    for (int i = 0; i < d; ++i) {
      rhs[i] = sys.b[comb[i]];
      for (int j = 0; j < d; ++j) M[i * d + j] = sys.A.at(comb[i], j);
    }
    if (!detail::solve_linear(M, rhs, d, x)) return;
    if (!sys.contains(x, 1e-8)) return;
    for (const auto& v : out.vertices) {
      double dist2 = 0.0;
      for (int j = 0; j < d; ++j) dist2 += (v[j] - x[j]) * (v[j] - x[j]);
      if (std::sqrt(dist2) <= 1e-7) return;
    }
    out.vertices.push_back(x);
  };

  while (true) {
    process();
    int i = d - 1;
    while (i >= 0 && comb[i] == rows - d + i) --i;
    if (i < 0) break;
    ++comb[i];
    for (int j = i + 1; j < d; ++j) comb[j] = comb[j - 1] + 1;
  }

  for (const auto& v : out.vertices)
    for (int j = 0; j < d; ++j)
      if (v[j] >= box_cap - 1e-8) out.box_clipped = true;
  return out;
}

// Dykstra's alternating projection over the halfspaces; exact for a convex
// intersection in the iteration limit, accurate to ~1e-12 here.
inline std::vector<double> project_onto_polytope(const Halfspaces& hs,
                                                 std::span<const double> x0,
                                                 int iters = 400) {
  const std::size_t rows = hs.rows(), d = hs.dim();
  std::vector<double> x(x0.begin(), x0.end());
  std::vector<std::vector<double>> corr(rows, std::vector<double>(d, 0.0));
  std::vector<double> rownorm2(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j) rownorm2[r] += hs.A.at(r, j) * hs.A.at(r, j);

  for (int it = 0; it < iters; ++it) {
    double worst = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < d; ++j) x[j] += corr[r][j];
      double viol = -hs.slack(r, x);
      if (viol > 0.0 && rownorm2[r] > 0.0) {
        double f = viol / rownorm2[r];
        for (std::size_t j = 0; j < d; ++j) {
          double proj = x[j] - f * hs.A.at(r, j);
          corr[r][j] = x[j] - proj;
          x[j] = proj;
        }
      } else {
        std::fill(corr[r].begin(), corr[r].end(), 0.0);
      }
      worst = std::max(worst, viol);
    }
    if (worst <= 1e-13 && it > 2) break;
  }
  return x;
}

struct QpResult {
  std::vector<double> x;
  double value = -std::numeric_limits<double>::infinity();
  bool ok = false;
};

// Maximize 0.5 x'Qx + c'x over {Ax <= b} for negative-definite Q by
// enumerating active sets and solving the KKT systems. Exact for small
// systems; intended as an oracle and for desk-scale best responses.
inline QpResult max_concave_quadratic(const Tensor& Q, const std::vector<double>& c,
                                      const Halfspaces& hs) {
  const int d = static_cast<int>(hs.dim());
  const int rows = static_cast<int>(hs.rows());
  if (static_cast<int>(Q.rows()) != d || static_cast<int>(c.size()) != d)
    throw ValidationError("max_concave_quadratic: dimension mismatch");
  QpResult best;

  auto objective = [&](const std::vector<double>& x) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
      s += c[i] * x[i];
      for (int j = 0; j < d; ++j) s += 0.5 * x[i] * Q.at(i, j) * x[j];
    }
    return s;
  };

  // iterate subsets of active rows of size 0..d
  std::vector<int> subset;
  std::vector<double> M, rhs, sol;
  auto try_subset = [&](const std::vector<int>& act) {
    int k = static_cast<int>(act.size());
    int n = d + k;
    M.assign(n * n, 0.0);
    rhs.assign(n, 0.0);
    // stationarity: Qx + c - A_S' mu = 0  ->  -Qx + A_S' mu = c
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) M[i * n + j] = -Q.at(i, j);
      for (int s = 0; s < k; ++s) M[i * n + d + s] = hs.A.at(act[s], i);
      rhs[i] = c[i];
    }
    for (int s = 0; s < k; ++s) {
      for (int j = 0; j < d; ++j) M[(d + s) * n + j] = hs.A.at(act[s], j);
      rhs[d + s] = hs.b[act[s]];
    }
    if (!detail::solve_linear(M, rhs, n, sol)) return;
    std::vector<double> x(sol.begin(), sol.begin() + d);
    for (int s = 0; s < k; ++s)
      if (sol[d + s] < -1e-9) return;  // dual feasibility
    if (!hs.contains(x, 1e-8)) return;
    double val = objective(x);
    if (!best.ok || val > best.value) {
      best.ok = true;
      best.value = val;
      best.x = x;
    }
  };

  std::vector<int> stack;
  std::function<void(int, int)> rec = [&](int start, int remaining) {
    try_subset(stack);
    if (remaining == 0) return;
    for (int r = start; r < rows; ++r) {
      stack.push_back(r);
      rec(r + 1, remaining - 1);
      stack.pop_back();
    }
  };
  rec(0, d);
  return best;
}

}  // namespace pseudeq
