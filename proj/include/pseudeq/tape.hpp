#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pseudeq/common.hpp"
#include "pseudeq/tensor.hpp"

namespace pseudeq {

// Reverse-mode tape over Tensor values. Nodes are appended in evaluation
// order, so ids are already a topological order; backward() walks them once
// in reverse. Single-threaded per tape.
class Tape {
 public:
  using NodeId = int;

  NodeId leaf(Tensor value) { return push(Op::kLeaf, std::move(value), -1, -1); }

  NodeId add(NodeId a, NodeId b) {
    require_same_shape(a, b, "add");
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += val(b).values[i];
    return push(Op::kAdd, std::move(out), a, b);
  }

  NodeId sub(NodeId a, NodeId b) {
    require_same_shape(a, b, "sub");
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] -= val(b).values[i];
    return push(Op::kSub, std::move(out), a, b);
  }

  NodeId mul(NodeId a, NodeId b) {
    require_same_shape(a, b, "mul");
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= val(b).values[i];
    return push(Op::kMul, std::move(out), a, b);
  }

  NodeId div(NodeId a, NodeId b) {
    require_same_shape(a, b, "div");
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] /= val(b).values[i];
    return push(Op::kDiv, std::move(out), a, b);
  }

  NodeId scale(NodeId a, double c) {
    Tensor out = val(a);
    for (double& x : out.values) x *= c;
    NodeId id = push(Op::kScale, std::move(out), a, -1);
    nodes_[id].c = c;
    return id;
  }

  NodeId add_const(NodeId a, double c) {
    Tensor out = val(a);
    for (double& x : out.values) x += c;
    return push(Op::kAddConst, std::move(out), a, -1);
  }

  // [r x k] * [k x c] -> [r x c]
  NodeId matmul(NodeId a, NodeId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.shape.size() != 2 || B.shape.size() != 2 || A.cols() != B.rows())
      throw ValidationError("matmul: incompatible shapes " + A.shape_str() + " and " +
                            B.shape_str());
    std::size_t r = A.rows(), k = A.cols(), c = B.cols();
    Tensor out = Tensor::zeros({r, c});
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        double aip = A.at(i, p);
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) += aip * B.at(p, j);
      }
    return push(Op::kMatMul, std::move(out), a, b);
  }

  // [r x k] * [k] -> [r]
  NodeId matvec(NodeId a, NodeId x) {
    const Tensor& A = val(a);
    const Tensor& X = val(x);
    if (A.shape.size() != 2 || X.shape.size() != 1 || A.cols() != X.size())
      throw ValidationError("matvec: incompatible shapes " + A.shape_str() + " and " +
                            X.shape_str());
    std::size_t r = A.rows(), k = A.cols();
    Tensor out = Tensor::zeros({r});
    for (std::size_t i = 0; i < r; ++i) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += A.at(i, p) * X.values[p];
      out.values[i] = s;
    }
    return push(Op::kMatVec, std::move(out), a, x);
  }

  NodeId relu(NodeId a) {
    Tensor out = val(a);
    for (double& x : out.values) x = x > 0.0 ? x : 0.0;
    return push(Op::kRelu, std::move(out), a, -1);
  }

  // Vector softmax, or row-wise for matrices. Max-subtracted.
  NodeId softmax(NodeId a) {
    const Tensor& A = val(a);
    Tensor out = A;
    std::size_t nrows = A.shape.size() == 2 ? A.rows() : 1;
    std::size_t ncols = A.shape.size() == 2 ? A.cols() : A.size();
    for (std::size_t i = 0; i < nrows; ++i) {
      double* row = out.values.data() + i * ncols;
      double m = *std::max_element(row, row + ncols);
      double s = 0.0;
      for (std::size_t j = 0; j < ncols; ++j) {
        row[j] = std::exp(row[j] - m);
        s += row[j];
      }
      for (std::size_t j = 0; j < ncols; ++j) row[j] /= s;
    }
    return push(Op::kSoftmax, std::move(out), a, -1);
  }

  NodeId log(NodeId a) {
    Tensor out = val(a);
    for (double& x : out.values) x = std::log(x);
    return push(Op::kLog, std::move(out), a, -1);
  }

  NodeId exp(NodeId a) {
    Tensor out = val(a);
    for (double& x : out.values) x = std::exp(x);
    return push(Op::kExp, std::move(out), a, -1);
  }

  NodeId pow_const(NodeId a, double p) {
    Tensor out = val(a);
    for (double& x : out.values) x = std::pow(x, p);
    NodeId id = push(Op::kPowConst, std::move(out), a, -1);
    nodes_[id].c = p;
    return id;
  }

  NodeId clamp_min(NodeId a, double lo) {
    Tensor out = val(a);
    for (double& x : out.values) x = x < lo ? lo : x;
    NodeId id = push(Op::kClampMin, std::move(out), a, -1);
    nodes_[id].c = lo;
    return id;
  }

  NodeId recip(NodeId a) {
    Tensor out = val(a);
    for (double& x : out.values) x = 1.0 / x;
    return push(Op::kRecip, std::move(out), a, -1);
  }

  NodeId sum(NodeId a) {
    double s = 0.0;
    for (double x : val(a).values) s += x;
    return push(Op::kSum, Tensor::scalar(s), a, -1);
  }

  NodeId dot(NodeId a, NodeId b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < val(a).size(); ++i)
      s += val(a).values[i] * val(b).values[i];
    return push(Op::kDot, Tensor::scalar(s), a, b);
  }

  // Minimum entry; subgradient is one-hot at the first argmin.
  NodeId min_all(NodeId a) {
    const auto& v = val(a).values;
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] < v[arg]) arg = i;
    NodeId id = push(Op::kMinAll, Tensor::scalar(v[arg]), a, -1);
    nodes_[id].i0 = static_cast<int>(arg);
    return id;
  }

  NodeId row(NodeId a, std::size_t r) {
    const Tensor& A = val(a);
    if (A.shape.size() != 2 || r >= A.rows())
      throw ValidationError("row: bad index for shape " + A.shape_str());
    std::size_t c = A.cols();
    Tensor out = Tensor::zeros({c});
    for (std::size_t j = 0; j < c; ++j) out.values[j] = A.at(r, j);
    NodeId id = push(Op::kRow, std::move(out), a, -1);
    nodes_[id].i0 = static_cast<int>(r);
    return id;
  }

  NodeId slice(NodeId a, std::size_t offset, std::size_t len) {
    const Tensor& A = val(a);
    if (offset + len > A.size())
      throw ValidationError("slice: range out of bounds for " + A.shape_str());
    Tensor out = Tensor::zeros({len});
    for (std::size_t j = 0; j < len; ++j) out.values[j] = A.values[offset + j];
    NodeId id = push(Op::kSlice, std::move(out), a, -1);
    nodes_[id].i0 = static_cast<int>(offset);
    return id;
  }

  // Copy of base with patch written at [offset, offset+len).
  NodeId splice(NodeId base, NodeId patch, std::size_t offset) {
    const Tensor& B = val(base);
    const Tensor& P = val(patch);
    if (offset + P.size() > B.size())
      throw ValidationError("splice: patch out of bounds");
    Tensor out = B;
    for (std::size_t j = 0; j < P.size(); ++j) out.values[offset + j] = P.values[j];
    NodeId id = push(Op::kSplice, std::move(out), base, patch);
    nodes_[id].i0 = static_cast<int>(offset);
    return id;
  }

  NodeId col_sum(NodeId a) {
    const Tensor& A = val(a);
    if (A.shape.size() != 2)
      throw ValidationError("col_sum: expected matrix, got " + A.shape_str());
    Tensor out = Tensor::zeros({A.cols()});
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) out.values[j] += A.at(i, j);
    return push(Op::kColSum, std::move(out), a, -1);
  }

  // out[i][j] = u[i] * v[j]
  NodeId outer(NodeId u, NodeId v) {
    const Tensor& U = val(u);
    const Tensor& V = val(v);
    if (U.shape.size() != 1 || V.shape.size() != 1)
      throw ValidationError("outer: expected vectors");
    Tensor out = Tensor::zeros({U.size(), V.size()});
    for (std::size_t i = 0; i < U.size(); ++i)
      for (std::size_t j = 0; j < V.size(); ++j)
        out.at(i, j) = U.values[i] * V.values[j];
    return push(Op::kOuter, std::move(out), u, v);
  }

  // matrix + row vector broadcast over rows
  NodeId add_rowvec(NodeId m, NodeId v) {
    const Tensor& M = val(m);
    const Tensor& V = val(v);
    if (M.shape.size() != 2 || V.shape.size() != 1 || M.cols() != V.size())
      throw ValidationError("add_rowvec: incompatible shapes " + M.shape_str() +
                            " and " + V.shape_str());
    Tensor out = M;
    for (std::size_t i = 0; i < M.rows(); ++i)
      for (std::size_t j = 0; j < M.cols(); ++j) out.at(i, j) += V.values[j];
    return push(Op::kAddRowVec, std::move(out), m, v);
  }

  NodeId concat(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw ValidationError("concat: no inputs");
    std::size_t n = 0;
    for (NodeId p : parts) n += val(p).size();
    Tensor out = Tensor::zeros({n});
    std::size_t off = 0;
    for (NodeId p : parts) {
      const auto& v = val(p).values;
      std::copy(v.begin(), v.end(), out.values.begin() + off);
      off += v.size();
    }
    NodeId id = push(Op::kConcat, std::move(out), -1, -1);
    nodes_[id].multi = parts;
    return id;
  }

  // scalar -> constant-filled vector of length n
  NodeId broadcast(NodeId a, std::size_t n) {
    if (val(a).size() != 1) throw ValidationError("broadcast: expected scalar");
    Tensor out = Tensor::full({n}, val(a).values[0]);
    return push(Op::kBroadcast, std::move(out), a, -1);
  }

  NodeId reshape(NodeId a, std::vector<std::size_t> shape) {
    if (Tensor::count(shape) != val(a).size())
      throw ValidationError("reshape: element count mismatch");
    Tensor out(std::move(shape), val(a).values);
    return push(Op::kReshape, std::move(out), a, -1);
  }

  const Tensor& val(NodeId id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  // Reverse sweep from `output` seeded with `seed`. Returns one gradient
  // tensor per node id; nodes that do not influence the output (and plain
  // constants) get zeros.
  std::vector<Tensor> backward(NodeId output, const Tensor& seed) const {
    if (empty()) throw ValidationError("backward: empty tape");
    if (!(seed.shape == val(output).shape))
      throw ValidationError("backward: seed shape " + seed.shape_str() +
                            " does not match output " + val(output).shape_str());
    std::vector<Tensor> grads(nodes_.size());
    std::vector<char> touched(nodes_.size(), 0);
    auto grad_of = [&](NodeId id) -> Tensor& {
      if (!touched[id]) {
        grads[id] = Tensor::zeros(nodes_[id].value.shape);
        touched[id] = 1;
      }
      return grads[id];
    };
    grad_of(output) = seed;

    for (NodeId id = output; id >= 0; --id) {
      if (!touched[id]) continue;
      const Node& n = nodes_[id];
      const Tensor& g = grads[id];
      switch (n.op) {
        case Op::kLeaf:
          break;
        case Op::kAdd: {
          accumulate(grad_of(n.a), g);
          accumulate(grad_of(n.b), g);
          break;
        }
        case Op::kSub: {
          accumulate(grad_of(n.a), g);
          Tensor& gb = grad_of(n.b);
          for (std::size_t i = 0; i < g.size(); ++i) gb.values[i] -= g.values[i];
          break;
        }
        case Op::kMul: {
          Tensor& ga = grad_of(n.a);
          Tensor& gb = grad_of(n.b);
          const Tensor& A = val(n.a);
          const Tensor& B = val(n.b);
          for (std::size_t i = 0; i < g.size(); ++i) {
            ga.values[i] += g.values[i] * B.values[i];
            gb.values[i] += g.values[i] * A.values[i];
          }
          break;
        }
        case Op::kDiv: {
          Tensor& ga = grad_of(n.a);
          Tensor& gb = grad_of(n.b);
          const Tensor& A = val(n.a);
          const Tensor& B = val(n.b);
          for (std::size_t i = 0; i < g.size(); ++i) {
            ga.values[i] += g.values[i] / B.values[i];
            gb.values[i] -= g.values[i] * A.values[i] / (B.values[i] * B.values[i]);
          }
          break;
        }
        case Op::kScale: {
          Tensor& ga = grad_of(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) ga.values[i] += g.values[i] * n.c;
          break;
        }
        case Op::kAddConst:
          accumulate(grad_of(n.a), g);
          break;
        case Op::kMatMul: {
          const Tensor& A = val(n.a);
          const Tensor& B = val(n.b);
          Tensor& ga = grad_of(n.a);
          Tensor& gb = grad_of(n.b);
          std::size_t r = A.rows(), k = A.cols(), c = B.cols();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double s = 0.0;
              for (std::size_t j = 0; j < c; ++j) s += g.at(i, j) * B.at(p, j);
              ga.at(i, p) += s;
            }
          for (std::size_t p = 0; p < k; ++p)
            for (std::size_t j = 0; j < c; ++j) {
              double s = 0.0;
              for (std::size_t i = 0; i < r; ++i) s += A.at(i, p) * g.at(i, j);
              gb.at(p, j) += s;
            }
          break;
        }
        case Op::kMatVec: {
          const Tensor& A = val(n.a);
          const Tensor& X = val(n.b);
          Tensor& ga = grad_of(n.a);
          Tensor& gx = grad_of(n.b);
          std::size_t r = A.rows(), k = A.cols();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              ga.at(i, p) += g.values[i] * X.values[p];
              gx.values[p] += g.values[i] * A.at(i, p);
            }
          break;
        }
        case Op::kRelu: {
          Tensor& ga = grad_of(n.a);
          const Tensor& A = val(n.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            if (A.values[i] > 0.0) ga.values[i] += g.values[i];
          break;
        }
        case Op::kSoftmax: {
          Tensor& ga = grad_of(n.a);
          const Tensor& Y = n.value;
          std::size_t nrows = Y.shape.size() == 2 ? Y.rows() : 1;
          std::size_t ncols = Y.shape.size() == 2 ? Y.cols() : Y.size();
          for (std::size_t i = 0; i < nrows; ++i) {
            const double* y = Y.values.data() + i * ncols;
            const double* gr = g.values.data() + i * ncols;
            double dotgy = 0.0;
            for (std::size_t j = 0; j < ncols; ++j) dotgy += gr[j] * y[j];
            double* out = ga.values.data() + i * ncols;
            for (std::size_t j = 0; j < ncols; ++j) out[j] += y[j] * (gr[j] - dotgy);
          }
          break;
        }
        case Op::kLog: {
          Tensor& ga = grad_of(n.a);
          const Tensor& A = val(n.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            ga.values[i] += g.values[i] / A.values[i];
          break;
        }
        case Op::kExp: {
          Tensor& ga = grad_of(n.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            ga.values[i] += g.values[i] * n.value.values[i];
          break;
        }
        case Op::kPowConst: {
          Tensor& ga = grad_of(n.a);
          const Tensor& A = val(n.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            ga.values[i] += g.values[i] * n.c * std::pow(A.values[i], n.c - 1.0);
          break;
        }
        case Op::kClampMin: {
          Tensor& ga = grad_of(n.a);
          const Tensor& A = val(n.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            if (A.values[i] > n.c) ga.values[i] += g.values[i];
          break;
        }
        case Op::kRecip: {
          Tensor& ga = grad_of(n.a);
          const Tensor& A = val(n.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            ga.values[i] -= g.values[i] / (A.values[i] * A.values[i]);
          break;
        }
        case Op::kSum: {
          Tensor& ga = grad_of(n.a);
          for (double& x : ga.values) x += g.values[0];
          break;
        }
        case Op::kDot: {
          Tensor& ga = grad_of(n.a);
          Tensor& gb = grad_of(n.b);
          const Tensor& A = val(n.a);
          const Tensor& B = val(n.b);
          for (std::size_t i = 0; i < A.size(); ++i) {
            ga.values[i] += g.values[0] * B.values[i];
            gb.values[i] += g.values[0] * A.values[i];
          }
          break;
        }
        case Op::kMinAll: {
          grad_of(n.a).values[n.i0] += g.values[0];
          break;
        }
        case Op::kRow: {
          Tensor& ga = grad_of(n.a);
          std::size_t c = val(n.a).cols();
          for (std::size_t j = 0; j < c; ++j)
            ga.values[static_cast<std::size_t>(n.i0) * c + j] += g.values[j];
          break;
        }
        case Op::kSlice: {
          Tensor& ga = grad_of(n.a);
          for (std::size_t j = 0; j < g.size(); ++j)
            ga.values[static_cast<std::size_t>(n.i0) + j] += g.values[j];
          break;
        }
        case Op::kSplice: {
          Tensor& gb = grad_of(n.a);
          Tensor& gp = grad_of(n.b);
          std::size_t off = static_cast<std::size_t>(n.i0);
          std::size_t len = val(n.b).size();
          for (std::size_t j = 0; j < g.size(); ++j) {
            if (j >= off && j < off + len)
              gp.values[j - off] += g.values[j];
            else
              gb.values[j] += g.values[j];
          }
          break;
        }
        case Op::kColSum: {
          Tensor& ga = grad_of(n.a);
          const Tensor& A = val(n.a);
          for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < A.cols(); ++j) ga.at(i, j) += g.values[j];
          break;
        }
        case Op::kOuter: {
          Tensor& gu = grad_of(n.a);
          Tensor& gv = grad_of(n.b);
          const Tensor& U = val(n.a);
          const Tensor& V = val(n.b);
          for (std::size_t i = 0; i < U.size(); ++i)
            for (std::size_t j = 0; j < V.size(); ++j) {
              gu.values[i] += g.at(i, j) * V.values[j];
              gv.values[j] += g.at(i, j) * U.values[i];
            }
          break;
        }
        case Op::kAddRowVec: {
          Tensor& gm = grad_of(n.a);
          Tensor& gv = grad_of(n.b);
          const Tensor& M = val(n.a);
          for (std::size_t i = 0; i < M.rows(); ++i)
            for (std::size_t j = 0; j < M.cols(); ++j) {
              gm.at(i, j) += g.at(i, j);
              gv.values[j] += g.at(i, j);
            }
          break;
        }
        case Op::kConcat: {
          std::size_t off = 0;
          for (NodeId p : n.multi) {
            Tensor& gp = grad_of(p);
            for (std::size_t j = 0; j < gp.size(); ++j) gp.values[j] += g.values[off + j];
            off += gp.size();
          }
          break;
        }
        case Op::kBroadcast: {
          Tensor& ga = grad_of(n.a);
          for (double v : g.values) ga.values[0] += v;
          break;
        }
        case Op::kReshape: {
          Tensor& ga = grad_of(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) ga.values[i] += g.values[i];
          break;
        }
      }
    }
    for (std::size_t i = 0; i < grads.size(); ++i)
      if (!touched[i]) grads[i] = Tensor::zeros(nodes_[i].value.shape);
    return grads;
  }

 private:
  enum class Op {
    kLeaf, kAdd, kSub, kMul, kDiv, kScale, kAddConst, kMatMul, kMatVec,
    kRelu, kSoftmax, kLog, kExp, kPowConst, kClampMin, kRecip, kSum, kDot,
    kMinAll, kRow, kSlice, kSplice, kColSum, kOuter, kAddRowVec, kConcat,
    kBroadcast, kReshape,
  };

  struct Node {
    Tensor value;
    NodeId a = -1, b = -1;
    Op op = Op::kLeaf;
    double c = 0.0;
    int i0 = 0;
    std::vector<NodeId> multi;
  };

  NodeId push(Op op, Tensor value, NodeId a, NodeId b) {
    Node n;
    n.value = std::move(value);
    n.a = a;
    n.b = b;
    n.op = op;
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  void require_same_shape(NodeId a, NodeId b, const char* what) const {
    if (!val(a).same_shape(val(b)))
      throw ValidationError(std::string(what) + ": shape mismatch " +
                            val(a).shape_str() + " vs " + val(b).shape_str());
  }

  static void accumulate(Tensor& dst, const Tensor& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.values[i] += src.values[i];
  }

  std::vector<Node> nodes_;
};

}  // namespace pseudeq
