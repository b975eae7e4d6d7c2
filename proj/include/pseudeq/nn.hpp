#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pseudeq/rng.hpp"
#include "pseudeq/tape.hpp"
#include "pseudeq/tensor.hpp"

namespace pseudeq {

enum class Activation { relu, softmax, identity };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::softmax: return "softmax";
    default: return "identity";
  }
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "softmax") return Activation::softmax;
  if (s == "identity") return Activation::identity;
  throw ValidationError("unknown activation: " + s);
}

struct Layer {
  Tensor w;  // [out x in]
  Tensor b;  // [out]
  Activation act = Activation::identity;
};

struct MlpParams {
  std::vector<Layer> layers;

  std::size_t in_dim() const { return layers.front().w.cols(); }
  std::size_t out_dim() const { return layers.back().w.rows(); }

  void check_chain() const {
    for (std::size_t k = 0; k + 1 < layers.size(); ++k)
      if (layers[k].w.rows() != layers[k + 1].w.cols())
        throw ValidationError("MlpParams: layer " + std::to_string(k) + " out-dim " +
                              std::to_string(layers[k].w.rows()) +
                              " != layer " + std::to_string(k + 1) + " in-dim " +
                              std::to_string(layers[k + 1].w.cols()));
  }
};

// Glorot-uniform weights, zero biases.
inline MlpParams make_mlp(const std::vector<std::size_t>& dims,
                          const std::vector<Activation>& acts, Rng& rng) {
  if (dims.size() < 2 || acts.size() != dims.size() - 1)
    throw ValidationError("make_mlp: need dims.size()-1 activations");
  MlpParams p;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    std::size_t in = dims[k], out = dims[k + 1];
    double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    Layer layer;
    layer.w = Tensor::zeros({out, in});
    for (double& x : layer.w.values) x = rng.uniform(-bound, bound);
    layer.b = Tensor::zeros({out});
    layer.act = acts[k];
    p.layers.push_back(std::move(layer));
  }
  return p;
}

namespace detail {
inline void apply_activation_inplace(std::vector<double>& v, Activation act) {
  switch (act) {
    case Activation::relu:
      for (double& x : v) x = x > 0.0 ? x : 0.0;
      break;
    case Activation::softmax: {
      double m = v[0];
      for (double x : v) m = std::max(m, x);
      double s = 0.0;
      for (double& x : v) {
        x = std::exp(x - m);
        s += x;
      }
      for (double& x : v) x /= s;
      break;
    }
    case Activation::identity:
      break;
  }
}
}  // namespace detail

// Plain forward pass on a vector input (no tape).
inline std::vector<double> mlp_forward(const MlpParams& p,
                                       const std::vector<double>& input) {
  if (input.size() != p.in_dim())
    throw ValidationError("mlp_forward: input dim " + std::to_string(input.size()) +
                          " does not match first layer in-dim " +
                          std::to_string(p.in_dim()));
  std::vector<double> x = input;
  for (const Layer& layer : p.layers) {
    std::size_t out = layer.w.rows(), in = layer.w.cols();
    std::vector<double> y(out);
    for (std::size_t i = 0; i < out; ++i) {
      double s = layer.b.values[i];
      for (std::size_t j = 0; j < in; ++j) s += layer.w.at(i, j) * x[j];
      y[i] = s;
    }
    detail::apply_activation_inplace(y, layer.act);
    x = std::move(y);
  }
  if (!all_finite(x)) throw NumericalError("mlp_forward: non-finite output");
  return x;
}

// Parameters placed as leaves on a tape so gradients can be collected.
// The same placement can feed several forward passes (shared trunks).
struct TapedMlp {
  const MlpParams* params = nullptr;
  std::vector<Tape::NodeId> w_ids, b_ids;
};

inline TapedMlp place_on_tape(Tape& tape, const MlpParams& p) {
  TapedMlp t;
  t.params = &p;
  for (const Layer& layer : p.layers) {
    t.w_ids.push_back(tape.leaf(layer.w));
    t.b_ids.push_back(tape.leaf(layer.b));
  }
  return t;
}

inline Tape::NodeId mlp_forward_tape(Tape& tape, const TapedMlp& m,
                                     Tape::NodeId input) {
  if (tape.val(input).size() != m.params->in_dim())
    throw ValidationError("mlp_forward_tape: input dim " +
                          std::to_string(tape.val(input).size()) +
                          " does not match first layer in-dim " +
                          std::to_string(m.params->in_dim()));
  Tape::NodeId x = input;
  for (std::size_t k = 0; k < m.params->layers.size(); ++k) {
    x = tape.add(tape.matvec(m.w_ids[k], x), m.b_ids[k]);
    switch (m.params->layers[k].act) {
      case Activation::relu: x = tape.relu(x); break;
      case Activation::softmax: x = tape.softmax(x); break;
      case Activation::identity: break;
    }
  }
  return x;
}

// Per-layer gradient tensors matching an MlpParams layout.
struct MlpGrads {
  std::vector<Tensor> w, b;

  static MlpGrads zeros_like(const MlpParams& p) {
    MlpGrads g;
    for (const Layer& layer : p.layers) {
      g.w.push_back(Tensor::zeros(layer.w.shape));
      g.b.push_back(Tensor::zeros(layer.b.shape));
    }
    return g;
  }

  void accumulate(const MlpGrads& o, double coef = 1.0) {
    for (std::size_t k = 0; k < w.size(); ++k) {
      for (std::size_t i = 0; i < w[k].size(); ++i)
        w[k].values[i] += coef * o.w[k].values[i];
      for (std::size_t i = 0; i < b[k].size(); ++i)
        b[k].values[i] += coef * o.b[k].values[i];
    }
  }
};

inline MlpGrads collect_grads(const TapedMlp& m, const std::vector<Tensor>& grads) {
  MlpGrads g;
  for (std::size_t k = 0; k < m.w_ids.size(); ++k) {
    g.w.push_back(grads[m.w_ids[k]]);
    g.b.push_back(grads[m.b_ids[k]]);
  }
  return g;
}

inline nlohmann::json mlp_to_json(const MlpParams& p) {
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& layer : p.layers) {
    nlohmann::json w = nlohmann::json::array();
    for (std::size_t i = 0; i < layer.w.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t j = 0; j < layer.w.cols(); ++j) row.push_back(layer.w.at(i, j));
      w.push_back(std::move(row));
    }
    layers.push_back({{"w", std::move(w)},
                      {"b", layer.b.values},
                      {"act", to_string(layer.act)}});
  }
  return {{"layers", std::move(layers)}};
}

inline MlpParams mlp_from_json(const nlohmann::json& j) {
  MlpParams p;
  for (const auto& jl : j.at("layers")) {
    Layer layer;
    const auto& w = jl.at("w");
    std::size_t rows = w.size();
    std::size_t cols = rows ? w[0].size() : 0;
    layer.w = Tensor::zeros({rows, cols});
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j2 = 0; j2 < cols; ++j2)
        layer.w.at(i, j2) = w[i][j2].get<double>();
    layer.b = Tensor::vec(jl.at("b").get<std::vector<double>>());
    if (layer.b.size() != rows)
      throw ValidationError("mlp_from_json: bias length does not match weight rows");
    layer.act = activation_from_string(jl.at("act").get<std::string>());
    p.layers.push_back(std::move(layer));
  }
  p.check_chain();
  return p;
}

}  // namespace pseudeq
