#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pseudeq/common.hpp"
#include "pseudeq/nn.hpp"
#include "pseudeq/tensor.hpp"

namespace pseudeq {

// SGD or ADAM state over a flat list of parameter tensors.
struct OptState {
  enum class Kind { sgd, adam };
  Kind kind = Kind::sgd;
  double beta1 = 0.9, beta2 = 0.999, eps_adam = 1e-8;
  std::int64_t t = 0;
  std::vector<Tensor> m, v;  // adam moments, shapes mirror the parameters

  static OptState sgd_state() { return OptState{}; }

  static OptState adam_state(const std::vector<const Tensor*>& params) {
    OptState s;
    s.kind = Kind::adam;
    for (const Tensor* p : params) {
      s.m.push_back(Tensor::zeros(p->shape));
      s.v.push_back(Tensor::zeros(p->shape));
    }
    return s;
  }
};

// One update over all parameter tensors; `ascent` flips the step direction.
inline void opt_step(const std::vector<Tensor*>& params,
                     const std::vector<const Tensor*>& grads, OptState& opt,
                     double lr, bool ascent = false) {
  if (params.size() != grads.size())
    throw ValidationError("opt_step: parameter/gradient count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(*grads[k]))
      throw ValidationError("opt_step: shape mismatch at tensor " + std::to_string(k) +
                            ": " + params[k]->shape_str() + " vs " +
                            grads[k]->shape_str());
    if (!grads[k]->finite())
      throw NumericalError("opt_step: non-finite gradient in tensor " +
                           std::to_string(k));
  }
  opt.t += 1;
  double sign = ascent ? 1.0 : -1.0;
  if (opt.kind == OptState::Kind::sgd) {
    for (std::size_t k = 0; k < params.size(); ++k)
      for (std::size_t i = 0; i < params[k]->size(); ++i)
        params[k]->values[i] += sign * lr * grads[k]->values[i];
    return;
  }
  if (opt.m.size() != params.size())
    throw ValidationError("opt_step: adam state does not match parameter count");
  double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.t));
  double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k]->size(); ++i) {
      double g = grads[k]->values[i];
      double& m = opt.m[k].values[i];
      double& v = opt.v[k].values[i];
      m = opt.beta1 * m + (1.0 - opt.beta1) * g;
      v = opt.beta2 * v + (1.0 - opt.beta2) * g * g;
      double mhat = m / c1;
      double vhat = v / c2;
      params[k]->values[i] += sign * lr * mhat / (std::sqrt(vhat) + opt.eps_adam);
    }
  }
}

inline std::vector<Tensor*> mlp_param_ptrs(MlpParams& p) {
  std::vector<Tensor*> out;
  for (Layer& layer : p.layers) {
    out.push_back(&layer.w);
    out.push_back(&layer.b);
  }
  return out;
}

inline std::vector<const Tensor*> mlp_grad_ptrs(const MlpGrads& g) {
  std::vector<const Tensor*> out;
  for (std::size_t k = 0; k < g.w.size(); ++k) {
    out.push_back(&g.w[k]);
    out.push_back(&g.b[k]);
  }
  return out;
}

enum class LrSchedule { constant, adam, theorem1 };

inline std::string to_string(LrSchedule s) {
  switch (s) {
    case LrSchedule::constant: return "constant";
    case LrSchedule::adam: return "adam";
    default: return "theorem1";
  }
}

inline LrSchedule schedule_from_string(const std::string& s) {
  if (s == "constant") return LrSchedule::constant;
  if (s == "adam") return LrSchedule::adam;
  if (s == "theorem1") return LrSchedule::theorem1;
  throw ValidationError("unknown schedule: " + s);
}

// Outer (descent) learning rate at 1-based iteration t.
inline double outer_lr(LrSchedule schedule, double base_lr, std::int64_t t) {
  if (schedule == LrSchedule::theorem1) return 1.0 / std::sqrt(static_cast<double>(t));
  return base_lr;
}

// Inner (ascent) learning rate at iteration s >= 0.
// pl_constant is the 2*sigma_min*lambda product of the schedule.
inline double inner_lr(LrSchedule schedule, double base_lr, double pl_constant,
                       std::int64_t s) {
  if (schedule == LrSchedule::theorem1) {
    double sd = static_cast<double>(s);
    return (2.0 * sd + 1.0) / (pl_constant * (sd + 1.0) * (sd + 1.0));
  }
  return base_lr;
}

}  // namespace pseudeq
