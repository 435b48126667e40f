#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iol/errors.hpp"

namespace iol {

using Eigen::MatrixXd;

// Named value/gradient pair. Shape is fixed at construction; the reverse pass
// accumulates into grad.
struct ParamTensor {
  std::string name;
  MatrixXd value;
  MatrixXd grad;

  ParamTensor() = default;
  ParamTensor(std::string n, MatrixXd v)
      : name(std::move(n)), value(std::move(v)), grad(MatrixXd::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }

  void check_finite() const {
    if (!value.allFinite()) throw NumericalError("parameter '" + name + "' has non-finite values");
    if (!grad.allFinite()) throw NumericalError("parameter '" + name + "' has non-finite gradient");
  }
};

using ParamRefs = std::vector<ParamTensor*>;

inline void zero_grads(const ParamRefs& params) {
  for (ParamTensor* p : params) p->zero_grad();
}

inline double global_grad_norm(const ParamRefs& params) {
  double sq = 0.0;
  for (const ParamTensor* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

inline void scale_grads(const ParamRefs& params, double s) {
  for (ParamTensor* p : params) p->grad *= s;
}

// Rescales gradients so the global norm does not exceed max_norm.
inline void clip_global_norm(const ParamRefs& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm && norm > 0.0) scale_grads(params, max_norm / norm);
}

}  // namespace iol
