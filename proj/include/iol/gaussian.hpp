#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "iol/errors.hpp"
#include "iol/rng.hpp"

namespace iol {

using Eigen::VectorXd;

// Diagonal Gaussian given by mean and per-coordinate std (> 0).
struct DiagGaussian {
  VectorXd mean;
  VectorXd std;

  int dim() const { return static_cast<int>(mean.size()); }

  void validate() const {
    if (mean.size() != std.size()) throw ValidationError("DiagGaussian: length mismatch");
    if (!mean.allFinite() || !std.allFinite())
      throw NumericalError("DiagGaussian: non-finite parameters");
    if ((std.array() <= 0.0).any()) throw NumericalError("DiagGaussian: std must be positive");
  }
};

inline DiagGaussian standard_gaussian(int dim) {
  return DiagGaussian{VectorXd::Zero(dim), VectorXd::Ones(dim)};
}

// mean + std (.) eps, eps ~ N(0, I)
inline VectorXd gaussian_sample_reparam(const DiagGaussian& g, Rng& rng) {
  VectorXd eps = VectorXd::NullaryExpr(g.mean.size(), [&](Eigen::Index) { return rng.normal(); });
  return g.mean + g.std.cwiseProduct(eps);
}

// Closed-form KL(q || p) for diagonal Gaussians, summed over coordinates.
inline double kl_diag(const DiagGaussian& q, const DiagGaussian& p) {
  if (q.mean.size() != p.mean.size()) throw ValidationError("kl_diag: length mismatch");
  const auto& mq = q.mean.array();
  const auto& sq = q.std.array();
  const auto& mp = p.mean.array();
  const auto& sp = p.std.array();
  return ((sp / sq).log() + (sq.square() + (mq - mp).square()) / (2.0 * sp.square()) - 0.5).sum();
}

inline double gaussian_log_pdf(const DiagGaussian& g, const VectorXd& x) {
  const auto& m = g.mean.array();
  const auto& s = g.std.array();
  const auto z = (x.array() - m) / s;
  return (-0.5 * z.square() - s.log() - 0.5 * std::log(2.0 * M_PI)).sum();
}

}  // namespace iol
