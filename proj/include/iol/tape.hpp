#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "iol/errors.hpp"
#include "iol/param.hpp"

namespace iol::ad {

using Eigen::MatrixXd;

inline double softplus_stable(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid_stable(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over matrix-valued nodes. Values are column vectors for
// the sequence model and multi-column matrices for batched classifiers.
// Parameters do not live on the tape: ops that consume a ParamTensor
// accumulate directly into its grad during the reverse pass, so one tensor
// may feed any number of ops within a single tape.
class Tape {
 public:
  struct Node {
    MatrixXd value;
    MatrixXd grad;  // lazily allocated; empty means nothing flowed back yet
    std::function<void(Tape&)> backward;
  };

  const MatrixXd& val(Var v) const { return nodes_[v.id].value; }

  double scalar(Var v) const {
    const MatrixXd& m = nodes_[v.id].value;
    return m(0, 0);
  }

  MatrixXd& grad(Var v) { return grad_ref(v.id); }
  bool has_grad(Var v) const { return nodes_[v.id].grad.size() > 0; }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  Var constant(MatrixXd v) { return push(std::move(v), nullptr); }

  // Leaf mirroring a parameter; the reverse pass adds the node gradient into
  // the tensor gradient. Used for scalars that enter arithmetic directly.
  Var param(ParamTensor& p) {
    ParamTensor* ptr = &p;
    const int id = next_id();
    return push(p.value, [id, ptr](Tape& t) { ptr->grad += t.nodes_[id].grad; });
  }

  // W*x + b, b broadcast over columns.
  Var affine(ParamTensor& W, ParamTensor& b, Var x) {
    require_cols(W.value.cols(), x, "affine");
    MatrixXd v = W.value * val(x);
    v.colwise() += Eigen::VectorXd(b.value.col(0));
    const int id = next_id();
    ParamTensor* wp = &W;
    ParamTensor* bp = &b;
    const int xi = x.id;
    return push(std::move(v), [id, wp, bp, xi](Tape& t) {
      const MatrixXd& g = t.nodes_[id].grad;
      wp->grad.noalias() += g * t.nodes_[xi].value.transpose();
      bp->grad.col(0).noalias() += g.rowwise().sum();
      if (t.wants_grad(xi)) t.grad_ref(xi).noalias() += wp->value.transpose() * g;
    });
  }

  Var linear(ParamTensor& W, Var x) {
    require_cols(W.value.cols(), x, "linear");
    const int id = next_id();
    ParamTensor* wp = &W;
    const int xi = x.id;
    return push(W.value * val(x), [id, wp, xi](Tape& t) {
      const MatrixXd& g = t.nodes_[id].grad;
      wp->grad.noalias() += g * t.nodes_[xi].value.transpose();
      if (t.wants_grad(xi)) t.grad_ref(xi).noalias() += wp->value.transpose() * g;
    });
  }

  Var add(Var a, Var b) {
    const int id = next_id();
    const int ai = a.id, bi = b.id;
    return push(val(a) + val(b), [id, ai, bi](Tape& t) {
      const MatrixXd& g = t.nodes_[id].grad;
      if (t.wants_grad(ai)) t.grad_ref(ai) += g;
      if (t.wants_grad(bi)) t.grad_ref(bi) += g;
    });
  }

  Var sub(Var a, Var b) {
    const int id = next_id();
    const int ai = a.id, bi = b.id;
    return push(val(a) - val(b), [id, ai, bi](Tape& t) {
      const MatrixXd& g = t.nodes_[id].grad;
      if (t.wants_grad(ai)) t.grad_ref(ai) += g;
      if (t.wants_grad(bi)) t.grad_ref(bi) -= g;
    });
  }

  Var hadamard(Var a, Var b) {
    const int id = next_id();
    const int ai = a.id, bi = b.id;
    return push(val(a).cwiseProduct(val(b)), [id, ai, bi](Tape& t) {
      const MatrixXd& g = t.nodes_[id].grad;
      if (t.wants_grad(ai)) t.grad_ref(ai) += g.cwiseProduct(t.nodes_[bi].value);
      if (t.wants_grad(bi)) t.grad_ref(bi) += g.cwiseProduct(t.nodes_[ai].value);
    });
  }

  Var scale(Var a, double s) {
    const int id = next_id();
    const int ai = a.id;
    return push(val(a) * s, [id, ai, s](Tape& t) {
      if (t.wants_grad(ai)) t.grad_ref(ai) += t.nodes_[id].grad * s;
    });
  }

  Var add_scalar(Var a, double c) {
    const int id = next_id();
    const int ai = a.id;
    return push((val(a).array() + c).matrix(), [id, ai](Tape& t) {
      if (t.wants_grad(ai)) t.grad_ref(ai) += t.nodes_[id].grad;
    });
  }

  // scalar (1x1) times arbitrary node, broadcasting the scalar
  Var scalar_mul(Var s, Var a) {
    const int id = next_id();
    const int si = s.id, ai = a.id;
    return push(val(a) * scalar(s), [id, si, ai](Tape& t) {
      const MatrixXd& g = t.nodes_[id].grad;
      if (t.wants_grad(si)) t.grad_ref(si)(0, 0) += g.cwiseProduct(t.nodes_[ai].value).sum();
      if (t.wants_grad(ai)) t.grad_ref(ai) += g * t.nodes_[si].value(0, 0);
    });
  }

  Var vtanh(Var a) {
    const int id = next_id();
    const int ai = a.id;
    return push(val(a).array().tanh().matrix(), [id, ai](Tape& t) {
      if (!t.wants_grad(ai)) return;
      const MatrixXd& g = t.nodes_[id].grad;
      const MatrixXd& y = t.nodes_[id].value;
      t.grad_ref(ai).array() += g.array() * (1.0 - y.array().square());
    });
  }

  Var vsigmoid(Var a) {
    const int id = next_id();
    const int ai = a.id;
    return push(val(a).unaryExpr([](double z) { return sigmoid_stable(z); }), [id, ai](Tape& t) {
      if (!t.wants_grad(ai)) return;
      const MatrixXd& g = t.nodes_[id].grad;
      const MatrixXd& y = t.nodes_[id].value;
      t.grad_ref(ai).array() += g.array() * y.array() * (1.0 - y.array());
    });
  }

  Var vsoftplus(Var a) {
    const int id = next_id();
    const int ai = a.id;
    return push(val(a).unaryExpr([](double z) { return softplus_stable(z); }), [id, ai](Tape& t) {
      if (!t.wants_grad(ai)) return;
      const MatrixXd& g = t.nodes_[id].grad;
      const MatrixXd& x = t.nodes_[ai].value;
      t.grad_ref(ai).array() +=
          g.array() * x.unaryExpr([](double z) { return sigmoid_stable(z); }).array();
    });
  }

  Var vabs(Var a) {
    const int id = next_id();
    const int ai = a.id;
    return push(val(a).cwiseAbs(), [id, ai](Tape& t) {
      if (!t.wants_grad(ai)) return;
      const MatrixXd& g = t.nodes_[id].grad;
      const MatrixXd& x = t.nodes_[ai].value;
      t.grad_ref(ai).array() +=
          g.array() * x.unaryExpr([](double z) { return z > 0 ? 1.0 : (z < 0 ? -1.0 : 0.0); }).array();
    });
  }

  // stack column vectors vertically
  Var concat(const std::vector<Var>& parts) {
    Eigen::Index rows = 0;
    const Eigen::Index cols = val(parts.front()).cols();
    for (Var p : parts) rows += val(p).rows();
    MatrixXd v(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
      v.middleRows(at, val(p).rows()) = val(p);
      at += val(p).rows();
    }
    const int id = next_id();
    std::vector<int> ids;
    ids.reserve(parts.size());
    for (Var p : parts) ids.push_back(p.id);
    return push(std::move(v), [id, ids](Tape& t) {
      const MatrixXd& g = t.nodes_[id].grad;
      Eigen::Index at = 0;
      for (int pid : ids) {
        const Eigen::Index r = t.nodes_[pid].value.rows();
        if (t.wants_grad(pid)) t.grad_ref(pid) += g.middleRows(at, r);
        at += r;
      }
    });
  }

  Var segment(Var a, Eigen::Index row0, Eigen::Index nrows) {
    const int id = next_id();
    const int ai = a.id;
    return push(val(a).middleRows(row0, nrows), [id, ai, row0, nrows](Tape& t) {
      if (t.wants_grad(ai)) t.grad_ref(ai).middleRows(row0, nrows) += t.nodes_[id].grad;
    });
  }

  Var sum_all(Var a) {
    const int id = next_id();
    const int ai = a.id;
    MatrixXd v(1, 1);
    v(0, 0) = val(a).sum();
    return push(std::move(v), [id, ai](Tape& t) {
      if (t.wants_grad(ai)) t.grad_ref(ai).array() += t.nodes_[id].grad(0, 0);
    });
  }

  Var mean_all(Var a) {
    const int id = next_id();
    const int ai = a.id;
    const double n = static_cast<double>(val(a).size());
    MatrixXd v(1, 1);
    v(0, 0) = val(a).sum() / n;
    return push(std::move(v), [id, ai, n](Tape& t) {
      if (t.wants_grad(ai)) t.grad_ref(ai).array() += t.nodes_[id].grad(0, 0) / n;
    });
  }

  Var dot(Var a, Var b) {
    const int id = next_id();
    const int ai = a.id, bi = b.id;
    MatrixXd v(1, 1);
    v(0, 0) = val(a).cwiseProduct(val(b)).sum();
    return push(std::move(v), [id, ai, bi](Tape& t) {
      const double g = t.nodes_[id].grad(0, 0);
      if (t.wants_grad(ai)) t.grad_ref(ai) += g * t.nodes_[bi].value;
      if (t.wants_grad(bi)) t.grad_ref(bi) += g * t.nodes_[ai].value;
    });
  }

  Var dot_const(Var a, const MatrixXd& c) {
    const int id = next_id();
    const int ai = a.id;
    MatrixXd v(1, 1);
    v(0, 0) = val(a).cwiseProduct(c).sum();
    MatrixXd cc = c;
    return push(std::move(v), [id, ai, cc](Tape& t) {
      if (t.wants_grad(ai)) t.grad_ref(ai) += t.nodes_[id].grad(0, 0) * cc;
    });
  }

  // mean + std (.) eps with fixed noise; gradients flow to mean and std
  Var reparam_sample(Var mean, Var std, const MatrixXd& eps) {
    const int id = next_id();
    const int mi = mean.id, si = std.id;
    MatrixXd e = eps;
    return push(val(mean) + val(std).cwiseProduct(e), [id, mi, si, e](Tape& t) {
      const MatrixXd& g = t.nodes_[id].grad;
      if (t.wants_grad(mi)) t.grad_ref(mi) += g;
      if (t.wants_grad(si)) t.grad_ref(si) += g.cwiseProduct(e);
    });
  }

  // Closed-form diagonal-Gaussian KL(q || p), summed over coordinates.
  Var kl_diag(Var qm, Var qs, Var pm, Var ps) {
    const int id = next_id();
    const int a = qm.id, b = qs.id, c = pm.id, d = ps.id;
    const auto& mq = val(qm).array();
    const auto& sq = val(qs).array();
    const auto& mp = val(pm).array();
    const auto& sp = val(ps).array();
    MatrixXd v(1, 1);
    v(0, 0) = ((sp / sq).log() + (sq.square() + (mq - mp).square()) / (2.0 * sp.square()) - 0.5).sum();
    return push(std::move(v), [id, a, b, c, d](Tape& t) {
      const double g = t.nodes_[id].grad(0, 0);
      const auto& mq = t.nodes_[a].value.array();
      const auto& sq = t.nodes_[b].value.array();
      const auto& mp = t.nodes_[c].value.array();
      const auto& sp = t.nodes_[d].value.array();
      const auto sp2 = sp.square();
      if (t.wants_grad(a)) t.grad_ref(a).array() += g * (mq - mp) / sp2;
      if (t.wants_grad(b)) t.grad_ref(b).array() += g * (sq / sp2 - 1.0 / sq);
      if (t.wants_grad(c)) t.grad_ref(c).array() += g * (mp - mq) / sp2;
      if (t.wants_grad(d))
        t.grad_ref(d).array() += g * (1.0 / sp - (sq.square() + (mq - mp).square()) / (sp2 * sp));
    });
  }

  // log Bernoulli(a | sigmoid(z)) for a scalar logit; stable for large |z|
  Var log_bernoulli(Var z, int a) {
    const int id = next_id();
    const int zi = z.id;
    const double zv = scalar(z);
    MatrixXd v(1, 1);
    v(0, 0) = (a == 1) ? -softplus_stable(-zv) : -softplus_stable(zv);
    return push(std::move(v), [id, zi, a](Tape& t) {
      if (!t.wants_grad(zi)) return;
      const double g = t.nodes_[id].grad(0, 0);
      const double p = sigmoid_stable(t.nodes_[zi].value(0, 0));
      t.grad_ref(zi)(0, 0) += g * (static_cast<double>(a) - p);
    });
  }

  // mean over columns of softplus(z) - a.*z, i.e. mean binary cross-entropy
  // against logits; labels enter as a constant row
  Var bce_with_logits_mean(Var z, const Eigen::RowVectorXd& labels) {
    const int id = next_id();
    const int zi = z.id;
    const Eigen::RowVectorXd lab = labels;
    const auto& zv = val(z);
    const double n = static_cast<double>(zv.cols());
    double total = 0.0;
    for (Eigen::Index j = 0; j < zv.cols(); ++j)
      total += softplus_stable(zv(0, j)) - lab(j) * zv(0, j);
    MatrixXd v(1, 1);
    v(0, 0) = total / n;
    return push(std::move(v), [id, zi, lab, n](Tape& t) {
      if (!t.wants_grad(zi)) return;
      const double g = t.nodes_[id].grad(0, 0);
      const MatrixXd& zv = t.nodes_[zi].value;
      MatrixXd& gz = t.grad_ref(zi);
      for (Eigen::Index j = 0; j < zv.cols(); ++j)
        gz(0, j) += g * (sigmoid_stable(zv(0, j)) - lab(j)) / n;
    });
  }

  // Runs the reverse pass from a scalar root.
  void backward(Var root) {
    if (val(root).size() != 1) throw NumericalError("backward: root must be scalar");
    grad_ref(root.id)(0, 0) += 1.0;
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.backward && n.grad.size() > 0) n.backward(*this);
    }
  }

 private:
  std::vector<Node> nodes_;

  int next_id() const { return static_cast<int>(nodes_.size()); }

  Var push(MatrixXd value, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.backward = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  MatrixXd& grad_ref(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = MatrixXd::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  // Constants have no backward and need no gradient storage.
  bool wants_grad(int id) const { return nodes_[id].backward != nullptr; }

  void require_cols(Eigen::Index expected, Var x, const char* op) const {
    if (val(x).rows() != expected)
      throw ValidationError(std::string(op) + ": input has " + std::to_string(val(x).rows()) +
                            " rows, expected " + std::to_string(expected));
  }
};

}  // namespace iol::ad
