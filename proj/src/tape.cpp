#include "mbrl/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace mbrl {

Var Tape::push(Mat value, bool requires_grad, std::function<void(Tape&)> back) {
  Node n;
  n.val = std::move(value);
  n.requires_grad = requires_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Mat value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

Mat Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.adj_init) return n.adj;
  return Mat::Zero(n.val.rows(), n.val.cols());
}

Mat& Tape::adj(Var v) {
  Node& n = nodes_[v.id];
  if (!n.adj_init) {
    n.adj = Mat::Zero(n.val.rows(), n.val.cols());
    n.adj_init = true;
  }
  return n.adj;
}

void Tape::backward(Var loss) {
  const Mat& lv = nodes_[loss.id].val;
  if (lv.rows() != 1 || lv.cols() != 1)
    throw std::invalid_argument("Tape::backward: loss must be a 1x1 node");
  adj(loss)(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.adj_init && n.requires_grad) n.back(*this);
  }
}

Var Tape::matmul(Var w, Var x) {
  Mat v = val(w) * val(x);
  bool ng = needs(w) || needs(x);
  return push(std::move(v), ng, [w, x, out = size()](Tape& t) {
    const Mat& g = t.adj(Var{out});
    if (t.needs(w)) t.adj(w).noalias() += g * t.val(x).transpose();
    if (t.needs(x)) t.adj(x).noalias() += t.val(w).transpose() * g;
  });
}

Var Tape::add_bias(Var x, Var b) {
  Mat v = val(x);
  v.colwise() += val(b).col(0);
  bool ng = needs(x) || needs(b);
  return push(std::move(v), ng, [x, b, out = size()](Tape& t) {
    const Mat& g = t.adj(Var{out});
    if (t.needs(x)) t.adj(x) += g;
    if (t.needs(b)) t.adj(b) += g.rowwise().sum();
  });
}

Var Tape::add(Var a, Var b) {
  Mat v = val(a) + val(b);
  return push(std::move(v), needs(a) || needs(b), [a, b, out = size()](Tape& t) {
    const Mat& g = t.adj(Var{out});
    if (t.needs(a)) t.adj(a) += g;
    if (t.needs(b)) t.adj(b) += g;
  });
}

Var Tape::sub(Var a, Var b) {
  Mat v = val(a) - val(b);
  return push(std::move(v), needs(a) || needs(b), [a, b, out = size()](Tape& t) {
    const Mat& g = t.adj(Var{out});
    if (t.needs(a)) t.adj(a) += g;
    if (t.needs(b)) t.adj(b) -= g;
  });
}

Var Tape::sub_from(const Mat& c, Var x) {
  Mat v = c - val(x);
  return push(std::move(v), needs(x), [x, out = size()](Tape& t) {
    if (t.needs(x)) t.adj(x) -= t.adj(Var{out});
  });
}

Var Tape::cwise_mul(Var a, Var b) {
  Mat v = val(a).cwiseProduct(val(b));
  return push(std::move(v), needs(a) || needs(b), [a, b, out = size()](Tape& t) {
    const Mat& g = t.adj(Var{out});
    if (t.needs(a)) t.adj(a) += g.cwiseProduct(t.val(b));
    if (t.needs(b)) t.adj(b) += g.cwiseProduct(t.val(a));
  });
}

Var Tape::cwise_mul(Var a, const Mat& c) {
  Mat v = val(a).cwiseProduct(c);
  return push(std::move(v), needs(a), [a, c, out = size()](Tape& t) {
    if (t.needs(a)) t.adj(a) += t.adj(Var{out}).cwiseProduct(c);
  });
}

Var Tape::mul_rowvec(Var a, const RowVec& w) {
  Mat v = (val(a).array().rowwise() * w.array()).matrix();
  return push(std::move(v), needs(a), [a, w, out = size()](Tape& t) {
    if (t.needs(a))
      t.adj(a).array() += t.adj(Var{out}).array().rowwise() * w.array();
  });
}

Var Tape::add_rowvec(Var a, const RowVec& c) {
  Mat v = (val(a).array().rowwise() + c.array()).matrix();
  return push(std::move(v), needs(a), [a, out = size()](Tape& t) {
    if (t.needs(a)) t.adj(a) += t.adj(Var{out});
  });
}

Var Tape::scale(Var a, double s) {
  Mat v = val(a) * s;
  return push(std::move(v), needs(a), [a, s, out = size()](Tape& t) {
    if (t.needs(a)) t.adj(a) += s * t.adj(Var{out});
  });
}

Var Tape::tanh(Var a) {
  Mat v = val(a).array().tanh().matrix();
  return push(std::move(v), needs(a), [a, out = size()](Tape& t) {
    if (t.needs(a)) {
      const Mat& y = t.val(Var{out});
      t.adj(a).array() += t.adj(Var{out}).array() * (1.0 - y.array().square());
    }
  });
}

Var Tape::elu(Var a) {
  Mat v = val(a).unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
  return push(std::move(v), needs(a), [a, out = size()](Tape& t) {
    if (t.needs(a)) {
      const Mat& x = t.val(a);
      const Mat& y = t.val(Var{out});
      const Mat& g = t.adj(Var{out});
      t.adj(a).array() += g.array() * (x.array() > 0.0).select(
          Eigen::ArrayXXd::Ones(x.rows(), x.cols()), y.array() + 1.0);
    }
  });
}

Var Tape::exp(Var a) {
  Mat v = val(a).array().exp().matrix();
  return push(std::move(v), needs(a), [a, out = size()](Tape& t) {
    if (t.needs(a))
      t.adj(a).array() += t.adj(Var{out}).array() * t.val(Var{out}).array();
  });
}

Var Tape::square(Var a) {
  Mat v = val(a).array().square().matrix();
  return push(std::move(v), needs(a), [a, out = size()](Tape& t) {
    if (t.needs(a))
      t.adj(a).array() += 2.0 * t.adj(Var{out}).array() * t.val(a).array();
  });
}

Var Tape::clamp(Var a, double lo, double hi) {
  Mat v = val(a).array().min(hi).max(lo).matrix();
  return push(std::move(v), needs(a), [a, lo, hi, out = size()](Tape& t) {
    if (t.needs(a)) {
      const Mat& x = t.val(a);
      Eigen::ArrayXXd pass =
          ((x.array() > lo) && (x.array() < hi)).cast<double>();
      t.adj(a).array() += t.adj(Var{out}).array() * pass;
    }
  });
}

Var Tape::log_one_minus_square(Var a) {
  Mat v = val(a).unaryExpr([](double x) { return std::log1p(-x * x); });
  return push(std::move(v), needs(a), [a, out = size()](Tape& t) {
    if (t.needs(a)) {
      const Mat& x = t.val(a);
      t.adj(a).array() += t.adj(Var{out}).array() *
                          (-2.0 * x.array() / (1.0 - x.array().square()));
    }
  });
}

Var Tape::vcat(Var top, Var bottom) {
  const Mat& a = val(top);
  const Mat& b = val(bottom);
  Mat v(a.rows() + b.rows(), a.cols());
  v.topRows(a.rows()) = a;
  v.bottomRows(b.rows()) = b;
  return push(std::move(v), needs(top) || needs(bottom),
              [top, bottom, out = size()](Tape& t) {
                const Mat& g = t.adj(Var{out});
                Eigen::Index nr = t.val(top).rows();
                if (t.needs(top)) t.adj(top) += g.topRows(nr);
                if (t.needs(bottom)) t.adj(bottom) += g.bottomRows(g.rows() - nr);
              });
}

Var Tape::slice_rows(Var a, int row0, int nrows) {
  Mat v = val(a).middleRows(row0, nrows);
  return push(std::move(v), needs(a), [a, row0, nrows, out = size()](Tape& t) {
    if (t.needs(a)) t.adj(a).middleRows(row0, nrows) += t.adj(Var{out});
  });
}

Var Tape::sum_rows(Var a) {
  Mat v = val(a).colwise().sum();
  return push(std::move(v), needs(a), [a, out = size()](Tape& t) {
    if (t.needs(a)) {
      const Mat& g = t.adj(Var{out});
      t.adj(a).array().rowwise() += Eigen::Array<double, 1, Eigen::Dynamic>(g.row(0).array());
    }
  });
}

Var Tape::sum(Var a) {
  Mat v(1, 1);
  v(0, 0) = val(a).sum();
  return push(std::move(v), needs(a), [a, out = size()](Tape& t) {
    if (t.needs(a)) t.adj(a).array() += t.adj(Var{out})(0, 0);
  });
}

Var Tape::squared_norm_cols(Var a) {
  Mat v = val(a).colwise().squaredNorm();
  return push(std::move(v), needs(a), [a, out = size()](Tape& t) {
    if (t.needs(a)) {
      const Mat& g = t.adj(Var{out});
      t.adj(a).array() += t.val(a).array().rowwise() *
                          Eigen::Array<double, 1, Eigen::Dynamic>(2.0 * g.row(0).array());
    }
  });
}

Var Tape::cwise_min(Var a, Var b) {
  Mat v = val(a).cwiseMin(val(b));
  return push(std::move(v), needs(a) || needs(b), [a, b, out = size()](Tape& t) {
    const Mat& g = t.adj(Var{out});
    Eigen::ArrayXXd a_wins = (t.val(a).array() <= t.val(b).array()).cast<double>();
    if (t.needs(a)) t.adj(a).array() += g.array() * a_wins;
    if (t.needs(b)) t.adj(b).array() += g.array() * (1.0 - a_wins);
  });
}

Var Tape::cross_entropy_cols(Var logits, const Mat& target_probs) {
  const Mat& l = val(logits);
  if (l.rows() != target_probs.rows() || l.cols() != target_probs.cols())
    throw std::invalid_argument("cross_entropy_cols: shape mismatch");
  Mat soft = softmax_cols(l);
  Mat v(1, l.cols());
  for (Eigen::Index c = 0; c < l.cols(); ++c) {
    double m = l.col(c).maxCoeff();
    double lse = m + std::log((l.col(c).array() - m).exp().sum());
    v(0, c) = lse - l.col(c).dot(target_probs.col(c));
  }
  return push(std::move(v), needs(logits),
              [logits, soft = std::move(soft), target_probs, out = size()](Tape& t) {
                if (!t.needs(logits)) return;
                const Mat& g = t.adj(Var{out});
                t.adj(logits).array() += (soft - target_probs).array().rowwise() *
                                         Eigen::Array<double, 1, Eigen::Dynamic>(g.row(0).array());
              });
}

Var Tape::twohot_decode_cols(Var logits, const TwoHotSpec& spec) {
  const Mat& l = val(logits);
  if (l.rows() != spec.num_bins)
    throw std::invalid_argument("twohot_decode_cols: logits rows != num_bins");
  Mat soft = softmax_cols(l);
  Vec centers(spec.num_bins);
  for (int i = 0; i < spec.num_bins; ++i) centers[i] = spec.center(i);
  RowVec s = centers.transpose() * soft;  // symlog-space expectation per column
  Mat v(1, l.cols());
  for (Eigen::Index c = 0; c < l.cols(); ++c) v(0, c) = symexp(s[c]);
  return push(std::move(v), needs(logits),
              [logits, soft = std::move(soft), centers = std::move(centers),
               s = std::move(s), out = size()](Tape& t) {
                if (!t.needs(logits)) return;
                const Mat& g = t.adj(Var{out});
                Mat& acc = t.adj(logits);
                // d symexp(s)/d logit_ij = exp(|s_j|) * p_ij * (c_i - s_j)
                for (Eigen::Index c = 0; c < soft.cols(); ++c) {
                  double dsym = std::exp(std::abs(s[c]));
                  acc.col(c).array() += g(0, c) * dsym * soft.col(c).array() *
                                        (centers.array() - s[c]);
                }
              });
}

}  // namespace mbrl
