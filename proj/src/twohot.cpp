#include "mbrl/twohot.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mbrl {

double symlog(double x) { return x >= 0.0 ? std::log1p(x) : -std::log1p(-x); }

double symexp(double y) { return y >= 0.0 ? std::expm1(y) : -std::expm1(-y); }

void TwoHotSpec::validate() const {
  if (num_bins < 2) throw std::invalid_argument("TwoHotSpec: num_bins must be >= 2");
  if (!(lo < hi)) throw std::invalid_argument("TwoHotSpec: lo must be < hi");
}

Vec twohot_encode(double v, const TwoHotSpec& spec) {
  double s = std::clamp(symlog(v), spec.lo, spec.hi);
  double pos = (s - spec.lo) / spec.bin_width();
  int k = std::min(static_cast<int>(pos), spec.num_bins - 2);
  double w = pos - k;  // in [0, 1]
  Vec p = Vec::Zero(spec.num_bins);
  p[k] = 1.0 - w;
  p[k + 1] = w;
  return p;
}

double twohot_decode(const Vec& p, const TwoHotSpec& spec) {
  if (p.size() != spec.num_bins)
    throw std::invalid_argument("twohot_decode: probability vector length mismatch");
  double s = 0.0;
  for (int i = 0; i < spec.num_bins; ++i) {
    if (p[i] < 0.0) throw std::invalid_argument("twohot_decode: negative probability entry");
    s += p[i] * spec.center(i);
  }
  return symexp(s);
}

Mat softmax_cols(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    double m = logits.col(c).maxCoeff();
    out.col(c) = (logits.col(c).array() - m).exp();
    out.col(c) /= out.col(c).sum();
  }
  return out;
}

RowVec decode_cols(const Mat& logits, const TwoHotSpec& spec) {
  Mat probs = softmax_cols(logits);
  RowVec out(logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    double s = 0.0;
    for (int i = 0; i < spec.num_bins; ++i) s += probs(i, c) * spec.center(i);
    out[c] = symexp(s);
  }
  return out;
}

double ce_twohot_loss(const Vec& logits, double target, const TwoHotSpec& spec,
                      Vec* grad) {
  if (logits.size() != spec.num_bins)
    throw std::invalid_argument("ce_twohot_loss: logits length mismatch");
  Vec p = twohot_encode(target, spec);
  double m = logits.maxCoeff();
  double lse = m + std::log((logits.array() - m).exp().sum());
  double loss = lse - logits.dot(p);
  if (grad) {
    grad->resize(logits.size());
    *grad = (logits.array() - lse).exp().matrix() - p;
  }
  return loss;
}

Mat twohot_encode_cols(const RowVec& targets, const TwoHotSpec& spec) {
  Mat out = Mat::Zero(spec.num_bins, targets.size());
  for (Eigen::Index c = 0; c < targets.size(); ++c)
    out.col(c) = twohot_encode(targets[c], spec);
  return out;
}

}  // namespace mbrl
