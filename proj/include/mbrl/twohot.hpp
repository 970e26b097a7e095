#pragma once

#include "mbrl/types.hpp"

namespace mbrl {

// Symmetric log transform: sign(x) * ln(1 + |x|). Compresses magnitudes so a
// fixed bin grid can represent rewards and returns across scales.
double symlog(double x);

// Exact inverse of symlog.
double symexp(double y);

// Uniform bin grid in symlog space shared by the reward and value heads.
struct TwoHotSpec {
  int num_bins = 65;
  double lo = -10.0;  // support bounds in symlog space
  double hi = 10.0;

  double bin_width() const { return (hi - lo) / (num_bins - 1); }
  double center(int i) const { return lo + bin_width() * i; }
  void validate() const;  // throws std::invalid_argument
};

// Encodes a scalar as linear mass on the two bins adjacent to symlog(v),
// clamped to the support. Sums to 1 with at most two nonzero entries.
Vec twohot_encode(double v, const TwoHotSpec& spec);

// symexp of the probability-weighted mean of bin centers.
// Throws std::invalid_argument on negative entries.
double twohot_decode(const Vec& p, const TwoHotSpec& spec);

// Column-wise softmax.
Mat softmax_cols(const Mat& logits);

// Decodes one value per column of a logits matrix: softmax, expectation over
// bin centers, symexp.
RowVec decode_cols(const Mat& logits, const TwoHotSpec& spec);

// Cross-entropy between softmax(logits) and twohot_encode(target).
// If grad is non-null it receives dloss/dlogits = softmax(logits) - twohot.
double ce_twohot_loss(const Vec& logits, double target, const TwoHotSpec& spec,
                      Vec* grad = nullptr);

// Column j of the result is twohot_encode(targets[j]).
Mat twohot_encode_cols(const RowVec& targets, const TwoHotSpec& spec);

}  // namespace mbrl
