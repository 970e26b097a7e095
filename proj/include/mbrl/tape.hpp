#pragma once

#include <functional>
#include <vector>

#include "mbrl/twohot.hpp"
#include "mbrl/types.hpp"

namespace mbrl {

// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

// Reverse-mode tape over matrix-valued nodes. Columns carry batch items, so
// one node is a whole batched activation and backward sweeps are dense
// matrix products. A tape is built per loss evaluation and discarded.
//
// Gradient flow is controlled at the leaves: a leaf with requires_grad=false
// (frozen parameters, stop-gradient targets) never receives an adjoint, which
// is how "no gradient reaches EMA targets" is enforced structurally.
class Tape {
 public:
  Var leaf(Mat value, bool requires_grad);
  Var constant(Mat value) { return leaf(std::move(value), false); }

  const Mat& value(Var v) const { return nodes_[v.id].val; }
  // Accumulated adjoint; zeros if the node was never touched by backward.
  Mat grad(Var v) const;

  // Seeds d(loss)/d(loss) = 1 and runs all recorded pullbacks in reverse
  // order. `loss` must be 1x1ful; throws std::invalid_argument otherwise.
  void backward(Var loss);

  // ---- primitive ops ----
  Var matmul(Var w, Var x);                  // w * x
  Var add_bias(Var x, Var b);                // x.colwise() + b (b is n x 1)
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var sub_from(const Mat& c, Var x);         // c - x
  Var cwise_mul(Var a, Var b);
  Var cwise_mul(Var a, const Mat& c);
  Var mul_rowvec(Var a, const RowVec& w);    // scales column j by w[j]
  Var add_rowvec(Var a, const RowVec& c);
  Var scale(Var a, double s);
  Var tanh(Var a);
  Var elu(Var a);
  Var exp(Var a);
  Var square(Var a);
  Var clamp(Var a, double lo, double hi);    // zero gradient outside (lo, hi)
  Var log_one_minus_square(Var a);           // log(1 - a^2), |a| < 1
  Var vcat(Var top, Var bottom);
  Var slice_rows(Var a, int row0, int nrows);
  Var sum_rows(Var a);                       // (r x c) -> (1 x c)
  Var sum(Var a);                            // -> 1 x 1
  Var squared_norm_cols(Var a);              // (r x c) -> (1 x c)
  Var cwise_min(Var a, Var b);               // subgradient to the smaller input
  // Per-column cross-entropy between softmax(logits) and fixed target
  // probabilities: (bins x c) -> (1 x c).
  Var cross_entropy_cols(Var logits, const Mat& target_probs);
  // Per-column two-hot decode with gradient through the softmax expectation:
  // (bins x c) -> (1 x c).
  Var twohot_decode_cols(Var logits, const TwoHotSpec& spec);

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Mat val;
    Mat adj;
    bool requires_grad = false;
    bool adj_init = false;
    std::function<void(Tape&)> back;  // empty for leaves
  };

  Var push(Mat value, bool requires_grad, std::function<void(Tape&)> back);
  bool needs(Var v) const { return nodes_[v.id].requires_grad; }
  // Adjoint accumulator; allocates zeros on first touch.
  Mat& adj(Var v);
  const Mat& val(Var v) const { return nodes_[v.id].val; }

  std::vector<Node> nodes_;
};

}  // namespace mbrl
