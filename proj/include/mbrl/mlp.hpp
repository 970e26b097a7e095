#pragma once

#include <vector>

#include "mbrl/rng.hpp"
#include "mbrl/tape.hpp"
#include "mbrl/types.hpp"

namespace mbrl {

enum class Activation { tanh, elu };

// Whether the last layer emits a value directly or logits for a two-hot head.
enum class OutputKind { value, logits };

// Dense multilayer perceptron. Hidden layers share one activation, the output
// layer is linear. Weights are (out x in); inputs and activations are column
// batches.
struct Mlp {
  std::vector<Mat> weights;
  std::vector<Mat> biases;  // out x 1
  Activation activation = Activation::tanh;
  OutputKind output = OutputKind::value;

  // Initialization is uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
  static Mlp make(int in_dim, const std::vector<int>& hidden, int out_dim,
                  Activation act, OutputKind out, Rng& rng);

  int in_dim() const { return static_cast<int>(weights.front().cols()); }
  int out_dim() const { return static_cast<int>(weights.back().rows()); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  long param_count() const;

  std::vector<Mat*> params();
  std::vector<const Mat*> params() const;

  // Batched forward pass, one input per column. Throws on row mismatch.
  Mat forward(const Mat& x) const;
  Vec forward(const Vec& x) const;
};

// The network's parameters registered as leaves of a tape, so a loss graph
// can be recorded through it.
struct MlpOnTape {
  const Mlp* net = nullptr;
  std::vector<Var> weights;
  std::vector<Var> biases;

  Var forward(Tape& tape, Var x) const;
  // Appends d(loss)/d(param) in params() order.
  void collect_grads(const Tape& tape, std::vector<Mat>& out) const;
};

MlpOnTape put_on_tape(Tape& tape, const Mlp& net, bool requires_grad);

}  // namespace mbrl
