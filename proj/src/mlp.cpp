#include "mbrl/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace mbrl {

Mlp Mlp::make(int in_dim, const std::vector<int>& hidden, int out_dim,
              Activation act, OutputKind out, Rng& rng) {
  if (in_dim <= 0 || out_dim <= 0)
    throw std::invalid_argument("Mlp::make: dimensions must be positive");
  Mlp net;
  net.activation = act;
  net.output = out;
  std::vector<int> dims;
  dims.push_back(in_dim);
  for (int h : hidden) dims.push_back(h);
  dims.push_back(out_dim);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    Mat w(dims[i + 1], dims[i]);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-bound, bound);
    Mat b(dims[i + 1], 1);
    for (Eigen::Index r = 0; r < b.rows(); ++r) b(r, 0) = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

long Mlp::param_count() const {
  long n = 0;
  for (const Mat& w : weights) n += w.size();
  for (const Mat& b : biases) n += b.size();
  return n;
}

std::vector<Mat*> Mlp::params() {
  std::vector<Mat*> p;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    p.push_back(&weights[i]);
    p.push_back(&biases[i]);
  }
  return p;
}

std::vector<const Mat*> Mlp::params() const {
  std::vector<const Mat*> p;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    p.push_back(&weights[i]);
    p.push_back(&biases[i]);
  }
  return p;
}

static Mat apply_activation(const Mat& x, Activation act) {
  if (act == Activation::tanh) return x.array().tanh().matrix();
  return x.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
}

Mat Mlp::forward(const Mat& x) const {
  if (x.rows() != in_dim())
    throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  Mat h = x;
  for (int i = 0; i < num_layers(); ++i) {
    Mat z = weights[i] * h;
    z.colwise() += biases[i].col(0);
    h = (i + 1 < num_layers()) ? apply_activation(z, activation) : std::move(z);
  }
  return h;
}

Vec Mlp::forward(const Vec& x) const { return forward(Mat(x)).col(0); }

MlpOnTape put_on_tape(Tape& tape, const Mlp& net, bool requires_grad) {
  MlpOnTape t;
  t.net = &net;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    t.weights.push_back(tape.leaf(net.weights[i], requires_grad));
    t.biases.push_back(tape.leaf(net.biases[i], requires_grad));
  }
  return t;
}

Var MlpOnTape::forward(Tape& tape, Var x) const {
  Var h = x;
  int n = static_cast<int>(weights.size());
  for (int i = 0; i < n; ++i) {
    Var z = tape.add_bias(tape.matmul(weights[i], h), biases[i]);
    if (i + 1 < n)
      h = net->activation == Activation::tanh ? tape.tanh(z) : tape.elu(z);
    else
      h = z;
  }
  return h;
}

void MlpOnTape::collect_grads(const Tape& tape, std::vector<Mat>& out) const {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back(tape.grad(weights[i]));
    out.push_back(tape.grad(biases[i]));
  }
}

}  // namespace mbrl
