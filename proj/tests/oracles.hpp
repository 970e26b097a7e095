#pragma once

// Test-side oracles. These deliberately avoid the library's forward/backward
// code paths: finite differences for gradients, plain scalar loops for MLP
// forwards, brute-force recomputation for statistics.

#include <cmath>
#include <functional>
#include <vector>

#include "mbrl/mlp.hpp"
#include "mbrl/types.hpp"

namespace oracle {

// Central finite differences of f with respect to every entry of every
// parameter matrix, perturbing in place.
inline std::vector<mbrl::Mat> finite_diff(const std::vector<mbrl::Mat*>& params,
                                          const std::function<double()>& f,
                                          double h = 1e-5) {
  std::vector<mbrl::Mat> grads;
  for (mbrl::Mat* p : params) {
    mbrl::Mat g(p->rows(), p->cols());
    for (Eigen::Index c = 0; c < p->cols(); ++c) {
      for (Eigen::Index r = 0; r < p->rows(); ++r) {
        double saved = (*p)(r, c);
        (*p)(r, c) = saved + h;
        double up = f();
        (*p)(r, c) = saved - h;
        double down = f();
        (*p)(r, c) = saved;
        g(r, c) = (up - down) / (2.0 * h);
      }
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

// Scaled relative error: absolute below 1, relative above.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

inline double max_grad_rel_err(const std::vector<mbrl::Mat>& analytic,
                               const std::vector<mbrl::Mat>& fd) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    for (Eigen::Index c = 0; c < analytic[i].cols(); ++c)
      for (Eigen::Index r = 0; r < analytic[i].rows(); ++r)
        worst = std::max(worst, rel_err(analytic[i](r, c), fd[i](r, c)));
  return worst;
}

// Straight-line scalar forward pass with plain loops; no Eigen products.
inline std::vector<double> scalar_mlp_forward(const mbrl::Mlp& net,
                                              std::vector<double> x) {
  for (int layer = 0; layer < net.num_layers(); ++layer) {
    const mbrl::Mat& w = net.weights[layer];
    const mbrl::Mat& b = net.biases[layer];
    std::vector<double> y(static_cast<std::size_t>(w.rows()), 0.0);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double acc = b(r, 0);
      for (Eigen::Index c = 0; c < w.cols(); ++c) acc += w(r, c) * x[c];
      y[r] = acc;
    }
    if (layer + 1 < net.num_layers()) {
      for (double& v : y) {
        if (net.activation == mbrl::Activation::tanh) v = std::tanh(v);
        else v = v > 0.0 ? v : std::expm1(v);
      }
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace oracle
