#include "mbrl/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace mbrl {

AdamState AdamState::like(const std::vector<Mat*>& params, double lr) {
  AdamState s;
  s.lr = lr;
  for (const Mat* p : params) {
    s.m.push_back(Mat::Zero(p->rows(), p->cols()));
    s.v.push_back(Mat::Zero(p->rows(), p->cols()));
  }
  return s;
}

void adam_step(const std::vector<Mat*>& params, const std::vector<Mat>& grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Mat& p = *params[i];
    const Mat& g = grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i].array().matrix() +
                 (1.0 - state.beta2) * g.array().square().matrix();
    p.array() -= state.lr * (state.m[i].array() / bc1) /
                 ((state.v[i].array() / bc2).sqrt() + state.eps);
  }
}

}  // namespace mbrl
