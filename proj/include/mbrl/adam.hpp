#pragma once

#include <vector>

#include "mbrl/types.hpp"

namespace mbrl {

// Adam with bias correction. Moment arrays mirror the parameter shapes.
struct AdamState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  long step = 0;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState like(const std::vector<Mat*>& params, double lr);
};

// One update in place. Throws std::invalid_argument on any shape mismatch.
void adam_step(const std::vector<Mat*>& params, const std::vector<Mat>& grads,
               AdamState& state);

}  // namespace mbrl
