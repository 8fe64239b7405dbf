#pragma once

#include <cstdint>
#include <vector>

#include "blastmamba/tensor.hpp"

namespace bm {

struct AdamWOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay, applied as p *= (1 - lr * wd) before the
/// bias-corrected adaptive step.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWOptions options);

  /// One update from the gradients currently held by the parameters.
  void step();
  void zero_grad();

  std::uint64_t steps_taken() const { return t_; }
  const AdamWOptions& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t t_ = 0;
  AdamWOptions options_;
};

}  // namespace bm
