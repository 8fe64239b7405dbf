#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "blastmamba/ops.hpp"
#include "blastmamba/rng.hpp"
#include "blastmamba/tensor.hpp"

namespace bm::testing {

inline constexpr double kFdStep = 1e-5;

struct GradCheck {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

/// |a - n| / max(|a|, |n|, floor)
inline double rel_err(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

using ScalarFn = std::function<Tensor(Tape&)>;

/// Analytic gradients of `f` with respect to `params`, by one backward pass.
inline std::vector<std::vector<double>> analytic_grads(const ScalarFn& f, const std::vector<Tensor>& params) {
  for (const auto& p : params) p.zero_grad();
  Tape tape;
  const Tensor out = f(tape);
  backward(tape, out);
  std::vector<std::vector<double>> g;
  for (const auto& p : params) g.emplace_back(p.grad().begin(), p.grad().end());
  return g;
}

inline double central_difference(const ScalarFn& f, Tensor p, std::size_t i, double h = kFdStep) {
  auto d = p.mutable_data();
  const double orig = d[i];
  d[i] = orig + h;
  Tape t1;
  const double up = f(t1).item();
  d[i] = orig - h;
  Tape t2;
  const double down = f(t2).item();
  d[i] = orig;
  return (up - down) / (2 * h);
}

/// Compares every element of every parameter.
inline GradCheck check_all(const ScalarFn& f, const std::vector<Tensor>& params) {
  const auto g = analytic_grads(f, params);
  GradCheck r;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].numel(); ++i) {
      r.max_rel_err = std::max(r.max_rel_err, rel_err(g[k][i], central_difference(f, params[k], i)));
      ++r.checked;
    }
  }
  return r;
}

/// Compares `samples` uniformly drawn elements across all parameters.
inline GradCheck check_sampled(const ScalarFn& f, const std::vector<Tensor>& params, std::size_t samples,
                               std::uint64_t seed) {
  const auto g = analytic_grads(f, params);
  std::size_t total = 0;
  for (const auto& p : params) total += p.numel();
  Rng rng(seed);
  GradCheck r;
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t flat = rng.below(total), k = 0;
    while (flat >= params[k].numel()) flat -= params[k++].numel();
    r.max_rel_err = std::max(r.max_rel_err, rel_err(g[k][flat], central_difference(f, params[k], flat)));
    ++r.checked;
  }
  return r;
}

/// Random tensor with entries uniform in [lo, hi).
inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0, bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

/// Contracts `y` against fixed random weights so every output element matters.
inline Tensor probe(Tape& tape, const Tensor& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  const Tensor w = random_tensor(rng, y.shape(), -1.0, 1.0, false);
  return ops::sum(tape, ops::mul(tape, y, w));
}

}  // namespace bm::testing
