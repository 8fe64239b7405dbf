#pragma once

#include <string>
#include <utility>
#include <vector>

#include "blastmamba/rng.hpp"
#include "blastmamba/tensor.hpp"

namespace bm {

using NamedTensor = std::pair<std::string, Tensor>;
using ParamList = std::vector<NamedTensor>;

/// Dense projection over the last axis.
struct Linear {
  Tensor w;  // [in x out]
  Tensor b;  // [out], may be undefined

  std::size_t in_features() const { return w.dim(0); }
  std::size_t out_features() const { return w.dim(1); }
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Gaussian init with std = gain / sqrt(in); zero bias.
Linear make_linear(Rng& rng, std::size_t in, std::size_t out, double gain = 1.0, bool with_bias = true);
Linear zero_linear(std::size_t in, std::size_t out, bool with_bias = true);

Tensor apply(Tape& tape, const Linear& layer, const Tensor& x);

Tensor make_param(Shape shape, std::vector<double> values);
Tensor normal_param(Rng& rng, Shape shape, double stddev);

}  // namespace bm
