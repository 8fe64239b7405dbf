#include "blastmamba/layers.hpp"

#include <cmath>

#include "blastmamba/ops.hpp"

namespace bm {

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.emplace_back(prefix + ".w", w);
  if (b.defined()) out.emplace_back(prefix + ".b", b);
}

Tensor make_param(Shape shape, std::vector<double> values) {
  return Tensor::from(std::move(shape), std::move(values), true);
}

Tensor normal_param(Rng& rng, Shape shape, double stddev) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = stddev * rng.normal();
  return make_param(std::move(shape), std::move(v));
}

Linear make_linear(Rng& rng, std::size_t in, std::size_t out, double gain, bool with_bias) {
  Linear l;
  l.w = normal_param(rng, {in, out}, gain / std::sqrt(static_cast<double>(in)));
  if (with_bias) l.b = Tensor::zeros({out}, true);
  return l;
}

Linear zero_linear(std::size_t in, std::size_t out, bool with_bias) {
  Linear l;
  l.w = Tensor::zeros({in, out}, true);
  if (with_bias) l.b = Tensor::zeros({out}, true);
  return l;
}

Tensor apply(Tape& tape, const Linear& layer, const Tensor& x) { return ops::linear(tape, x, layer.w, layer.b); }

}  // namespace bm
