#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "blastmamba/tensor.hpp"

namespace bm::ssm {

/// Below this |delta * a| the ZOH input gain uses its Taylor series.
inline constexpr double kZohTaylorThreshold = 1e-6;

/// Diagonal continuous-time system h' = diag(a) h + b x, y = <c, h>.
struct ContinuousSSM {
  std::vector<double> a;  // strictly negative for a stable system
  std::vector<double> b;
  std::vector<double> c;
  double delta = 1.0;
};

struct DiscreteSSM {
  std::vector<double> a_bar;
  std::vector<double> b_bar;
  std::vector<double> c;

  std::size_t state_dim() const { return a_bar.size(); }
};

struct ZohEntry {
  double a_bar;
  double b_bar;
};

/// Zero-order hold for one diagonal entry:
///   a_bar = exp(delta a),  b_bar = (delta a)^-1 (exp(delta a) - 1) delta b.
ZohEntry zoh_entry(double a, double b, double delta);

/// (e^z - 1) / z, with the series 1 + z/2 + z^2/6 for |z| < kZohTaylorThreshold.
double zoh_gain(double z);

DiscreteSSM discretize_zoh(const ContinuousSSM& ssm);

/// h_t = a_bar * h_{t-1} + b_bar x_t, y_t = <c, h_t>. `h0` may be empty (zeros).
std::vector<double> scan_recurrent(const DiscreteSSM& d, std::span<const double> x, std::span<const double> h0 = {});

/// K[t] = sum_i c_i a_bar_i^t b_bar_i, t = 0..length-1.
std::vector<double> conv_kernel(const DiscreteSSM& d, std::size_t length);

/// Causal zero-padded convolution y_t = sum_{tau <= t} k[tau] x[t - tau].
std::vector<double> apply_causal_conv(std::span<const double> k, std::span<const double> x);

/// Time-varying (input-selected) parameters for a sequence of `length` steps.
/// b and c are row-major [length x state_dim].
struct SelectiveParams {
  std::size_t length = 0;
  std::size_t state_dim = 0;
  std::vector<double> b;
  std::vector<double> c;
  std::vector<double> delta;
};

/// Projection weights producing SelectiveParams from a [L x D] sequence.
struct SelectiveWeights {
  std::size_t channels = 0;   // D
  std::size_t state_dim = 0;  // N
  std::vector<double> w_b;    // [D x N]
  std::vector<double> w_c;    // [D x N]
  std::vector<double> w_delta;  // [D]
  double b_delta = 0.0;
};

/// B_t = x_t W_B, C_t = x_t W_C, delta_t = softplus(x_t W_delta + b_delta).
SelectiveParams selective_projections(std::span<const double> x, std::size_t length, const SelectiveWeights& w);

/// Selective scan over a [L x D] sequence with a shared diagonal `a`:
///   h_t = exp(delta_t a) h_{t-1} + B_bar_t x_t[d],  y_t[d] = <C_t, h_t[d]>
/// run independently per channel d. `h0` is [D x N] or empty for zeros.
std::vector<double> selective_scan(std::span<const double> a, const SelectiveParams& sp, std::span<const double> x,
                                   std::size_t channels, std::span<const double> h0 = {});

/// Differentiable selective scan.
///   a: [N], b: [L x N], c: [L x N], delta: [L] (> 0), x: [L x D]  ->  [L x D]
/// Gradients flow to every input.
Tensor selective_scan(Tape& tape, const Tensor& a, const Tensor& b, const Tensor& c, const Tensor& delta,
                      const Tensor& x);

/// Default diagonal initialisation a_i = -(i + 1).
std::vector<double> default_a(std::size_t state_dim);

}  // namespace bm::ssm
