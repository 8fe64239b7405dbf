#include "blastmamba/ssm.hpp"

#include <cmath>
#include <string>

#include "blastmamba/error.hpp"

namespace bm::ssm {

namespace {

// d/dz of (e^z - 1)/z, i.e. (z e^z - e^z + 1) / z^2.
double zoh_gain_derivative(double z) {
  if (std::abs(z) < 1e-2) {
    return 0.5 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0 + z * z * z * z / 144.0;
  }
  return (z * std::exp(z) - std::expm1(z)) / (z * z);
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

struct ScanShape {
  std::size_t length, channels, state;
};

// Runs the selective recurrence. When `states` is non-null it receives every
// h_t as [L x D x N]; a_bar / b_bar receive the per-step discretisation [L x N].
std::vector<double> scan_forward(std::span<const double> a, std::span<const double> b, std::span<const double> c,
                                 std::span<const double> delta, std::span<const double> x, ScanShape s,
                                 std::span<const double> h0, std::vector<double>* states,
                                 std::vector<double>* a_bar_out, std::vector<double>* b_bar_out) {
  const std::size_t L = s.length, D = s.channels, N = s.state;
  std::vector<double> h(D * N, 0.0);
  if (!h0.empty()) h.assign(h0.begin(), h0.end());
  std::vector<double> y(L * D, 0.0);
  std::vector<double> a_bar(N), b_bar(N);
  if (states) states->assign(L * D * N, 0.0);
  if (a_bar_out) a_bar_out->assign(L * N, 0.0);
  if (b_bar_out) b_bar_out->assign(L * N, 0.0);
  for (std::size_t t = 0; t < L; ++t) {
    if (!(delta[t] > 0.0)) throw ConfigError("selective_scan: delta must be positive at step " + std::to_string(t));
    for (std::size_t n = 0; n < N; ++n) {
      const auto e = zoh_entry(a[n], b[t * N + n], delta[t]);
      a_bar[n] = e.a_bar;
      b_bar[n] = e.b_bar;
    }
    if (a_bar_out) std::copy(a_bar.begin(), a_bar.end(), a_bar_out->begin() + t * N);
    if (b_bar_out) std::copy(b_bar.begin(), b_bar.end(), b_bar_out->begin() + t * N);
    const double* ct = c.data() + t * N;
    for (std::size_t d = 0; d < D; ++d) {
      const double xv = x[t * D + d];
      double* hd = h.data() + d * N;
      double acc = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        hd[n] = a_bar[n] * hd[n] + b_bar[n] * xv;
        acc += ct[n] * hd[n];
      }
      y[t * D + d] = acc;
    }
    if (states) std::copy(h.begin(), h.end(), states->begin() + t * D * N);
  }
  return y;
}

}  // namespace

double zoh_gain(double z) {
  if (std::abs(z) < kZohTaylorThreshold) return 1.0 + z / 2.0 + z * z / 6.0;
  return std::expm1(z) / z;
}

ZohEntry zoh_entry(double a, double b, double delta) {
  const double z = delta * a;
  return {std::exp(z), zoh_gain(z) * delta * b};
}

DiscreteSSM discretize_zoh(const ContinuousSSM& ssm) {
  if (!(ssm.delta > 0.0)) throw ConfigError("discretize_zoh: delta must be positive");
  const std::size_t n = ssm.a.size();
  if (n == 0) throw ShapeError("discretize_zoh: state dimension must be at least 1");
  if (ssm.b.size() != n || ssm.c.size() != n) throw ShapeError("discretize_zoh: a, b, c sizes differ");
  DiscreteSSM d;
  d.a_bar.resize(n);
  d.b_bar.resize(n);
  d.c = ssm.c;
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = zoh_entry(ssm.a[i], ssm.b[i], ssm.delta);
    d.a_bar[i] = e.a_bar;
    d.b_bar[i] = e.b_bar;
  }
  return d;
}

std::vector<double> scan_recurrent(const DiscreteSSM& d, std::span<const double> x, std::span<const double> h0) {
  const std::size_t n = d.state_dim();
  if (d.b_bar.size() != n || d.c.size() != n) throw ShapeError("scan_recurrent: a_bar, b_bar, c sizes differ");
  if (!h0.empty() && h0.size() != n) throw ShapeError("scan_recurrent: h0 must have state_dim entries");
  std::vector<double> h(n, 0.0);
  if (!h0.empty()) h.assign(h0.begin(), h0.end());
  std::vector<double> y(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = d.a_bar[i] * h[i] + d.b_bar[i] * x[t];
      acc += d.c[i] * h[i];
    }
    y[t] = acc;
  }
  return y;
}

std::vector<double> conv_kernel(const DiscreteSSM& d, std::size_t length) {
  if (length == 0) throw ShapeError("conv_kernel: length must be at least 1");
  std::vector<double> k(length, 0.0);
  for (std::size_t i = 0; i < d.state_dim(); ++i) {
    double pw = 1.0;
    for (std::size_t t = 0; t < length; ++t) {
      k[t] += d.c[i] * pw * d.b_bar[i];
      pw *= d.a_bar[i];
    }
  }
  return k;
}

std::vector<double> apply_causal_conv(std::span<const double> k, std::span<const double> x) {
  if (k.size() != x.size()) throw ShapeError("apply_causal_conv: kernel and input lengths differ");
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double acc = 0.0;
    for (std::size_t tau = 0; tau <= t; ++tau) acc += k[tau] * x[t - tau];
    y[t] = acc;
  }
  return y;
}

SelectiveParams selective_projections(std::span<const double> x, std::size_t length, const SelectiveWeights& w) {
  const std::size_t D = w.channels, N = w.state_dim;
  if (x.size() != length * D) throw ShapeError("selective_projections: input is not [L x D]");
  if (w.w_b.size() != D * N || w.w_c.size() != D * N || w.w_delta.size() != D) {
    throw ShapeError("selective_projections: weight shapes do not match channels / state_dim");
  }
  SelectiveParams sp;
  sp.length = length;
  sp.state_dim = N;
  sp.b.assign(length * N, 0.0);
  sp.c.assign(length * N, 0.0);
  sp.delta.assign(length, 0.0);
  for (std::size_t t = 0; t < length; ++t) {
    double pre = w.b_delta;
    for (std::size_t d = 0; d < D; ++d) {
      const double xv = x[t * D + d];
      for (std::size_t n = 0; n < N; ++n) {
        sp.b[t * N + n] += xv * w.w_b[d * N + n];
        sp.c[t * N + n] += xv * w.w_c[d * N + n];
      }
      pre += xv * w.w_delta[d];
    }
    sp.delta[t] = softplus(pre);
  }
  return sp;
}

std::vector<double> selective_scan(std::span<const double> a, const SelectiveParams& sp, std::span<const double> x,
                                   std::size_t channels, std::span<const double> h0) {
  const std::size_t L = sp.length, N = sp.state_dim;
  if (a.size() != N) throw ShapeError("selective_scan: a must have state_dim entries");
  if (sp.b.size() != L * N || sp.c.size() != L * N || sp.delta.size() != L) {
    throw ShapeError("selective_scan: sequence lengths of B, C, delta disagree");
  }
  if (x.size() != L * channels) throw ShapeError("selective_scan: x is not [L x D]");
  if (!h0.empty() && h0.size() != channels * N) throw ShapeError("selective_scan: h0 is not [D x N]");
  return scan_forward(a, sp.b, sp.c, sp.delta, x, {L, channels, N}, h0, nullptr, nullptr, nullptr);
}

Tensor selective_scan(Tape& tape, const Tensor& a, const Tensor& b, const Tensor& c, const Tensor& delta,
                      const Tensor& x) {
  if (a.rank() != 1) throw ShapeError("selective_scan: a must be [N]");
  if (x.rank() != 2) throw ShapeError("selective_scan: x must be [L x D]");
  const std::size_t N = a.dim(0), L = x.dim(0), D = x.dim(1);
  if (b.shape() != Shape{L, N} || c.shape() != Shape{L, N}) {
    throw ShapeError("selective_scan: B and C must be [" + std::to_string(L) + "x" + std::to_string(N) + "], got " +
                     shape_str(b.shape()) + " and " + shape_str(c.shape()));
  }
  if (delta.numel() != L) throw ShapeError("selective_scan: delta must have one entry per step");

  std::vector<double> states, a_bar, b_bar;
  auto y = scan_forward(a.data(), b.data(), c.data(), delta.data(), x.data(), {L, D, N}, {}, &states, &a_bar, &b_bar);
  Tensor out = Tensor::from({L, D}, std::move(y), any_requires_grad({&a, &b, &c, &delta, &x}));
  check_finite(out, "selective_scan");

  tape.record({&a, &b, &c, &delta, &x}, out,
              [a, b, c, delta, x, out, states = std::move(states), a_bar = std::move(a_bar),
               b_bar = std::move(b_bar), L, D, N]() mutable {
                if (!out.has_grad()) return;
                auto gy = out.grad();
                auto ad = a.data();
                auto bd = b.data();
                auto cd = c.data();
                auto dd = delta.data();
                auto xd = x.data();
                std::vector<double> ga(N, 0.0), gb(L * N, 0.0), gc(L * N, 0.0), gdelta(L, 0.0), gx(L * D, 0.0);
                std::vector<double> gh(D * N, 0.0);
                std::vector<double> g_abar(N), g_bbar(N);
                for (std::size_t ti = L; ti-- > 0;) {
                  const double* ht = states.data() + ti * D * N;
                  const double* hp = ti > 0 ? states.data() + (ti - 1) * D * N : nullptr;
                  const double* ct = cd.data() + ti * N;
                  const double* abt = a_bar.data() + ti * N;
                  const double* bbt = b_bar.data() + ti * N;
                  std::fill(g_abar.begin(), g_abar.end(), 0.0);
                  std::fill(g_bbar.begin(), g_bbar.end(), 0.0);
                  for (std::size_t d = 0; d < D; ++d) {
                    const double g = gy[ti * D + d];
                    const double xv = xd[ti * D + d];
                    double* ghd = gh.data() + d * N;
                    double gxv = 0.0;
                    for (std::size_t n = 0; n < N; ++n) {
                      gc[ti * N + n] += g * ht[d * N + n];
                      ghd[n] += g * ct[n];
                      if (hp) g_abar[n] += ghd[n] * hp[d * N + n];
                      g_bbar[n] += ghd[n] * xv;
                      gxv += ghd[n] * bbt[n];
                    }
                    gx[ti * D + d] += gxv;
                  }
                  const double dt = dd[ti];
                  for (std::size_t n = 0; n < N; ++n) {
                    const double z = dt * ad[n];
                    const double bv = bd[ti * N + n];
                    // a_bar = exp(dt a); b_bar = b * dt * gain(dt a)
                    gb[ti * N + n] += g_bbar[n] * dt * zoh_gain(z);
                    gdelta[ti] += g_abar[n] * ad[n] * abt[n] + g_bbar[n] * bv * abt[n];
                    ga[n] += g_abar[n] * dt * abt[n] + g_bbar[n] * bv * dt * dt * zoh_gain_derivative(z);
                  }
                  for (std::size_t d = 0; d < D; ++d)
                    for (std::size_t n = 0; n < N; ++n) gh[d * N + n] *= abt[n];
                }
                if (a.requires_grad()) a.accumulate_grad(ga);
                if (b.requires_grad()) b.accumulate_grad(gb);
                if (c.requires_grad()) c.accumulate_grad(gc);
                if (delta.requires_grad()) delta.accumulate_grad(gdelta);
                if (x.requires_grad()) x.accumulate_grad(gx);
              });
  return out;
}

std::vector<double> default_a(std::size_t state_dim) {
  std::vector<double> a(state_dim);
  for (std::size_t i = 0; i < state_dim; ++i) a[i] = -static_cast<double>(i + 1);
  return a;
}

}  // namespace bm::ssm
