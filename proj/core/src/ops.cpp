#include "blastmamba/ops.hpp"

#include <algorithm>
#include <cmath>

#include "blastmamba/error.hpp"

namespace bm::ops {

namespace {

Tensor make_output(Shape shape, std::vector<double> values, std::initializer_list<const Tensor*> inputs,
                   const char* op) {
  Tensor out = Tensor::from(std::move(shape), std::move(values), any_requires_grad(inputs));
  check_finite(out, op);
  return out;
}

// Number of elements of the larger operand that map onto one element of the
// smaller one; 1 when shapes are equal.
std::size_t broadcast_block(const Shape& big, const Shape& small) {
  if (big == small) return 1;
  if (big.size() != small.size()) return 0;
  std::size_t k = 0;
  while (k < big.size() && big[k] == small[k]) ++k;
  std::size_t block = 1;
  for (std::size_t j = k; j < big.size(); ++j) {
    if (small[j] != 1) return 0;
    block *= big[j];
  }
  return block;
}

struct Broadcast {
  Shape shape;
  std::size_t block_a = 1;
  std::size_t block_b = 1;
};

Broadcast resolve_broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast r;
  if (auto blk = broadcast_block(a, b); blk != 0) {
    r.shape = a;
    r.block_b = blk;
    return r;
  }
  if (auto blk = broadcast_block(b, a); blk != 0) {
    r.shape = b;
    r.block_a = blk;
    return r;
  }
  throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                   " are not broadcast-compatible");
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Reduce a full-size gradient onto a broadcast operand.
void accumulate_broadcast(const Tensor& target, std::span<const double> g, std::size_t block) {
  auto dst = target.mutable_grad();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i / block] += g[i];
}

template <class Fn>
Tensor unary(Tape& tape, const Tensor& a, const char* name, Fn&& f, std::function<double(double, double)> dfdx) {
  std::vector<double> v(a.numel());
  auto ad = a.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(ad[i]);
  Tensor out = make_output(a.shape(), std::move(v), {&a}, name);
  tape.record({&a}, out, [a, out, dfdx = std::move(dfdx)]() mutable {
    if (!out.has_grad() || !a.requires_grad()) return;
    auto g = out.grad();
    auto x = a.data();
    auto y = out.data();
    auto ga = a.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(x[i], y[i]);
  });
  return out;
}

// Per-axis sampling plan for half-pixel-centre bilinear interpolation.
struct AxisPlan {
  std::vector<std::size_t> i0, i1;
  std::vector<double> w;
};

AxisPlan plan_axis(std::size_t in, std::size_t out) {
  AxisPlan p;
  p.i0.resize(out);
  p.i1.resize(out);
  p.w.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    p.i0[d] = lo;
    p.i1[d] = std::min(lo + 1, in - 1);
    p.w[d] = src - static_cast<double>(lo);
  }
  return p;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) { return resolve_broadcast(a, b, "broadcast").shape; }

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  const auto bc = resolve_broadcast(a.shape(), b.shape(), "add");
  std::vector<double> v(shape_numel(bc.shape));
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = ad[i / bc.block_a] + bd[i / bc.block_b];
  Tensor out = make_output(bc.shape, std::move(v), {&a, &b}, "add");
  tape.record({&a, &b}, out, [a, b, out, bc]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    if (a.requires_grad()) accumulate_broadcast(a, g, bc.block_a);
    if (b.requires_grad()) accumulate_broadcast(b, g, bc.block_b);
  });
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  const auto bc = resolve_broadcast(a.shape(), b.shape(), "sub");
  std::vector<double> v(shape_numel(bc.shape));
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = ad[i / bc.block_a] - bd[i / bc.block_b];
  Tensor out = make_output(bc.shape, std::move(v), {&a, &b}, "sub");
  tape.record({&a, &b}, out, [a, b, out, bc]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    if (a.requires_grad()) accumulate_broadcast(a, g, bc.block_a);
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i / bc.block_b] -= g[i];
    }
  });
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  const auto bc = resolve_broadcast(a.shape(), b.shape(), "mul");
  std::vector<double> v(shape_numel(bc.shape));
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = ad[i / bc.block_a] * bd[i / bc.block_b];
  Tensor out = make_output(bc.shape, std::move(v), {&a, &b}, "mul");
  tape.record({&a, &b}, out, [a, b, out, bc]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto ad = a.data();
    auto bd = b.data();
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i / bc.block_a] += g[i] * bd[i / bc.block_b];
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i / bc.block_b] += g[i] * ad[i / bc.block_a];
    }
  });
  return out;
}

Tensor add_scalar(Tape& tape, const Tensor& a, double s) {
  return unary(tape, a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor scale(Tape& tape, const Tensor& a, double s) {
  return unary(tape, a, "scale", [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor neg(Tape& tape, const Tensor& a) { return scale(tape, a, -1.0); }

Tensor exp(Tape& tape, const Tensor& a) {
  return unary(tape, a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor silu(Tape& tape, const Tensor& a) {
  return unary(
      tape, a, "silu", [](double x) { return x * sigmoid(x); },
      [](double x, double) {
        const double s = sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
      });
}

Tensor softplus(Tape& tape, const Tensor& a) {
  return unary(tape, a, "softplus", softplus_scalar, [](double x, double) { return sigmoid(x); });
}

Tensor sum(Tape& tape, const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor out = make_output({1}, {s}, {&a}, "sum");
  tape.record({&a}, out, [a, out]() mutable {
    if (!out.has_grad() || !a.requires_grad()) return;
    const double g = out.grad()[0];
    for (double& x : a.mutable_grad()) x += g;
  });
  return out;
}

Tensor mean(Tape& tape, const Tensor& a) {
  return scale(tape, sum(tape, a), 1.0 / static_cast<double>(a.numel()));
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> v(m * n, 0.0);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      for (std::size_t j = 0; j < n; ++j) v[i * n + j] += av * bd[p * n + j];
    }
  }
  Tensor out = make_output({m, n}, std::move(v), {&a, &b}, "matmul");
  tape.record({&a, &b}, out, [a, b, out, m, k, n]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto ad = a.data();
    auto bd = b.data();
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();  // dA = dY * B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bd[p * n + j];
          ga[i * k + p] += s;
        }
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();  // dB = A^T * dY
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = ad[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
        }
    }
  });
  return out;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank(w, 2, "linear");
  const std::size_t cin = w.dim(0), cout = w.dim(1);
  if (x.shape().back() != cin) {
    throw ShapeError("linear: input channels " + shape_str(x.shape()) + " do not match weight " +
                     shape_str(w.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout)) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) + " does not match weight " + shape_str(w.shape()));
  }
  const std::size_t rows = x.numel() / cin;
  Shape out_shape = x.shape();
  out_shape.back() = cout;
  std::vector<double> v(rows * cout, 0.0);
  auto xd = x.data();
  auto wd = w.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double* yr = v.data() + r * cout;
    if (bias.defined()) {
      auto bd = bias.data();
      std::copy(bd.begin(), bd.end(), yr);
    }
    for (std::size_t p = 0; p < cin; ++p) {
      const double xv = xd[r * cin + p];
      const double* wr = wd.data() + p * cout;
      for (std::size_t j = 0; j < cout; ++j) yr[j] += xv * wr[j];
    }
  }
  Tensor out = make_output(std::move(out_shape), std::move(v), {&x, &w, &bias}, "linear");
  tape.record({&x, &w, &bias}, out, [x, w, bias, out, rows, cin, cout]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto xd = x.data();
    auto wd = w.data();
    if (x.requires_grad()) {
      auto gx = x.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t p = 0; p < cin; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < cout; ++j) s += g[r * cout + j] * wd[p * cout + j];
          gx[r * cin + p] += s;
        }
    }
    if (w.requires_grad()) {
      auto gw = w.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t p = 0; p < cin; ++p) {
          const double xv = xd[r * cin + p];
          if (xv == 0.0) continue;
          for (std::size_t j = 0; j < cout; ++j) gw[p * cout + j] += xv * g[r * cout + j];
        }
    }
    if (bias.defined() && bias.requires_grad()) {
      auto gb = bias.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cout; ++j) gb[j] += g[r * cout + j];
    }
  });
  return out;
}

Tensor conv1x1(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank(x, 3, "conv1x1");
  return linear(tape, x, w, bias);
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t c = x.shape().back();
  if (gamma.numel() != c || beta.numel() != c) {
    throw ShapeError("layer_norm: affine parameters must have " + std::to_string(c) + " entries");
  }
  const std::size_t rows = x.numel() / c;
  std::vector<double> xhat(x.numel());
  std::vector<double> rstd(rows);
  std::vector<double> v(x.numel());
  auto xd = x.data();
  auto gd = gamma.data();
  auto bd = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xd.data() + r * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += xr[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(c);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (xr[j] - mu) * rstd[r];
      xhat[r * c + j] = h;
      v[r * c + j] = gd[j] * h + bd[j];
    }
  }
  Tensor out = make_output(x.shape(), std::move(v), {&x, &gamma, &beta}, "layer_norm");
  tape.record({&x, &gamma, &beta}, out,
              [x, gamma, beta, out, xhat = std::move(xhat), rstd = std::move(rstd), rows, c]() mutable {
                if (!out.has_grad()) return;
                auto g = out.grad();
                auto gd = gamma.data();
                if (gamma.requires_grad()) {
                  auto gg = gamma.mutable_grad();
                  for (std::size_t i = 0; i < g.size(); ++i) gg[i % c] += g[i] * xhat[i];
                }
                if (beta.requires_grad()) {
                  auto gb = beta.mutable_grad();
                  for (std::size_t i = 0; i < g.size(); ++i) gb[i % c] += g[i];
                }
                if (x.requires_grad()) {
                  auto gx = x.mutable_grad();
                  const double inv_c = 1.0 / static_cast<double>(c);
                  for (std::size_t r = 0; r < rows; ++r) {
                    double m1 = 0.0, m2 = 0.0;
                    for (std::size_t j = 0; j < c; ++j) {
                      const double gh = g[r * c + j] * gd[j];
                      m1 += gh;
                      m2 += gh * xhat[r * c + j];
                    }
                    m1 *= inv_c;
                    m2 *= inv_c;
                    for (std::size_t j = 0; j < c; ++j) {
                      const double gh = g[r * c + j] * gd[j];
                      gx[r * c + j] += rstd[r] * (gh - m1 - xhat[r * c + j] * m2);
                    }
                  }
                }
              });
  return out;
}

Tensor bilinear_resize(Tape& tape, const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank(x, 3, "bilinear_resize");
  if (out_h == 0 || out_w == 0) throw ShapeError("bilinear_resize: target extent must be positive");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const AxisPlan py = plan_axis(h, out_h);
  const AxisPlan px = plan_axis(w, out_w);
  std::vector<double> v(out_h * out_w * c);
  auto xd = x.data();
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const double wy = py.w[oy];
    const double* r0 = xd.data() + py.i0[oy] * w * c;
    const double* r1 = xd.data() + py.i1[oy] * w * c;
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const double wx = px.w[ox];
      const std::size_t c0 = px.i0[ox] * c, c1 = px.i1[ox] * c;
      double* dst = v.data() + (oy * out_w + ox) * c;
      for (std::size_t k = 0; k < c; ++k) {
        const double top = r0[c0 + k] + wx * (r0[c1 + k] - r0[c0 + k]);
        const double bot = r1[c0 + k] + wx * (r1[c1 + k] - r1[c0 + k]);
        dst[k] = top + wy * (bot - top);
      }
    }
  }
  Tensor out = make_output({out_h, out_w, c}, std::move(v), {&x}, "bilinear_resize");
  tape.record({&x}, out, [x, out, py, px, w, c, out_h, out_w]() mutable {
    if (!out.has_grad() || !x.requires_grad()) return;
    auto g = out.grad();
    auto gx = x.mutable_grad();
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const double wy = py.w[oy];
      const std::size_t r0 = py.i0[oy] * w * c, r1 = py.i1[oy] * w * c;
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const double wx = px.w[ox];
        const std::size_t c0 = px.i0[ox] * c, c1 = px.i1[ox] * c;
        const double* src = g.data() + (oy * out_w + ox) * c;
        for (std::size_t k = 0; k < c; ++k) {
          const double gv = src[k];
          gx[r0 + c0 + k] += gv * (1.0 - wy) * (1.0 - wx);
          gx[r0 + c1 + k] += gv * (1.0 - wy) * wx;
          gx[r1 + c0 + k] += gv * wy * (1.0 - wx);
          gx[r1 + c1 + k] += gv * wy * wx;
        }
      }
    }
  });
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> v(x.data().begin(), x.data().end());
  Tensor out = Tensor::from(std::move(shape), std::move(v), x.requires_grad());
  tape.record({&x}, out, [x, out]() mutable {
    if (!out.has_grad() || !x.requires_grad()) return;
    x.accumulate_grad(out.grad());
  });
  return out;
}

Tensor concat_last(Tape& tape, const Tensor& a, const Tensor& b) {
  Shape lead_a(a.shape().begin(), a.shape().end() - 1);
  Shape lead_b(b.shape().begin(), b.shape().end() - 1);
  if (lead_a != lead_b) {
    throw ShapeError("concat_last: leading shapes differ, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t ca = a.shape().back(), cb = b.shape().back(), cc = ca + cb;
  const std::size_t rows = a.numel() / ca;
  std::vector<double> v(rows * cc);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(ad.data() + r * ca, ca, v.data() + r * cc);
    std::copy_n(bd.data() + r * cb, cb, v.data() + r * cc + ca);
  }
  Shape shape = lead_a;
  shape.push_back(cc);
  Tensor out = make_output(std::move(shape), std::move(v), {&a, &b}, "concat_last");
  tape.record({&a, &b}, out, [a, b, out, rows, ca, cb, cc]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < ca; ++j) ga[r * ca + j] += g[r * cc + j];
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cb; ++j) gb[r * cb + j] += g[r * cc + ca + j];
    }
  });
  return out;
}

Tensor space_to_depth(Tape& tape, const Tensor& x, std::size_t k) {
  require_rank(x, 3, "space_to_depth");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (k == 0 || h % k != 0 || w % k != 0) {
    throw ShapeError("space_to_depth: " + shape_str(x.shape()) + " is not divisible into " + std::to_string(k) +
                     "x" + std::to_string(k) + " blocks");
  }
  const std::size_t oh = h / k, ow = w / k, oc = k * k * c;
  // src[i] gives the input offset for output element i.
  std::vector<std::size_t> src(x.numel());
  for (std::size_t oy = 0; oy < oh; ++oy)
    for (std::size_t ox = 0; ox < ow; ++ox)
      for (std::size_t dy = 0; dy < k; ++dy)
        for (std::size_t dx = 0; dx < k; ++dx)
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t o = (oy * ow + ox) * oc + (dy * k + dx) * c + ch;
            src[o] = ((oy * k + dy) * w + (ox * k + dx)) * c + ch;
          }
  std::vector<double> v(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = xd[src[i]];
  Tensor out = make_output({oh, ow, oc}, std::move(v), {&x}, "space_to_depth");
  tape.record({&x}, out, [x, out, src = std::move(src)]() mutable {
    if (!out.has_grad() || !x.requires_grad()) return;
    auto g = out.grad();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[src[i]] += g[i];
  });
  return out;
}

Tensor gather_rows(Tape& tape, const Tensor& x, std::span<const std::size_t> index) {
  require_rank(x, 2, "gather_rows");
  const std::size_t rows = x.dim(0), d = x.dim(1);
  std::vector<std::size_t> idx(index.begin(), index.end());
  for (auto i : idx) {
    if (i >= rows) throw ShapeError("gather_rows: index out of range");
  }
  if (idx.empty()) throw ShapeError("gather_rows: empty index");
  std::vector<double> v(idx.size() * d);
  auto xd = x.data();
  for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(xd.data() + idx[i] * d, d, v.data() + i * d);
  Tensor out = make_output({idx.size(), d}, std::move(v), {&x}, "gather_rows");
  tape.record({&x}, out, [x, out, idx = std::move(idx), d]() mutable {
    if (!out.has_grad() || !x.requires_grad()) return;
    auto g = out.grad();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) gx[idx[i] * d + j] += g[i * d + j];
  });
  return out;
}

Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, std::span<const std::int32_t> labels,
                             std::int32_t ignore_index) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t p = logits.dim(0), t = logits.dim(1);
  if (labels.size() != p) throw ShapeError("softmax_cross_entropy: label count does not match logits rows");
  auto ld = logits.data();
  std::vector<double> prob(p * t, 0.0);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < p; ++i) {
    const std::int32_t y = labels[i];
    if (y == ignore_index) continue;
    if (y < 0 || static_cast<std::size_t>(y) >= t) {
      throw ConfigError("softmax_cross_entropy: label " + std::to_string(y) + " outside [0, " + std::to_string(t) +
                        ")");
    }
    const double* row = ld.data() + i * t;
    const double mx = *std::max_element(row, row + t);
    double z = 0.0;
    for (std::size_t j = 0; j < t; ++j) z += std::exp(row[j] - mx);
    const double logz = std::log(z) + mx;
    total += logz - row[y];
    for (std::size_t j = 0; j < t; ++j) prob[i * t + j] = std::exp(row[j] - logz);
    ++count;
  }
  const double loss = count ? total / static_cast<double>(count) : 0.0;
  Tensor out = make_output({1}, {loss}, {&logits}, "softmax_cross_entropy");
  std::vector<std::int32_t> lab(labels.begin(), labels.end());
  tape.record({&logits}, out,
              [logits, out, prob = std::move(prob), lab = std::move(lab), count, p, t, ignore_index]() mutable {
                if (!out.has_grad() || !logits.requires_grad() || count == 0) return;
                const double scale = out.grad()[0] / static_cast<double>(count);
                auto gl = logits.mutable_grad();
                for (std::size_t i = 0; i < p; ++i) {
                  if (lab[i] == ignore_index) continue;
                  for (std::size_t j = 0; j < t; ++j) {
                    const double onehot = static_cast<std::size_t>(lab[i]) == j ? 1.0 : 0.0;
                    gl[i * t + j] += scale * (prob[i * t + j] - onehot);
                  }
                }
              });
  return out;
}

}  // namespace bm::ops
