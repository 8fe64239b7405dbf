#include "blastmamba/vss.hpp"

#include <cmath>
#include <string>

#include "blastmamba/error.hpp"
#include "blastmamba/ops.hpp"
#include "blastmamba/ssm.hpp"

namespace bm::vss {

namespace {

void require_map(const Tensor& f, const char* op) {
  if (f.rank() != 3) throw ShapeError(std::string(op) + ": expected an [H x W x C] map, got " + shape_str(f.shape()));
}

std::vector<std::size_t> inverse(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

}  // namespace

std::size_t VSSConfig::expanded_dim() const {
  const double e = static_cast<double>(model_dim) * expand_ratio;
  if (!(e >= 1.0) || std::floor(e) != e) {
    throw ConfigError("VSSConfig: model_dim * expand_ratio must be a positive integer");
  }
  return static_cast<std::size_t>(e);
}

void SS2DWeights::collect(const std::string& prefix, ParamList& out) const {
  for (std::size_t k = 0; k < kScanDirections; ++k) {
    const auto p = prefix + ".dir" + std::to_string(k);
    const auto& d = dirs[k];
    out.emplace_back(p + ".w_b", d.w_b);
    out.emplace_back(p + ".w_c", d.w_c);
    out.emplace_back(p + ".w_delta", d.w_delta);
    out.emplace_back(p + ".b_delta", d.b_delta);
    out.emplace_back(p + ".a_log", d.a_log);
  }
}

void VSSWeights::collect(const std::string& prefix, ParamList& out) const {
  out.emplace_back(prefix + ".ln_gamma", ln_gamma);
  out.emplace_back(prefix + ".ln_beta", ln_beta);
  in.collect(prefix + ".in", out);
  gate.collect(prefix + ".gate", out);
  ss2d.collect(prefix + ".ss2d", out);
  this->out.collect(prefix + ".out", out);
}

void STSSWeights::collect(const std::string& prefix, ParamList& out) const {
  vss.collect(prefix + ".vss", out);
  proj.collect(prefix + ".proj", out);
}

SS2DWeights init_ss2d(Rng& rng, std::size_t channels, std::size_t state_dim) {
  SS2DWeights w;
  const double s = 1.0 / std::sqrt(static_cast<double>(channels));
  const auto a = ssm::default_a(state_dim);
  std::vector<double> a_log(state_dim);
  for (std::size_t n = 0; n < state_dim; ++n) a_log[n] = std::log(-a[n]);
  for (auto& d : w.dirs) {
    d.w_b = normal_param(rng, {channels, state_dim}, s);
    d.w_c = normal_param(rng, {channels, state_dim}, s);
    d.w_delta = normal_param(rng, {channels, 1}, 0.1 * s);
    // Step size log-uniform in [0.01, 0.1]; store its softplus preimage.
    const double dt = std::exp(rng.uniform(std::log(0.01), std::log(0.1)));
    d.b_delta = make_param({1}, {dt + std::log(-std::expm1(-dt))});
    d.a_log = make_param({state_dim}, a_log);
  }
  return w;
}

VSSWeights init_vss(Rng& rng, const VSSConfig& cfg) {
  const std::size_t c = cfg.model_dim, d = cfg.expanded_dim();
  VSSWeights w;
  w.ln_gamma = Tensor::full({c}, 1.0, true);
  w.ln_beta = Tensor::zeros({c}, true);
  w.in = make_linear(rng, c, d);
  w.gate = make_linear(rng, c, d);
  w.ss2d = init_ss2d(rng, d, cfg.state_dim);
  w.out = make_linear(rng, d, c, 0.5);
  return w;
}

STSSWeights init_stss(Rng& rng, std::size_t channels, std::size_t state_dim, double expand_ratio) {
  STSSWeights w;
  w.vss = init_vss(rng, {2 * channels, state_dim, expand_ratio});
  w.proj = make_linear(rng, 2 * channels, channels);
  return w;
}

void zero_residual_branch(VSSWeights& w) {
  for (double& v : w.out.w.mutable_data()) v = 0.0;
  if (w.out.b.defined())
    for (double& v : w.out.b.mutable_data()) v = 0.0;
}

std::array<std::vector<std::size_t>, kScanDirections> scan_orders(std::size_t h, std::size_t w) {
  const std::size_t n = h * w;
  std::array<std::vector<std::size_t>, kScanDirections> o;
  for (auto& v : o) v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    o[0][i] = i;
    o[1][i] = n - 1 - i;
  }
  std::size_t i = 0;
  for (std::size_t c = 0; c < w; ++c)
    for (std::size_t r = 0; r < h; ++r) o[2][i++] = r * w + c;
  for (std::size_t j = 0; j < n; ++j) o[3][j] = o[2][n - 1 - j];
  return o;
}

std::array<Tensor, kScanDirections> cross_scan(Tape& tape, const Tensor& f) {
  require_map(f, "cross_scan");
  const std::size_t h = f.dim(0), w = f.dim(1), c = f.dim(2);
  const Tensor flat = ops::reshape(tape, f, {h * w, c});
  const auto orders = scan_orders(h, w);
  std::array<Tensor, kScanDirections> seqs;
  for (std::size_t k = 0; k < kScanDirections; ++k) seqs[k] = ops::gather_rows(tape, flat, orders[k]);
  return seqs;
}

Tensor cross_merge(Tape& tape, const std::array<Tensor, kScanDirections>& seqs, std::size_t h, std::size_t w) {
  const auto orders = scan_orders(h, w);
  Tensor acc;
  for (std::size_t k = 0; k < kScanDirections; ++k) {
    if (seqs[k].rank() != 2 || seqs[k].dim(0) != h * w) {
      throw ShapeError("cross_merge: sequence " + std::to_string(k) + " has shape " + shape_str(seqs[k].shape()) +
                       ", expected length " + std::to_string(h * w));
    }
    const Tensor grid = ops::gather_rows(tape, seqs[k], inverse(orders[k]));
    acc = acc.defined() ? ops::add(tape, acc, grid) : grid;
  }
  return ops::reshape(tape, acc, {h, w, acc.dim(1)});
}

Tensor ss2d(Tape& tape, const Tensor& f, const SS2DWeights& w) {
  require_map(f, "ss2d");
  const std::size_t h = f.dim(0), wd = f.dim(1), c = f.dim(2);
  if (w.dirs[0].w_b.dim(0) != c) {
    throw ShapeError("ss2d: map has " + std::to_string(c) + " channels, weights expect " +
                     std::to_string(w.dirs[0].w_b.dim(0)));
  }
  const auto seqs = cross_scan(tape, f);
  std::array<Tensor, kScanDirections> ys;
  for (std::size_t k = 0; k < kScanDirections; ++k) {
    const auto& d = w.dirs[k];
    const Tensor& seq = seqs[k];
    const Tensor b = ops::matmul(tape, seq, d.w_b);
    const Tensor cc = ops::matmul(tape, seq, d.w_c);
    const Tensor delta = ops::softplus(tape, ops::linear(tape, seq, d.w_delta, d.b_delta));
    const Tensor a = ops::neg(tape, ops::exp(tape, d.a_log));
    ys[k] = ssm::selective_scan(tape, a, b, cc, delta, seq);
  }
  return ops::scale(tape, cross_merge(tape, ys, h, wd), 1.0 / static_cast<double>(kScanDirections));
}

Tensor vss_block(Tape& tape, const Tensor& f, const VSSWeights& w) {
  require_map(f, "vss_block");
  const Tensor z = ops::layer_norm(tape, f, w.ln_gamma, w.ln_beta);
  const Tensor u = ops::silu(tape, apply(tape, w.in, z));
  const Tensor g = ops::silu(tape, apply(tape, w.gate, z));
  const Tensor s = ss2d(tape, u, w.ss2d);
  const Tensor branch = apply(tape, w.out, ops::mul(tape, s, g));
  return ops::add(tape, f, branch);
}

Tensor stss_block(Tape& tape, const Tensor& pre, const Tensor& post, const STSSWeights& w) {
  require_map(pre, "stss_block");
  if (pre.shape() != post.shape()) {
    throw ShapeError("stss_block: pre " + shape_str(pre.shape()) + " and post " + shape_str(post.shape()) +
                     " differ");
  }
  const Tensor cat = ops::concat_last(tape, pre, post);
  return apply(tape, w.proj, vss_block(tape, cat, w.vss));
}

Tensor ra_stss_fuse(Tape& tape, const Tensor& u, const Tensor& d_prev, const Tensor& blast) {
  require_map(u, "ra_stss_fuse");
  Tensor fused = u;
  if (d_prev.defined()) {
    require_map(d_prev, "ra_stss_fuse");
    if (d_prev.dim(0) * 2 != u.dim(0) || d_prev.dim(1) * 2 != u.dim(1) || d_prev.dim(2) != u.dim(2)) {
      throw ShapeError("ra_stss_fuse: previous stage " + shape_str(d_prev.shape()) +
                       " is not half the size of " + shape_str(u.shape()));
    }
    fused = ops::add(tape, u, ops::bilinear_resize(tape, d_prev, u.dim(0), u.dim(1)));
  }
  if (!blast.defined()) return fused;
  if (blast.shape() != u.shape()) {
    throw ShapeError("ra_stss_fuse: blast features " + shape_str(blast.shape()) + " do not match " +
                     shape_str(u.shape()));
  }
  return ops::mul(tape, fused, ops::add_scalar(tape, blast, 1.0));
}

}  // namespace bm::vss
