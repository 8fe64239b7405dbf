#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "blastmamba/layers.hpp"
#include "blastmamba/rng.hpp"
#include "blastmamba/tensor.hpp"

// 2-D visual state-space blocks. Feature maps are rank-3 tensors [H x W x C].
namespace bm::vss {

inline constexpr std::size_t kScanDirections = 4;

struct VSSConfig {
  std::size_t model_dim = 8;
  std::size_t state_dim = 8;
  double expand_ratio = 2.0;

  /// model_dim * expand_ratio; throws ConfigError unless it is a positive integer.
  std::size_t expanded_dim() const;
};

/// Selective-scan projections for one traversal direction.
struct DirectionWeights {
  Tensor w_b;      // [D x N]
  Tensor w_c;      // [D x N]
  Tensor w_delta;  // [D x 1]
  Tensor b_delta;  // [1]
  Tensor a_log;    // [N], a = -exp(a_log)
};

struct SS2DWeights {
  std::array<DirectionWeights, kScanDirections> dirs;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct VSSWeights {
  Tensor ln_gamma;  // [C]
  Tensor ln_beta;   // [C]
  Linear in;        // C -> D
  Linear gate;      // C -> D
  SS2DWeights ss2d;
  Linear out;  // D -> C, the residual branch output
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Spatio-temporal fusion: VSS at doubled width over [pre | post], projected back.
struct STSSWeights {
  VSSWeights vss;  // width 2C
  Linear proj;     // 2C -> C
  void collect(const std::string& prefix, ParamList& out) const;
};

SS2DWeights init_ss2d(Rng& rng, std::size_t channels, std::size_t state_dim);
VSSWeights init_vss(Rng& rng, const VSSConfig& cfg);
STSSWeights init_stss(Rng& rng, std::size_t channels, std::size_t state_dim, double expand_ratio);

/// Sets the residual-branch output projection to zero, making the block an identity.
void zero_residual_branch(VSSWeights& w);

/// Pixel orders of the four traversals of an H x W grid:
/// 0 row-major, 1 reverse row-major, 2 column-major, 3 reverse column-major.
/// orders[k][i] is the flat (row-major) pixel index visited at step i.
std::array<std::vector<std::size_t>, kScanDirections> scan_orders(std::size_t h, std::size_t w);

/// Flattens [H x W x C] into four [H*W x C] sequences.
std::array<Tensor, kScanDirections> cross_scan(Tape& tape, const Tensor& f);

/// Inverse-permutes each sequence back onto the grid and sums the four grids.
Tensor cross_merge(Tape& tape, const std::array<Tensor, kScanDirections>& seqs, std::size_t h, std::size_t w);

/// cross_scan -> per-direction selective scan -> cross_merge, divided by 4.
Tensor ss2d(Tape& tape, const Tensor& f, const SS2DWeights& w);

/// f + out(ss2d(silu(in(LN f))) * silu(gate(LN f)))
Tensor vss_block(Tape& tape, const Tensor& f, const VSSWeights& w);

/// proj(vss(cat(pre, post))) with channel concatenation; output has pre's channel count.
Tensor stss_block(Tape& tape, const Tensor& pre, const Tensor& post, const STSSWeights& w);

/// Residual-attention fusion (U + Up2x(D_prev)) * (1 + F_blast).
///
/// `d_prev` may be undefined (the coarsest stage), in which case the
/// upsampled term is zero. Otherwise it must have U's channel count and half
/// its spatial size. `blast` may be undefined, meaning no gate at all; a
/// zero-valued blast tensor gives a bit-identical result.
Tensor ra_stss_fuse(Tape& tape, const Tensor& u, const Tensor& d_prev, const Tensor& blast);

}  // namespace bm::vss
