#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "blastmamba/tensor.hpp"

namespace bm::ops {

// Binary elementwise ops broadcast over trailing singleton axes: the two
// operands must have equal rank, and the smaller one must match the larger on
// a leading prefix of axes and be 1 on every remaining axis. For example
// [H,W,C] (op) [H,W,1] and [L,D] (op) [L,1] are allowed, [H,W,C] (op) [1,1,C]
// is not. Identical shapes are the common case.
Shape broadcast_shape(const Shape& a, const Shape& b);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor add_scalar(Tape& tape, const Tensor& a, double s);
Tensor scale(Tape& tape, const Tensor& a, double s);
Tensor neg(Tape& tape, const Tensor& a);
Tensor exp(Tape& tape, const Tensor& a);

/// x * sigmoid(x)
Tensor silu(Tape& tape, const Tensor& a);
/// log(1 + e^x); positive wherever e^x does not underflow.
Tensor softplus(Tape& tape, const Tensor& a);

Tensor sum(Tape& tape, const Tensor& a);
Tensor mean(Tape& tape, const Tensor& a);

/// [M x K] * [K x N]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

/// Applies w [Cin x Cout] (and optional bias [Cout]) along the last axis of x.
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias = {});

/// 1x1 convolution of a channels-last image [H x W x Cin].
Tensor conv1x1(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias);

/// Normalizes the last axis to zero mean / unit variance, then applies gamma, beta.
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Half-pixel-centre (align_corners = false) bilinear resize of [H x W x C].
Tensor bilinear_resize(Tape& tape, const Tensor& x, std::size_t out_h, std::size_t out_w);

Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

/// Concatenates two tensors of equal leading shape along the last axis.
Tensor concat_last(Tape& tape, const Tensor& a, const Tensor& b);

/// Folds each non-overlapping k x k block of [H x W x C] into one pixel of
/// [H/k x W/k x k*k*C]. Block values are ordered (dy, dx, c).
Tensor space_to_depth(Tape& tape, const Tensor& x, std::size_t k);

/// out[i, :] = x[index[i], :] for a 2-D x. Backward scatter-adds.
Tensor gather_rows(Tape& tape, const Tensor& x, std::span<const std::size_t> index);

/// Mean negative log-softmax over positions whose label != ignore_index.
/// Returns 0 (with zero gradient) if every position is ignored.
Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, std::span<const std::int32_t> labels,
                             std::int32_t ignore_index = -1);

}  // namespace bm::ops
