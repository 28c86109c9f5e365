#pragma once

#include <cstddef>
#include <span>

#include "driveid/numerics/random.hpp"
#include "driveid/numerics/tape.hpp"

namespace driveid::numerics {

/// y[b,o] = sum_i x[b,i] * w[i,o] + bias[o]   (x: BxI, w: IxO, bias: O)
Var linear(Var x, Var w, Var bias);

/// Dilated causal 1-D convolution with left zero padding of (K-1)*dilation.
///
/// x: B x Cin x L, w: Cout x Cin x K, bias: Cout.
/// out[b,c,t] = bias[c] + sum_{j,k} w[c,j,k] * x[b, j, t - (K-1-k)*dilation]
///
/// With output_stride s > 1 only the frames t with (L-1-t) % s == 0 are
/// produced (end-aligned decimation), giving ceil(L/s) output frames; the
/// values at those frames are identical to the stride-1 result.
Var conv1d_causal(Var x, Var w, Var bias, std::size_t dilation, std::size_t output_stride = 1);

Var relu(Var x);
Var add(Var x, Var y);
Var sub(Var x, Var y);
Var scale(Var x, double factor);
Var add_scalar(Var x, double offset);

/// Inverted dropout. In training mode each element is zeroed with
/// probability p and survivors are scaled by 1/(1-p); otherwise identity.
Var dropout(Var x, double p, bool training, DropoutStream& stream);

/// sum_d (a[d] - b[d])^2 as a 1-element tensor. Shapes must match.
Var squared_l2_distance(Var a, Var b);

/// Sum of all elements as a 1-element tensor.
Var sum(Var x);

/// B x C x L  ->  B x C, keeping frame L-1.
Var last_frame(Var x);

/// B x C x L  ->  B x C x ceil(L/s), keeping frames with (L-1-t) % s == 0.
Var decimate_tail(Var x, std::size_t stride);

/// Concatenates 2-D tensors with equal row counts along the column axis.
Var concat_columns(std::span<const Var> parts);

Var reshape(Var x, Shape shape);

/// Mean softmax cross-entropy of logits (B x K) against integer labels.
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

}  // namespace driveid::numerics
