#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "odemm/signal.hpp"
#include "odemm/tensor.hpp"

namespace odemm {

// One dilated causal conv layer. Tap i multiplies input position n - d*i,
// so taps[0] is the current-sample kernel. Each tap is (out_ch x in_ch).
struct TcnLayerParams {
  std::vector<ad::Tensor> taps;
  ad::Tensor bias;  // (out_ch, 1), broadcast over time via matmul with ones
  int dilation = 1;
  std::optional<ad::Tensor> residual_proj;  // (out_ch x in_ch) when widths differ
};

// Per-modality extractor: conv stack, then mean-pool over time and a linear
// projection to the embedding size.
struct TcnParams {
  std::vector<TcnLayerParams> layers;
  ad::Tensor proj_w;  // (D x last_channels)
  ad::Tensor proj_b;  // (D)
  int in_channels = 0;
  int embedding_dim = 0;

  static TcnParams init(int in_channels, int channels, int n_layers, int kernel, int embedding_dim,
                        uint64_t seed);
};

// Left-zero-padded dilated convolution; output length equals input length and
// position n depends only on input positions <= n.
ad::Var dilated_causal_conv(ad::Binder& bind, ad::Var input, const std::vector<ad::Var>& taps,
                            int dilation);

ad::Var tcn_embed(ad::Binder& bind, const CleanSegment& segment, const TcnParams& params);

// Present -> [embedding || ones]; absent -> zeros of length 2D.
ad::Var attach_mask(ad::Binder& bind, std::optional<ad::Var> embedding, int embedding_dim);

}  // namespace odemm
