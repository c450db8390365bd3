#include "odemm/encoders.hpp"

#include <cmath>
#include <random>

namespace odemm {

using ad::Binder;
using ad::Tensor;
using ad::Var;

namespace {

Tensor random_matrix(int rows, int cols, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, scale);
  Tensor t = Tensor::zeros({rows, cols});
  for (double& e : t.data) e = dist(rng);
  return t;
}

}  // namespace

TcnParams TcnParams::init(int in_channels, int channels, int n_layers, int kernel,
                          int embedding_dim, uint64_t seed) {
  std::mt19937_64 rng(seed);
  TcnParams p;
  p.in_channels = in_channels;
  p.embedding_dim = embedding_dim;
  int in_ch = in_channels;
  int dilation = 1;
  for (int l = 0; l < n_layers; ++l) {
    TcnLayerParams layer;
    layer.dilation = dilation;
    double scale = 1.0 / std::sqrt(static_cast<double>(in_ch * kernel));
    for (int i = 0; i < kernel; ++i) layer.taps.push_back(random_matrix(channels, in_ch, scale, rng));
    layer.bias = Tensor::zeros({channels, 1});
    if (in_ch != channels)
      layer.residual_proj = random_matrix(channels, in_ch, 1.0 / std::sqrt(in_ch), rng);
    p.layers.push_back(std::move(layer));
    in_ch = channels;
    dilation *= 2;
  }
  p.proj_w = random_matrix(embedding_dim, in_ch, 1.0 / std::sqrt(in_ch), rng);
  p.proj_b = Tensor::zeros({embedding_dim});
  return p;
}

Var dilated_causal_conv(Binder& bind, Var input, const std::vector<Var>& taps, int dilation) {
  const Tensor& x = input.value();
  if (x.rank() != 2) throw std::invalid_argument("dilated_causal_conv: input must be ch x L");
  const int ch = x.rows();
  const int len = x.cols();
  if (taps.empty()) throw std::invalid_argument("dilated_causal_conv: empty kernel");
  Var acc = ad::matmul(taps[0], input);
  for (size_t i = 1; i < taps.size(); ++i) {
    int shift = dilation * static_cast<int>(i);
    Var shifted;
    if (shift >= len) {
      shifted = bind.constant(Tensor::zeros({ch, len}));
    } else {
      Var head = bind.constant(Tensor::zeros({ch, shift}));
      Var body = ad::slice(input, 1, 0, len - shift);
      shifted = ad::concat({head, body}, 1);
    }
    acc = ad::add(acc, ad::matmul(taps[i], shifted));
  }
  return acc;
}

Var tcn_embed(Binder& bind, const CleanSegment& segment, const TcnParams& params) {
  const int len = segment.length();
  if (len < 1) throw std::invalid_argument("tcn_embed: empty segment");
  Tensor in = Tensor::zeros({segment.channel_count(), len});
  for (int c = 0; c < segment.channel_count(); ++c)
    for (int i = 0; i < len; ++i) in.at(c, i) = segment.channels[static_cast<size_t>(c)][static_cast<size_t>(i)];

  Var x = bind.constant(std::move(in));
  Var ones_row = bind.constant([&] {
    Tensor t = Tensor::zeros({1, len});
    for (double& e : t.data) e = 1.0;
    return t;
  }());

  for (const auto& layer : params.layers) {
    std::vector<Var> taps;
    for (const auto& t : layer.taps) taps.push_back(bind(t));
    Var conv = dilated_causal_conv(bind, x, taps, layer.dilation);
    Var biased = ad::add(conv, ad::matmul(bind(layer.bias), ones_row));
    Var activated = ad::tanh(biased);
    Var residual = layer.residual_proj ? ad::matmul(bind(*layer.residual_proj), x) : x;
    x = ad::add(activated, residual);
  }
  Var pooled = ad::mean_cols(x);
  return ad::add(ad::matmul(bind(params.proj_w), pooled), bind(params.proj_b));
}

Var attach_mask(Binder& bind, std::optional<Var> embedding, int embedding_dim) {
  if (!embedding) return bind.constant(Tensor::zeros({2 * embedding_dim}));
  Tensor ones = Tensor::zeros({embedding_dim});
  for (double& e : ones.data) e = 1.0;
  return ad::concat({*embedding, bind.constant(std::move(ones))}, 0);
}

}  // namespace odemm
