#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "speckle/grid.hpp"

namespace speckle {

/// C x H x W channel stack, row-major within each channel.
template <typename Real>
struct Planes {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<Real> data;

  Planes() = default;
  Planes(int c, int r, int w) : channels(c), rows(r), cols(w), data(static_cast<std::size_t>(c) * r * w, Real{}) {}

  std::size_t plane_size() const { return static_cast<std::size_t>(rows) * cols; }
  std::span<Real> plane(int c) { return {data.data() + c * plane_size(), plane_size()}; }
  std::span<const Real> plane(int c) const { return {data.data() + c * plane_size(), plane_size()}; }
};

/// Layer layout of the convolutional noise predictor.
///
/// Input channels: the noisy latent followed by `cond_channels` condition
/// channels. Each hidden layer is conv -> FiLM(t) -> SiLU, where FiLM applies
/// h = z (1 + gamma_t) + beta_t with (gamma_t, beta_t) a linear projection of
/// the sinusoidal embedding of t. The output layer is a bias-free conv to one
/// channel.
struct Architecture {
  int cond_channels = 6;
  std::vector<int> hidden = {32, 32, 32};
  int kernel = 3;
  int time_dim = 32;

  int input_channels() const { return 1 + cond_channels; }
  int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
  int in_width(int layer) const { return layer == 0 ? input_channels() : hidden[static_cast<std::size_t>(layer - 1)]; }
  int out_width(int layer) const { return layer + 1 == layer_count() ? 1 : hidden[static_cast<std::size_t>(layer)]; }
  bool is_hidden(int layer) const { return layer + 1 < layer_count(); }

  std::size_t weight_count() const;
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Offsets of one layer's tensors inside the flat weight vector.
/// Layout per layer: conv [out][in][k][k], bias [out], film [2 out][time_dim], film bias [2 out]
/// (the last three only on hidden layers; gamma rows precede beta rows).
struct LayerOffsets {
  std::size_t conv = 0;
  std::size_t bias = 0;
  std::size_t film = 0;
  std::size_t film_bias = 0;
};

std::vector<LayerOffsets> layer_offsets(const Architecture& arch);

template <typename Real>
struct BasicDenoiser {
  Architecture arch;
  std::vector<Real> weights;

  template <typename U>
  BasicDenoiser<U> cast() const {
    return {arch, std::vector<U>(weights.begin(), weights.end())};
  }
};

using DenoiserParams = BasicDenoiser<float>;

enum class InitMode {
  /// Uniform +-1/sqrt(fan_in) conv weights, zero biases, zero output layer.
  standard,
  /// Every tensor random, including biases and the output layer (tests).
  all_random,
};

template <typename Real>
BasicDenoiser<Real> init_denoiser(const Architecture& arch, std::uint64_t seed, InitMode mode = InitMode::standard);

/// Sinusoidal embedding: sin(t f_j) for j < d/2, then cos(t f_j); f_j = 10000^(-j/(d/2)).
template <typename Real>
std::vector<Real> time_embedding(int t, int dim);

/// Activations retained for the backward pass.
template <typename Real>
struct ForwardCache {
  std::vector<Real> embedding;
  std::vector<std::vector<Real>> columns;  // im2col of each layer input
  std::vector<Planes<Real>> pre_film;      // conv output z (hidden layers)
  std::vector<Planes<Real>> post_film;     // h = z (1 + gamma) + beta
  std::vector<std::vector<Real>> film;     // [gamma; beta] per hidden layer
};

/// Noise prediction for network input `input` = concat(x_t, condition).
/// Throws NumericalError on non-finite activations.
template <typename Real>
Grid<Real> denoise_forward(const BasicDenoiser<Real>& params, const Planes<Real>& input, int t,
                           ForwardCache<Real>* cache = nullptr);

/// Accumulates d(loss)/d(weights) into `grad` given d(loss)/d(output).
template <typename Real>
void denoise_backward(const BasicDenoiser<Real>& params, const ForwardCache<Real>& cache, const Grid<Real>& grad_output,
                      std::span<Real> grad);

/// Stacks x_t in front of the condition channels.
template <typename Real>
Planes<Real> network_input(const Grid<Real>& x_t, const Planes<Real>& condition);

}  // namespace speckle
