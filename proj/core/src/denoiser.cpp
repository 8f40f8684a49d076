#include "speckle/denoiser.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

#include "speckle/errors.hpp"
#include "speckle/rng.hpp"

namespace speckle {
namespace {

template <typename Real>
using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MatrixMap = Eigen::Map<RowMatrix<Real>>;
template <typename Real>
using ConstMatrixMap = Eigen::Map<const RowMatrix<Real>>;
template <typename Real>
using ConstVectorMap = Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, 1>>;

// Zero-padded "same" patch matrix: row (ci, ky, kx), column pixel.
template <typename Real>
void im2col(const Planes<Real>& in, int kernel, std::vector<Real>& cols) {
  const int pad = kernel / 2;
  const int h = in.rows;
  const int w = in.cols;
  const std::size_t hw = in.plane_size();
  cols.assign(static_cast<std::size_t>(in.channels) * kernel * kernel * hw, Real{});
  std::size_t row = 0;
  for (int ci = 0; ci < in.channels; ++ci) {
    const Real* src = in.data.data() + ci * hw;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx, ++row) {
        Real* dst = cols.data() + row * hw;
        const int oy = ky - pad;
        const int ox = kx - pad;
        for (int r = 0; r < h; ++r) {
          const int sr = r + oy;
          if (sr < 0 || sr >= h) continue;
          const int c0 = std::max(0, -ox);
          const int c1 = std::min(w, w - ox);
          for (int c = c0; c < c1; ++c) dst[r * w + c] = src[sr * w + c + ox];
        }
      }
    }
  }
}

template <typename Real>
void col2im(const RowMatrix<Real>& cols, int kernel, Planes<Real>& out) {
  const int pad = kernel / 2;
  const int h = out.rows;
  const int w = out.cols;
  const std::size_t hw = out.plane_size();
  std::fill(out.data.begin(), out.data.end(), Real{});
  Eigen::Index row = 0;
  for (int ci = 0; ci < out.channels; ++ci) {
    Real* dst = out.data.data() + ci * hw;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx, ++row) {
        const Real* src = cols.data() + row * static_cast<Eigen::Index>(hw);
        const int oy = ky - pad;
        const int ox = kx - pad;
        for (int r = 0; r < h; ++r) {
          const int sr = r + oy;
          if (sr < 0 || sr >= h) continue;
          const int c0 = std::max(0, -ox);
          const int c1 = std::min(w, w - ox);
          for (int c = c0; c < c1; ++c) dst[sr * w + c + ox] += src[r * w + c];
        }
      }
    }
  }
}

template <typename Real>
Real sigmoid(Real v) {
  return Real(1) / (Real(1) + std::exp(-v));
}

}  // namespace

void Architecture::validate() const {
  if (cond_channels < 1) throw std::invalid_argument("architecture needs at least one condition channel");
  if (hidden.empty()) throw std::invalid_argument("architecture needs at least one hidden layer");
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("hidden layer widths must be positive");
  }
  if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("kernel size must be odd and positive");
  if (time_dim < 2 || time_dim % 2 != 0) throw std::invalid_argument("time embedding dimension must be even");
}

std::vector<LayerOffsets> layer_offsets(const Architecture& arch) {
  arch.validate();
  std::vector<LayerOffsets> offsets;
  std::size_t cursor = 0;
  const auto k2 = static_cast<std::size_t>(arch.kernel) * arch.kernel;
  for (int l = 0; l < arch.layer_count(); ++l) {
    const auto in = static_cast<std::size_t>(arch.in_width(l));
    const auto out = static_cast<std::size_t>(arch.out_width(l));
    LayerOffsets o;
    o.conv = cursor;
    cursor += out * in * k2;
    if (arch.is_hidden(l)) {
      o.bias = cursor;
      cursor += out;
      o.film = cursor;
      cursor += 2 * out * static_cast<std::size_t>(arch.time_dim);
      o.film_bias = cursor;
      cursor += 2 * out;
    }
    offsets.push_back(o);
  }
  return offsets;
}

std::size_t Architecture::weight_count() const {
  const auto offsets = layer_offsets(*this);
  const auto k2 = static_cast<std::size_t>(kernel) * kernel;
  return offsets.back().conv + static_cast<std::size_t>(in_width(layer_count() - 1)) * k2;
}

template <typename Real>
BasicDenoiser<Real> init_denoiser(const Architecture& arch, std::uint64_t seed, InitMode mode) {
  const auto offsets = layer_offsets(arch);
  BasicDenoiser<Real> params{arch, std::vector<Real>(arch.weight_count(), Real{})};
  Rng rng(seed);
  const bool all = mode == InitMode::all_random;
  auto fill = [&](std::size_t begin, std::size_t count, double bound) {
    for (std::size_t i = 0; i < count; ++i) params.weights[begin + i] = static_cast<Real>(rng.uniform(-bound, bound));
  };
  const auto k2 = static_cast<std::size_t>(arch.kernel) * arch.kernel;
  for (int l = 0; l < arch.layer_count(); ++l) {
    const auto in = static_cast<std::size_t>(arch.in_width(l));
    const auto out = static_cast<std::size_t>(arch.out_width(l));
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * k2));
    const auto& o = offsets[static_cast<std::size_t>(l)];
    if (arch.is_hidden(l) || all) fill(o.conv, out * in * k2, bound);
    if (arch.is_hidden(l)) {
      const double film_bound = 1.0 / std::sqrt(static_cast<double>(arch.time_dim));
      fill(o.film, 2 * out * static_cast<std::size_t>(arch.time_dim), film_bound);
      if (all) {
        fill(o.bias, out, bound);
        fill(o.film_bias, 2 * out, film_bound);
      }
    }
  }
  return params;
}

template <typename Real>
std::vector<Real> time_embedding(int t, int dim) {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("time embedding dimension must be even");
  const int half = dim / 2;
  std::vector<Real> e(static_cast<std::size_t>(dim));
  for (int j = 0; j < half; ++j) {
    const double freq = std::exp(-std::log(10000.0) * j / half);
    e[static_cast<std::size_t>(j)] = static_cast<Real>(std::sin(t * freq));
    e[static_cast<std::size_t>(j + half)] = static_cast<Real>(std::cos(t * freq));
  }
  return e;
}

template <typename Real>
Planes<Real> network_input(const Grid<Real>& x_t, const Planes<Real>& condition) {
  if (x_t.rows() != condition.rows || x_t.cols() != condition.cols) {
    throw std::invalid_argument("network_input: latent and condition shapes differ");
  }
  Planes<Real> in(condition.channels + 1, condition.rows, condition.cols);
  std::copy(x_t.begin(), x_t.end(), in.data.begin());
  std::copy(condition.data.begin(), condition.data.end(), in.data.begin() + static_cast<std::ptrdiff_t>(x_t.size()));
  return in;
}

template <typename Real>
Grid<Real> denoise_forward(const BasicDenoiser<Real>& params, const Planes<Real>& input, int t,
                           ForwardCache<Real>* cache) {
  const Architecture& arch = params.arch;
  const auto offsets = layer_offsets(arch);
  if (params.weights.size() != arch.weight_count()) {
    throw std::invalid_argument("denoiser weight count does not match its architecture");
  }
  if (input.channels != arch.input_channels()) {
    throw std::invalid_argument("denoiser expects " + std::to_string(arch.input_channels()) + " input channels, got " +
                                std::to_string(input.channels));
  }
  const int h = input.rows;
  const int w = input.cols;
  const auto hw = static_cast<Eigen::Index>(input.plane_size());
  const int k = arch.kernel;
  const auto k2 = static_cast<Eigen::Index>(k) * k;

  ForwardCache<Real> local;
  ForwardCache<Real>& c = cache != nullptr ? *cache : local;
  c = ForwardCache<Real>{};
  c.embedding = time_embedding<Real>(t, arch.time_dim);
  const ConstVectorMap<Real> emb(c.embedding.data(), arch.time_dim);

  Planes<Real> activation = input;
  std::vector<Real> cols;
  Grid<Real> output(h, w);
  for (int l = 0; l < arch.layer_count(); ++l) {
    const auto& o = offsets[static_cast<std::size_t>(l)];
    const int in_w = arch.in_width(l);
    const int out_w = arch.out_width(l);
    im2col(activation, k, cols);
    const ConstMatrixMap<Real> weight(params.weights.data() + o.conv, out_w, in_w * k2);
    const ConstMatrixMap<Real> patches(cols.data(), in_w * k2, hw);

    if (!arch.is_hidden(l)) {
      MatrixMap<Real> out(output.data(), 1, hw);
      out.noalias() = weight * patches;
      if (cache != nullptr) c.columns.push_back(std::move(cols));
      break;
    }

    Planes<Real> z(out_w, h, w);
    MatrixMap<Real> zm(z.data.data(), out_w, hw);
    zm.noalias() = weight * patches;
    const ConstMatrixMap<Real> film_w(params.weights.data() + o.film, 2 * out_w, arch.time_dim);
    const ConstVectorMap<Real> film_b(params.weights.data() + o.film_bias, 2 * out_w);
    std::vector<Real> film(static_cast<std::size_t>(2 * out_w));
    Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, 1>>(film.data(), 2 * out_w) = film_w * emb + film_b;

    Planes<Real> post(out_w, h, w);
    Planes<Real> next(out_w, h, w);
    for (int ch = 0; ch < out_w; ++ch) {
      const Real bias = params.weights[o.bias + static_cast<std::size_t>(ch)];
      const Real scale = Real(1) + film[static_cast<std::size_t>(ch)];
      const Real shift = film[static_cast<std::size_t>(out_w + ch)];
      auto zp = z.plane(ch);
      auto hp = post.plane(ch);
      auto ap = next.plane(ch);
      for (std::size_t i = 0; i < zp.size(); ++i) {
        zp[i] += bias;
        hp[i] = zp[i] * scale + shift;
        ap[i] = hp[i] * sigmoid(hp[i]);
      }
    }
    for (Real v : next.data) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw NumericalError("denoiser: non-finite activation in hidden layer " + std::to_string(l) + " at t=" +
                             std::to_string(t));
      }
    }
    if (cache != nullptr) {
      c.columns.push_back(std::move(cols));
      c.pre_film.push_back(std::move(z));
      c.post_film.push_back(std::move(post));
      c.film.push_back(std::move(film));
    }
    activation = std::move(next);
  }
  for (Real v : output) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw NumericalError("denoiser: non-finite output at t=" + std::to_string(t));
    }
  }
  return output;
}

template <typename Real>
void denoise_backward(const BasicDenoiser<Real>& params, const ForwardCache<Real>& cache, const Grid<Real>& grad_output,
                      std::span<Real> grad) {
  const Architecture& arch = params.arch;
  const auto offsets = layer_offsets(arch);
  if (grad.size() != params.weights.size()) throw std::invalid_argument("gradient buffer has the wrong size");
  if (cache.columns.size() != static_cast<std::size_t>(arch.layer_count())) {
    throw std::invalid_argument("denoise_backward needs a cache from denoise_forward");
  }
  const int h = grad_output.rows();
  const int w = grad_output.cols();
  const auto hw = static_cast<Eigen::Index>(grad_output.size());
  const int k = arch.kernel;
  const auto k2 = static_cast<Eigen::Index>(k) * k;
  const ConstVectorMap<Real> emb(cache.embedding.data(), arch.time_dim);

  // Gradient w.r.t. the current layer's conv output (after bias), out x HW.
  RowMatrix<Real> dz = ConstMatrixMap<Real>(grad_output.data(), 1, hw);
  for (int l = arch.layer_count() - 1; l >= 0; --l) {
    const auto& o = offsets[static_cast<std::size_t>(l)];
    const int in_w = arch.in_width(l);
    const int out_w = arch.out_width(l);
    const auto& cols = cache.columns[static_cast<std::size_t>(l)];
    const ConstMatrixMap<Real> patches(cols.data(), in_w * k2, hw);
    MatrixMap<Real> dweight(grad.data() + o.conv, out_w, in_w * k2);
    dweight.noalias() += dz * patches.transpose();
    if (l == 0) break;

    const ConstMatrixMap<Real> weight(params.weights.data() + o.conv, out_w, in_w * k2);
    RowMatrix<Real> dcols = weight.transpose() * dz;
    Planes<Real> dact(in_w, h, w);
    col2im(dcols, k, dact);

    // Back through SiLU and FiLM of hidden layer l-1, producing its dz.
    const int prev = l - 1;
    const auto& po = offsets[static_cast<std::size_t>(prev)];
    const auto& z = cache.pre_film[static_cast<std::size_t>(prev)];
    const auto& post = cache.post_film[static_cast<std::size_t>(prev)];
    const auto& film = cache.film[static_cast<std::size_t>(prev)];
    RowMatrix<Real> next_dz(in_w, hw);
    std::vector<Real> dfilm(static_cast<std::size_t>(2 * in_w));
    for (int ch = 0; ch < in_w; ++ch) {
      const Real scale = Real(1) + film[static_cast<std::size_t>(ch)];
      const auto zp = z.plane(ch);
      const auto hp = post.plane(ch);
      const auto gp = dact.plane(ch);
      Real dgamma{};
      Real dbeta{};
      Real dbias{};
      for (Eigen::Index i = 0; i < hw; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const Real s = sigmoid(hp[idx]);
        const Real dh = gp[idx] * s * (Real(1) + hp[idx] * (Real(1) - s));
        dgamma += dh * zp[idx];
        dbeta += dh;
        const Real d = dh * scale;
        next_dz(ch, i) = d;
        dbias += d;
      }
      dfilm[static_cast<std::size_t>(ch)] = dgamma;
      dfilm[static_cast<std::size_t>(in_w + ch)] = dbeta;
      grad[po.bias + static_cast<std::size_t>(ch)] += dbias;
      grad[po.film_bias + static_cast<std::size_t>(ch)] += dgamma;
      grad[po.film_bias + static_cast<std::size_t>(in_w + ch)] += dbeta;
    }
    MatrixMap<Real> dfilm_w(grad.data() + po.film, 2 * in_w, arch.time_dim);
    dfilm_w.noalias() += ConstVectorMap<Real>(dfilm.data(), 2 * in_w) * emb.transpose();
    dz = std::move(next_dz);
  }
}

#define SPECKLE_INSTANTIATE(Real)                                                                             \
  template BasicDenoiser<Real> init_denoiser<Real>(const Architecture&, std::uint64_t, InitMode);           \
  template std::vector<Real> time_embedding<Real>(int, int);                                               \
  template Planes<Real> network_input<Real>(const Grid<Real>&, const Planes<Real>&);                       \
  template Grid<Real> denoise_forward<Real>(const BasicDenoiser<Real>&, const Planes<Real>&, int,           \
                                            ForwardCache<Real>*);                                          \
  template void denoise_backward<Real>(const BasicDenoiser<Real>&, const ForwardCache<Real>&, const Grid<Real>&, \
                                       std::span<Real>);

SPECKLE_INSTANTIATE(float)
SPECKLE_INSTANTIATE(double)
#undef SPECKLE_INSTANTIATE

}  // namespace speckle
