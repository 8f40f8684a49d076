#pragma once

#include <complex>
#include <vector>

#include "speckle/grid.hpp"

namespace speckle::detail {

using Spectrum = Grid<std::complex<double>>;

/// Unnormalized forward 2-D DFT of a real image (full complex spectrum).
Spectrum fft2(const Image& image);

/// Inverse 2-D DFT scaled by 1/(rows*cols).
Spectrum ifft2(const Spectrum& spectrum);

}  // namespace speckle::detail
