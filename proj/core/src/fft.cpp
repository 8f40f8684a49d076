#include "fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <memory>
#include <mutex>

namespace speckle::detail {
namespace {

// FFTW's planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
using Buffer = std::unique_ptr<fftw_complex[], FftwFree>;

Buffer allocate(std::size_t n) {
  auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (p == nullptr) throw std::bad_alloc();
  return Buffer(p);
}

void transform(Spectrum& data, int sign) {
  const auto n = data.size();
  if (n == 0) return;
  Buffer in = allocate(n);
  Buffer out = allocate(n);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(data.rows(), data.cols(), in.get(), out.get(), sign, FFTW_ESTIMATE);
  }
  static_assert(sizeof(std::complex<double>) == sizeof(fftw_complex));
  std::memcpy(in.get(), data.data(), sizeof(fftw_complex) * n);
  fftw_execute(plan);
  std::memcpy(static_cast<void*>(data.data()), out.get(), sizeof(fftw_complex) * n);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace

Spectrum fft2(const Image& image) {
  Spectrum s(image.rows(), image.cols());
  for (std::size_t i = 0; i < image.size(); ++i) s[i] = image[i];
  transform(s, FFTW_FORWARD);
  return s;
}

Spectrum ifft2(const Spectrum& spectrum) {
  Spectrum s = spectrum;
  transform(s, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(s.size());
  for (auto& v : s) v *= scale;
  return s;
}

}  // namespace speckle::detail
