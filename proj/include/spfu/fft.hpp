#pragma once

#include <fftw3.h>

#include <array>
#include <cmath>
#include <complex>
#include <cstring>
#include <memory>
#include <mutex>

#include "spfu/tensor.hpp"

namespace spfu {

/// Which axes a transform runs over. Channels are never transformed.
enum class TransformAxes {
  spatiotemporal,  // (T, H, W)
  spatial,         // (H, W), frames left in place
};

namespace detail {

// The FFTW planner is not thread-safe; execution of distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

struct PlanDeleter {
  void operator()(fftw_plan p) const {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};
using PlanHandle = std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDeleter>;

// In-place orthonormal DFT of a full (C, T, H, W) complex array over the
// requested axes. sign = FFTW_FORWARD or FFTW_BACKWARD.
inline void transform(std::complex<double>* data, const Shape& s, TransformAxes axes, int sign) {
  const std::size_t n = s.size();
  FftwBuffer buf(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
  if (!buf) throw std::bad_alloc();

  int rank = 0;
  std::array<int, 3> dims{};
  int howmany = 0;
  if (axes == TransformAxes::spatiotemporal) {
    rank = 3;
    dims = {static_cast<int>(s.frames), static_cast<int>(s.height), static_cast<int>(s.width)};
    howmany = static_cast<int>(s.channels);
  } else {
    rank = 2;
    dims = {static_cast<int>(s.height), static_cast<int>(s.width), 0};
    howmany = static_cast<int>(s.channels * s.frames);
  }
  int dist = 1;
  for (int i = 0; i < rank; ++i) dist *= dims[i];

  PlanHandle plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan.reset(fftw_plan_many_dft(rank, dims.data(), howmany, buf.get(), nullptr, 1, dist, buf.get(), nullptr,
                                  1, dist, sign, FFTW_ESTIMATE));
  }
  if (!plan) throw Error("FFTW failed to create a plan");

  std::memcpy(buf.get(), data, sizeof(fftw_complex) * n);
  fftw_execute(plan.get());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dist));
  for (std::size_t i = 0; i < n; ++i)
    data[i] = std::complex<double>(buf[i][0] * scale, buf[i][1] * scale);
}

}  // namespace detail

/// Orthonormal forward transform (1/sqrt(N) per axis), so sum |x|^2 = sum |X|^2.
inline SpectralTensor fft3(const VideoLatent& x, TransformAxes axes = TransformAxes::spatiotemporal) {
  SpectralTensor out(x.shape());
  auto dst = out.data();
  auto src = x.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = static_cast<double>(src[i]);
  detail::transform(dst.data(), x.shape(), axes, FFTW_FORWARD);
  return out;
}

/// Inverse transform keeping the complex result.
inline SpectralTensor ifft3_complex(const SpectralTensor& X,
                                    TransformAxes axes = TransformAxes::spatiotemporal) {
  SpectralTensor out = X;
  detail::transform(out.data().data(), X.shape(), axes, FFTW_BACKWARD);
  return out;
}

/// Largest |imag| in a complex tensor.
inline double max_imag(const SpectralTensor& z) {
  double m = 0.0;
  for (const auto& v : z.data()) m = std::max(m, std::abs(v.imag()));
  return m;
}

/// Inverse transform back to a real latent; the imaginary part is dropped.
inline VideoLatent ifft3(const SpectralTensor& X, TransformAxes axes = TransformAxes::spatiotemporal) {
  const SpectralTensor z = ifft3_complex(X, axes);
  VideoLatent out(X.shape());
  auto dst = out.data();
  auto src = z.data();
  for (std::size_t i = 0; i < z.size(); ++i) dst[i] = static_cast<float>(src[i].real());
  return out;
}

}  // namespace spfu
