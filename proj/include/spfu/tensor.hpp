#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spfu {

// Error hierarchy. Every failure raised by the library derives from spfu::Error
// so callers can catch one type; the subclasses name the distinct failure kinds.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidShape : public Error {
 public:
  using Error::Error;
};
class InvalidParameter : public Error {
 public:
  using Error::Error;
};
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};
class InvalidPlan : public Error {
 public:
  using Error::Error;
};
class DegenerateInput : public Error {
 public:
  using Error::Error;
};
class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

/// Extent of a video latent in (channels, frames, height, width) order.
struct Shape {
  std::size_t channels = 0;
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  constexpr std::size_t size() const { return channels * frames * height * width; }
  constexpr std::size_t frame_size() const { return height * width; }
  constexpr std::size_t grid_size() const { return frames * height * width; }
  constexpr bool valid() const { return channels > 0 && frames > 0 && height > 0 && width > 0; }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.channels) + "," + std::to_string(s.frames) + "," +
         std::to_string(s.height) + "," + std::to_string(s.width) + ")";
}

inline void require_valid(const Shape& s) {
  if (!s.valid()) throw InvalidShape("invalid shape " + to_string(s) + ": every axis must be >= 1");
}

/// The (frames, height, width) frequency grid that masks live on.
struct GridShape {
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  constexpr std::size_t size() const { return frames * height * width; }
  friend constexpr bool operator==(const GridShape&, const GridShape&) = default;
};

constexpr GridShape grid_of(const Shape& s) { return {s.frames, s.height, s.width}; }

/// Real-valued (C, T, H, W) tensor, row-major with W fastest, 32-bit storage.
class VideoLatent {
 public:
  VideoLatent() = default;

  explicit VideoLatent(Shape shape) : shape_(shape) {
    require_valid(shape_);
    data_.assign(shape_.size(), 0.0f);
  }

  VideoLatent(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
    require_valid(shape_);
    if (data_.size() != shape_.size())
      throw ShapeMismatch("data length " + std::to_string(data_.size()) + " does not match shape " +
                          to_string(shape_));
    for (float v : data_)
      if (!std::isfinite(v)) throw NonFiniteValue("latent contains a non-finite value");
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t c, std::size_t t, std::size_t h, std::size_t w) const {
    return ((c * shape_.frames + t) * shape_.height + h) * shape_.width + w;
  }

  float operator()(std::size_t c, std::size_t t, std::size_t h, std::size_t w) const {
    return data_[index(c, t, h, w)];
  }
  float& operator()(std::size_t c, std::size_t t, std::size_t h, std::size_t w) {
    return data_[index(c, t, h, w)];
  }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  friend bool operator==(const VideoLatent&, const VideoLatent&) = default;

 private:
  Shape shape_{};
  std::vector<float> data_;
};

/// Complex (C, T, H, W) tensor holding the transform of a VideoLatent.
class SpectralTensor {
 public:
  using value_type = std::complex<double>;

  SpectralTensor() = default;
  explicit SpectralTensor(Shape shape) : shape_(shape), data_(shape.size()) { require_valid(shape_); }
  SpectralTensor(Shape shape, std::vector<value_type> data) : shape_(shape), data_(std::move(data)) {
    require_valid(shape_);
    if (data_.size() != shape_.size()) throw ShapeMismatch("spectral data length does not match shape");
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t c, std::size_t t, std::size_t h, std::size_t w) const {
    return ((c * shape_.frames + t) * shape_.height + h) * shape_.width + w;
  }
  value_type operator()(std::size_t c, std::size_t t, std::size_t h, std::size_t w) const {
    return data_[index(c, t, h, w)];
  }
  value_type& operator()(std::size_t c, std::size_t t, std::size_t h, std::size_t w) {
    return data_[index(c, t, h, w)];
  }

  std::span<const value_type> data() const { return data_; }
  std::span<value_type> data() { return data_; }

  friend bool operator==(const SpectralTensor&, const SpectralTensor&) = default;

 private:
  Shape shape_{};
  std::vector<value_type> data_;
};

inline double max_abs_diff(const VideoLatent& a, const VideoLatent& b) {
  if (a.shape() != b.shape()) throw ShapeMismatch("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
  return m;
}

inline double energy(const VideoLatent& x) {
  double e = 0.0;
  for (float v : x.data()) e += static_cast<double>(v) * v;
  return e;
}

inline double energy(const SpectralTensor& x) {
  double e = 0.0;
  for (const auto& v : x.data()) e += std::norm(v);
  return e;
}

}  // namespace spfu
