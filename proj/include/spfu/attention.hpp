#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "spfu/parallel.hpp"
#include "spfu/tensor.hpp"

namespace spfu {

/// Dense row-major float matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw ShapeMismatch("matrix data length does not match dimensions");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeMismatch("max_abs_diff: matrix shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
  return m;
}

/// Tokens of a (T, H, W) video: frame-major, then row-major spatial, with
/// H*W tokens per frame. features is n_tokens x d_model.
struct TokenSequence {
  Matrix features;
  std::vector<std::size_t> frame_index;
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t tokens_per_frame() const { return height * width; }
  std::size_t size() const { return features.rows(); }
  std::size_t d_model() const { return features.cols(); }
};

/// Frame id of each token for a sequence of frames x tokens_per_frame.
inline std::vector<std::size_t> frame_indices(std::size_t frames, std::size_t tokens_per_frame) {
  std::vector<std::size_t> out(frames * tokens_per_frame);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i / tokens_per_frame;
  return out;
}

inline TokenSequence make_tokens(Matrix features, std::size_t frames, std::size_t height, std::size_t width) {
  if (frames == 0 || height == 0 || width == 0) throw InvalidShape("token grid axes must be >= 1");
  if (features.rows() != frames * height * width)
    throw ShapeMismatch("token count " + std::to_string(features.rows()) + " does not match T*H*W");
  TokenSequence seq{std::move(features), frame_indices(frames, height * width), frames, height, width};
  return seq;
}

/// Checks the frame layout invariants: frame ids non-decreasing and each of
/// the T frames owning exactly H*W tokens.
inline void validate(const TokenSequence& s) {
  if (s.frames == 0 || s.tokens_per_frame() == 0) throw InvalidShape("token sequence has an empty axis");
  if (s.features.rows() != s.frame_index.size() || s.frame_index.size() != s.frames * s.tokens_per_frame())
    throw ShapeMismatch("token sequence size does not match its frame layout");
  for (std::size_t i = 0; i < s.frame_index.size(); ++i)
    if (s.frame_index[i] != i / s.tokens_per_frame())
      throw ShapeMismatch("frame_index must list each frame's H*W tokens contiguously in frame order");
}

/// Tokens <-> latent. d_model plays the role of channels.
inline TokenSequence tokens_from_latent(const VideoLatent& x) {
  const Shape& s = x.shape();
  Matrix f(s.grid_size(), s.channels);
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t t = 0; t < s.frames; ++t)
      for (std::size_t h = 0; h < s.height; ++h)
        for (std::size_t w = 0; w < s.width; ++w)
          f((t * s.height + h) * s.width + w, c) = x(c, t, h, w);
  return make_tokens(std::move(f), s.frames, s.height, s.width);
}

inline VideoLatent latent_from_features(const Matrix& f, std::size_t frames, std::size_t height, std::size_t width) {
  if (f.rows() != frames * height * width) throw ShapeMismatch("latent_from_features: token count mismatch");
  const Shape s{f.cols(), frames, height, width};
  VideoLatent x(s);
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t t = 0; t < s.frames; ++t)
      for (std::size_t h = 0; h < s.height; ++h)
        for (std::size_t w = 0; w < s.width; ++w) x(c, t, h, w) = f((t * s.height + h) * s.width + w, c);
  return x;
}

inline VideoLatent latent_from_tokens(const TokenSequence& s) {
  return latent_from_features(s.features, s.frames, s.height, s.width);
}

/// Row-wise linear map: out = x * w, accumulated in double.
inline Matrix matmul(const Matrix& x, const Matrix& w) {
  if (x.cols() != w.rows()) throw ShapeMismatch("matmul: inner dimensions differ");
  Matrix out(x.rows(), w.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols(); ++k) acc += static_cast<double>(x(i, k)) * w(k, j);
      out(i, j) = static_cast<float>(acc);
    }
  return out;
}

struct QkvWeights {
  Matrix query;
  Matrix key;
  Matrix value;

  static QkvWeights identity(std::size_t d) { return {Matrix::identity(d), Matrix::identity(d), Matrix::identity(d)}; }
};

struct Qkv {
  Matrix q;
  Matrix k;
  Matrix v;
};

inline Qkv project_qkv(const TokenSequence& tokens, const QkvWeights& w) {
  const std::size_t d = tokens.d_model();
  for (const Matrix* m : {&w.query, &w.key, &w.value})
    if (m->rows() != d || m->cols() != d)
      throw ShapeMismatch("projection weights must be d_model x d_model (" + std::to_string(d) + ")");
  return {matmul(tokens.features, w.query), matmul(tokens.features, w.key), matmul(tokens.features, w.value)};
}

enum class WindowKind { local, global };

/// Temporal attention window measured in frames.
///
/// A local window admits key frame j for query frame i iff
/// |i - j| < floor(span / 2). span = 1 would admit nothing under that rule, so
/// the query's own frame is always admitted. Any window spanning at least the
/// whole sequence (span >= T) is global and admits every frame.
struct AttentionWindow {
  std::size_t span_frames = 1;
  WindowKind kind = WindowKind::local;

  static AttentionWindow local(std::size_t span) {
    if (span == 0) throw InvalidParameter("attention window span must be >= 1");
    return {span, WindowKind::local};
  }
  static AttentionWindow global() { return {std::numeric_limits<std::size_t>::max(), WindowKind::global}; }

  bool is_global_for(std::size_t frames) const { return kind == WindowKind::global || span_frames >= frames; }

  bool admits(std::size_t query_frame, std::size_t key_frame, std::size_t frames) const {
    if (is_global_for(frames) || query_frame == key_frame) return true;
    const std::size_t dist = query_frame > key_frame ? query_frame - key_frame : key_frame - query_frame;
    return dist < span_frames / 2;
  }
};

/// Multiply-accumulate counts of one attention call.
struct AttentionStats {
  std::size_t score_macs = 0;  // q . k products
  std::size_t value_macs = 0;  // weight * v accumulations

  std::size_t total() const { return score_macs + value_macs; }
  AttentionStats& operator+=(const AttentionStats& o) {
    score_macs += o.score_macs;
    value_macs += o.value_macs;
    return *this;
  }
};

/// frame_admitted[i * T + j] says whether query frame i may attend key frame j.
using FrameAdmission = std::vector<char>;

inline std::size_t frame_count(std::span<const std::size_t> frame_index) {
  if (frame_index.empty()) throw InvalidShape("empty token sequence");
  for (std::size_t i = 1; i < frame_index.size(); ++i)
    if (frame_index[i] < frame_index[i - 1]) throw InvalidParameter("frame_index must be non-decreasing");
  return frame_index.back() + 1;
}

inline FrameAdmission window_admission(const AttentionWindow& window, std::size_t frames) {
  FrameAdmission adm(frames * frames);
  for (std::size_t i = 0; i < frames; ++i)
    for (std::size_t j = 0; j < frames; ++j) adm[i * frames + j] = window.admits(i, j, frames);
  return adm;
}

inline FrameAdmission keyframe_admission(std::span<const std::size_t> keyframes, std::size_t frames) {
  if (keyframes.empty()) throw InvalidParameter("keyframe set must be non-empty");
  FrameAdmission adm(frames * frames, 0);
  for (std::size_t j : keyframes) {
    if (j >= frames) throw InvalidParameter("keyframe " + std::to_string(j) + " out of range");
    for (std::size_t i = 0; i < frames; ++i) adm[i * frames + j] = 1;
  }
  return adm;
}

namespace detail {

inline void check_qkv(const Matrix& q, const Matrix& k, const Matrix& v, std::span<const std::size_t> frame_index) {
  if (q.rows() != k.rows() || k.rows() != v.rows()) throw ShapeMismatch("Q, K, V row counts differ");
  if (q.cols() != k.cols()) throw ShapeMismatch("Q and K widths differ");
  if (frame_index.size() != q.rows()) throw ShapeMismatch("frame_index length does not match token count");
  if (q.cols() == 0) throw InvalidShape("attention needs d >= 1");
}

// Admitted key token indices per query frame, in increasing order.
inline std::vector<std::vector<std::size_t>> admitted_keys(const FrameAdmission& adm,
                                                           std::span<const std::size_t> frame_index,
                                                           std::size_t frames) {
  std::vector<std::vector<std::size_t>> keys(frames);
  for (std::size_t i = 0; i < frames; ++i)
    for (std::size_t j = 0; j < frame_index.size(); ++j)
      if (adm[i * frames + frame_index[j]]) keys[i].push_back(j);
  return keys;
}

// Softmax(q k^T / sqrt(d)) over the admitted keys of one query row, written to
// weights (same length as keys). Max-subtracted, 64-bit accumulation.
inline void row_softmax(const Matrix& q, const Matrix& k, std::size_t row, std::span<const std::size_t> keys,
                        std::vector<double>& weights) {
  const std::size_t d = q.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const auto qi = q.row(row);
  weights.resize(keys.size());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < keys.size(); ++n) {
    const auto kj = k.row(keys[n]);
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += static_cast<double>(qi[c]) * kj[c];
    weights[n] = s * scale;
    max_logit = std::max(max_logit, weights[n]);
  }
  double sum = 0.0;
  for (double& w : weights) {
    w = std::exp(w - max_logit);
    sum += w;
  }
  for (double& w : weights) w /= sum;
}

}  // namespace detail

/// Attention restricted by a frame-level admission table. Masked keys are
/// excluded before the softmax, so they receive exactly zero weight and cost
/// no multiply-accumulates.
inline Matrix admitted_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                 std::span<const std::size_t> frame_index, const FrameAdmission& adm,
                                 AttentionStats* stats = nullptr) {
  detail::check_qkv(q, k, v, frame_index);
  const std::size_t frames = frame_count(frame_index);
  if (adm.size() != frames * frames) throw ShapeMismatch("admission table does not match frame count");
  const auto keys = detail::admitted_keys(adm, frame_index, frames);
  for (std::size_t f = 0; f < frames; ++f)
    if (keys[f].empty()) throw InvalidParameter("query frame " + std::to_string(f) + " admits no keys");

  const std::size_t n = q.rows();
  const std::size_t dv = v.cols();
  Matrix out(n, dv);
  parallel_for(n, [&](std::size_t i) {
    const auto& ks = keys[frame_index[i]];
    std::vector<double> weights;
    detail::row_softmax(q, k, i, ks, weights);
    std::vector<double> acc(dv, 0.0);
    for (std::size_t m = 0; m < ks.size(); ++m) {
      const auto vj = v.row(ks[m]);
      for (std::size_t c = 0; c < dv; ++c) acc[c] += weights[m] * vj[c];
    }
    auto orow = out.row(i);
    for (std::size_t c = 0; c < dv; ++c) orow[c] = static_cast<float>(acc[c]);
  });
  if (stats != nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t nk = keys[frame_index[i]].size();
      stats->score_macs += nk * q.cols();
      stats->value_macs += nk * dv;
    }
  }
  return out;
}

inline Matrix global_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                               std::span<const std::size_t> frame_index, AttentionStats* stats = nullptr) {
  const std::size_t frames = frame_count(frame_index);
  return admitted_attention(q, k, v, frame_index, window_admission(AttentionWindow::global(), frames), stats);
}

/// Windowed attention: query frame i sees key frames j with |i - j| < floor(span/2).
inline Matrix masked_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                               std::span<const std::size_t> frame_index, const AttentionWindow& window,
                               AttentionStats* stats = nullptr) {
  const std::size_t frames = frame_count(frame_index);
  return admitted_attention(q, k, v, frame_index, window_admission(window, frames), stats);
}

/// Attention whose keys are limited to the tokens of the given key frames.
inline Matrix sparse_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                               std::span<const std::size_t> frame_index, std::span<const std::size_t> keyframes,
                               AttentionStats* stats = nullptr) {
  const std::size_t frames = frame_count(frame_index);
  return admitted_attention(q, k, v, frame_index, keyframe_admission(keyframes, frames), stats);
}

/// Full n x n token-level attention weights under an admission table.
inline Matrix attention_weights(const Matrix& q, const Matrix& k, std::span<const std::size_t> frame_index,
                                const FrameAdmission& adm) {
  if (q.rows() != k.rows() || q.cols() != k.cols()) throw ShapeMismatch("Q and K shapes differ");
  if (frame_index.size() != q.rows()) throw ShapeMismatch("frame_index length does not match token count");
  const std::size_t frames = frame_count(frame_index);
  const auto keys = detail::admitted_keys(adm, frame_index, frames);
  const std::size_t n = q.rows();
  Matrix out(n, n);
  parallel_for(n, [&](std::size_t i) {
    const auto& ks = keys[frame_index[i]];
    std::vector<double> weights;
    detail::row_softmax(q, k, i, ks, weights);
    for (std::size_t m = 0; m < ks.size(); ++m) out(i, ks[m]) = static_cast<float>(weights[m]);
  });
  return out;
}

/// ceil(fraction * T) evenly spaced frames, index_i = ceil(i * T / m), always
/// starting at frame 0.
inline std::vector<std::size_t> uniform_keyframes(std::size_t frames, double fraction) {
  if (frames == 0) throw InvalidParameter("uniform_keyframes: T must be >= 1");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidParameter("uniform_keyframes: fraction must lie in (0, 1]");
  // Guard against products like 0.3 * 10 = 3.0000000000000004.
  auto m = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(frames) - 1e-9));
  m = std::clamp<std::size_t>(m, 1, frames);
  std::vector<std::size_t> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = (i * frames + m - 1) / m;
  return out;
}

}  // namespace spfu
