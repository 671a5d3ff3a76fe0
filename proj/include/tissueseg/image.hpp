#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tissueseg {

enum class ErrorKind {
  InvalidParam,
  Degenerate,
  DimensionMismatch,
  IOFailure,
  DuplicateStem,
  ParseError,
  TooFewItems,
  EmptyInput,
  Validation,
  VersionConflict,
  NotFound,
  PortInUse,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParam: return "InvalidParam";
    case ErrorKind::Degenerate: return "Degenerate";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::IOFailure: return "IOFailure";
    case ErrorKind::DuplicateStem: return "DuplicateStem";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::TooFewItems: return "TooFewItems";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::Validation: return "Validation";
    case ErrorKind::VersionConflict: return "VersionConflict";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::PortInUse: return "PortInUse";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct GrayTag {};
struct MaskTag {};

/**
 * Row-major raster with interleaved channels.
 *
 * Pixel (x, y) channel c lives at ((y * width) + x) * Channels + c. Images are
 * plain values: copying copies the buffer, and every library operation
 * returns a fresh image instead of mutating its input.
 */
template <typename T, int Channels, typename Tag = GrayTag>
class Raster {
 public:
  using value_type = T;
  static constexpr int channels = Channels;

  Raster() = default;

  Raster(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw Error(ErrorKind::InvalidParam,
                  "raster dimensions must be >= 1, got " + std::to_string(width) + "x" +
                      std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * height * Channels, fill);
  }

  Raster(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1) {
      throw Error(ErrorKind::InvalidParam, "raster dimensions must be >= 1");
    }
    if (data_.size() != static_cast<std::size_t>(width) * height * Channels) {
      throw Error(ErrorKind::InvalidParam, "pixel buffer length does not match dimensions");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }
  bool empty() const noexcept { return data_.empty(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  T& at(int x, int y, int c = 0) noexcept { return data_[index(x, y) * Channels + c]; }
  const T& at(int x, int y, int c = 0) const noexcept {
    return data_[index(x, y) * Channels + c];
  }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  bool same_size(int w, int h) const noexcept { return width_ == w && height_ == h; }
  template <typename U, int C, typename G>
  bool same_size(const Raster<U, C, G>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Raster& a, const Raster& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using RgbImage = Raster<std::uint8_t, 3>;
using GrayImage = Raster<std::uint8_t, 1>;
/// L in [0, 100]; a and b signed.
using LabImage = Raster<double, 3>;
/// Values are exactly 0 (background) or 1 (tissue).
using BinaryMask = Raster<std::uint8_t, 1, MaskTag>;

template <typename A, typename B>
void require_same_size(const A& a, const B& b, const char* what) {
  if (!a.same_size(b)) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(what) + ": " + std::to_string(a.width()) + "x" +
                    std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                    std::to_string(b.height()));
  }
}

inline std::size_t count_foreground(const BinaryMask& mask) {
  std::size_t n = 0;
  for (auto v : mask.data()) n += v;
  return n;
}

inline bool is_binary(const BinaryMask& mask) {
  for (auto v : mask.data()) {
    if (v > 1) return false;
  }
  return true;
}

}  // namespace tissueseg
