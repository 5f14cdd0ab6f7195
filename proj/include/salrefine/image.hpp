#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace salrefine {

/// Dense RGB image, row-major H x W x 3, intensities in [0,1].
struct ImageRGB {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // index: (y * width + x) * 3 + c

  ImageRGB() = default;
  ImageRGB(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<size_t>(w) * h * 3, fill) {}

  double& at(int x, int y, int c) {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  double at(int x, int y, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

/// Single-channel map, row-major H x W, values in [0,1].
struct GrayMap {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // index: y * width + x

  GrayMap() = default;
  GrayMap(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  double at(int x, int y) const {
    return data[static_cast<size_t>(y) * width + x];
  }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

/// Unconstrained single-channel array; intermediate activations before
/// normalization to a GrayMap.
struct RawMap {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  RawMap() = default;
  RawMap(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  double at(int x, int y) const {
    return data[static_cast<size_t>(y) * width + x];
  }
};

/// Per-pixel boolean ground-truth mask.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;  // 0 or 1

  BinaryMask() = default;
  BinaryMask(int w, int h, bool fill = false)
      : width(w), height(h),
        data(static_cast<size_t>(w) * h, fill ? 1 : 0) {}

  bool at(int x, int y) const {
    return data[static_cast<size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool v) {
    data[static_cast<size_t>(y) * width + x] = v ? 1 : 0;
  }
};

/// Stack of K feature maps of size rows x cols, channel-major then row-major.
struct FeatureStack {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // index: (k * rows + i) * cols + j

  FeatureStack() = default;
  FeatureStack(int k, int m, int h, double fill = 0.0)
      : channels(k), rows(m), cols(h),
        data(static_cast<size_t>(k) * m * h, fill) {}

  double& at(int k, int i, int j) {
    return data[(static_cast<size_t>(k) * rows + i) * cols + j];
  }
  double at(int k, int i, int j) const {
    return data[(static_cast<size_t>(k) * rows + i) * cols + j];
  }
};

/// Per-element gradients paired with a FeatureStack of identical shape.
using GradStack = FeatureStack;

/// Bilinear resize with corner-aligned sampling; endpoints map to endpoints
/// and an identity resize copies the input bitwise.
GrayMap resize_bilinear(const GrayMap& map, int new_w, int new_h);
ImageRGB resize_bilinear(const ImageRGB& image, int new_w, int new_h);
RawMap resize_bilinear(const RawMap& map, int new_w, int new_h);

/// Min-max rescale to [0,1]. A constant input maps to all zeros.
/// Throws std::invalid_argument on NaN/Inf input.
GrayMap normalize_unit(const RawMap& raw);

}  // namespace salrefine
