#pragma once

#include <array>
#include <set>
#include <utility>
#include <vector>

#include "salrefine/image.hpp"

namespace salrefine {

/// Per-pixel superpixel index map. Labels form a partition of the image into
/// 4-connected regions indexed [0, count).
struct SuperpixelLabeling {
  int width = 0;
  int height = 0;
  int count = 0;
  std::vector<int> labels;  // row-major H x W

  int at(int x, int y) const {
    return labels[static_cast<size_t>(y) * width + x];
  }
};

/// 5-D descriptor per superpixel: mean CIELAB (L/100, a/128, b/128) plus the
/// centroid at (mean x / W, mean y / H).
struct SuperpixelFeatures {
  int count = 0;
  std::vector<std::array<double, 5>> features;
};

/// sRGB (unit interval) to CIELAB under D65; L in [0,100], a/b unscaled.
std::array<double, 3> lab_from_srgb(double r, double g, double b);

/// SLIC superpixels: grid-seeded localized k-means over (Lab, position) with
/// distance d_lab + (compactness / S) * d_xy, followed by a connectivity pass
/// that merges orphan components into the largest adjacent superpixel.
/// Deterministic; ties go to the lowest center index.
SuperpixelLabeling slic_segment(const ImageRGB& image, int target_count = 200,
                                double compactness = 10.0, int max_iters = 10);

SuperpixelFeatures superpixel_features(const ImageRGB& image,
                                       const SuperpixelLabeling& labeling);

/// Unordered pairs (i < j) of superpixels sharing a 4-adjacent pixel border.
std::set<std::pair<int, int>> adjacency_pairs(
    const SuperpixelLabeling& labeling);

}  // namespace salrefine
