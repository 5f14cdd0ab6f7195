#pragma once

#include <cstdint>
#include <vector>

#include "salrefine/image.hpp"

namespace salrefine {

/// One generated subitizing sample: blobs on a plain background, the blob
/// union as ground truth, and the blob count as label.
struct ToySample {
  ImageRGB image;
  BinaryMask mask;
  int label = 0;  // number of blobs, 0..4
};

/// Deterministic count-k image: k non-overlapping disks on a plain
/// background, colors mildly jittered per draw.
ToySample make_blob_sample(uint64_t seed, int count, int size = 64);

/// Balanced dataset covering counts 0..4, per_class samples each, ordered by
/// (count, instance index).
std::vector<ToySample> make_toy_dataset(uint64_t seed, int per_class,
                                        int size = 64);

/// Separable mean filter with clamped borders; values stay in [0,1].
GrayMap box_blur(const GrayMap& map, int radius);

GrayMap mask_to_graymap(const BinaryMask& mask);

}  // namespace salrefine
