#include "salrefine/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "salrefine/rng.hpp"

namespace salrefine {

namespace {

struct Blob {
  int x, y, r;
};

}  // namespace

ToySample make_blob_sample(uint64_t seed, int count, int size) {
  if (count < 0 || count > 4)
    throw std::invalid_argument("blob count must be in [0,4]");
  if (size < 16) throw std::invalid_argument("image size must be >= 16");

  Rng rng(seed);
  ToySample sample;
  sample.label = count;
  sample.image = ImageRGB(size, size);
  sample.mask = BinaryMask(size, size);

  const double bg[3] = {0.12 + rng.uniform(-0.04, 0.04),
                        0.18 + rng.uniform(-0.04, 0.04),
                        0.30 + rng.uniform(-0.04, 0.04)};
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c) sample.image.at(x, y, c) = bg[c];

  const int radius = std::max(3, size * 3 / 32);
  std::vector<Blob> blobs;
  for (int b = 0; b < count; ++b) {
    // Deterministic rejection placement; shrink the separation requirement
    // if a crowded draw keeps failing.
    Blob blob{0, 0, radius};
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      blob.x = rng.range(radius + 1, size - radius - 2);
      blob.y = rng.range(radius + 1, size - radius - 2);
      const int sep = attempt < 100 ? 2 * radius + 2 : 2 * radius;
      placed = true;
      for (const Blob& other : blobs) {
        const int dx = blob.x - other.x, dy = blob.y - other.y;
        if (dx * dx + dy * dy < sep * sep) {
          placed = false;
          break;
        }
      }
    }
    if (!placed)
      throw std::runtime_error("could not place blobs; image too small");
    blobs.push_back(blob);

    const double fg[3] = {0.85 + rng.uniform(-0.08, 0.08),
                          0.25 + rng.uniform(-0.08, 0.08),
                          0.15 + rng.uniform(-0.08, 0.08)};
    for (int y = blob.y - radius; y <= blob.y + radius; ++y) {
      for (int x = blob.x - radius; x <= blob.x + radius; ++x) {
        const int dx = x - blob.x, dy = y - blob.y;
        if (dx * dx + dy * dy > radius * radius) continue;
        for (int c = 0; c < 3; ++c)
          sample.image.at(x, y, c) = std::clamp(fg[c], 0.0, 1.0);
        sample.mask.set(x, y, true);
      }
    }
  }
  return sample;
}

std::vector<ToySample> make_toy_dataset(uint64_t seed, int per_class,
                                        int size) {
  std::vector<ToySample> samples;
  samples.reserve(static_cast<size_t>(per_class) * 5);
  for (int count = 0; count <= 4; ++count)
    for (int i = 0; i < per_class; ++i)
      samples.push_back(make_blob_sample(
          seed * 1000003ull + static_cast<uint64_t>(count) * 1009ull + i,
          count, size));
  return samples;
}

GrayMap box_blur(const GrayMap& map, int radius) {
  if (radius < 0) throw std::invalid_argument("box_blur: negative radius");
  if (radius == 0) return map;

  const int w = map.width, h = map.height;
  GrayMap horiz(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      int n = 0;
      for (int dx = -radius; dx <= radius; ++dx) {
        const int sx = x + dx;
        if (sx < 0 || sx >= w) continue;
        sum += map.at(sx, y);
        ++n;
      }
      horiz.at(x, y) = sum / n;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      int n = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int sy = y + dy;
        if (sy < 0 || sy >= h) continue;
        sum += horiz.at(x, sy);
        ++n;
      }
      out.at(x, y) = sum / n;
    }
  }
  return out;
}

GrayMap mask_to_graymap(const BinaryMask& mask) {
  GrayMap map(mask.width, mask.height);
  for (size_t p = 0; p < mask.data.size(); ++p)
    map.data[p] = mask.data[p] ? 1.0 : 0.0;
  return map;
}

}  // namespace salrefine
