#include "salrefine/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace salrefine {

namespace {

// Corner-aligned source coordinate for destination index i.
inline double src_coord(int i, int src_n, int dst_n) {
  if (dst_n <= 1 || src_n <= 1) return 0.0;
  return static_cast<double>(i) * (src_n - 1) / (dst_n - 1);
}

struct Lerp {
  int lo;
  int hi;
  double t;
};

inline Lerp make_lerp(double s, int src_n) {
  int lo = static_cast<int>(std::floor(s));
  lo = std::clamp(lo, 0, src_n - 1);
  int hi = std::min(lo + 1, src_n - 1);
  return {lo, hi, s - lo};
}

}  // namespace

GrayMap resize_bilinear(const GrayMap& map, int new_w, int new_h) {
  if (new_w < 1 || new_h < 1)
    throw std::invalid_argument("resize_bilinear: target size must be >= 1");
  if (new_w == map.width && new_h == map.height) return map;

  GrayMap out(new_w, new_h);
  for (int y = 0; y < new_h; ++y) {
    const Lerp ly = make_lerp(src_coord(y, map.height, new_h), map.height);
    for (int x = 0; x < new_w; ++x) {
      const Lerp lx = make_lerp(src_coord(x, map.width, new_w), map.width);
      const double top =
          map.at(lx.lo, ly.lo) * (1.0 - lx.t) + map.at(lx.hi, ly.lo) * lx.t;
      const double bot =
          map.at(lx.lo, ly.hi) * (1.0 - lx.t) + map.at(lx.hi, ly.hi) * lx.t;
      out.at(x, y) = std::clamp(top * (1.0 - ly.t) + bot * ly.t, 0.0, 1.0);
    }
  }
  return out;
}

RawMap resize_bilinear(const RawMap& map, int new_w, int new_h) {
  if (new_w < 1 || new_h < 1)
    throw std::invalid_argument("resize_bilinear: target size must be >= 1");
  if (new_w == map.width && new_h == map.height) return map;

  RawMap out(new_w, new_h);
  for (int y = 0; y < new_h; ++y) {
    const Lerp ly = make_lerp(src_coord(y, map.height, new_h), map.height);
    for (int x = 0; x < new_w; ++x) {
      const Lerp lx = make_lerp(src_coord(x, map.width, new_w), map.width);
      const double top =
          map.at(lx.lo, ly.lo) * (1.0 - lx.t) + map.at(lx.hi, ly.lo) * lx.t;
      const double bot =
          map.at(lx.lo, ly.hi) * (1.0 - lx.t) + map.at(lx.hi, ly.hi) * lx.t;
      out.at(x, y) = top * (1.0 - ly.t) + bot * ly.t;
    }
  }
  return out;
}

ImageRGB resize_bilinear(const ImageRGB& image, int new_w, int new_h) {
  if (new_w < 1 || new_h < 1)
    throw std::invalid_argument("resize_bilinear: target size must be >= 1");
  if (new_w == image.width && new_h == image.height) return image;

  ImageRGB out(new_w, new_h);
  for (int y = 0; y < new_h; ++y) {
    const Lerp ly = make_lerp(src_coord(y, image.height, new_h), image.height);
    for (int x = 0; x < new_w; ++x) {
      const Lerp lx = make_lerp(src_coord(x, image.width, new_w), image.width);
      for (int c = 0; c < 3; ++c) {
        const double top = image.at(lx.lo, ly.lo, c) * (1.0 - lx.t) +
                           image.at(lx.hi, ly.lo, c) * lx.t;
        const double bot = image.at(lx.lo, ly.hi, c) * (1.0 - lx.t) +
                           image.at(lx.hi, ly.hi, c) * lx.t;
        out.at(x, y, c) = std::clamp(top * (1.0 - ly.t) + bot * ly.t, 0.0, 1.0);
      }
    }
  }
  return out;
}

GrayMap normalize_unit(const RawMap& raw) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : raw.data) {
    if (!std::isfinite(v))
      throw std::invalid_argument("normalize_unit: non-finite input value");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  GrayMap out(raw.width, raw.height);
  if (hi <= lo) return out;  // flat activation maps to all zeros
  const double range = hi - lo;
  // Division keeps the extremes exact: (hi-lo)/(hi-lo) is 1.0 in IEEE.
  for (size_t i = 0; i < raw.data.size(); ++i)
    out.data[i] = std::clamp((raw.data[i] - lo) / range, 0.0, 1.0);
  return out;
}

}  // namespace salrefine
