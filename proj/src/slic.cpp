#include "salrefine/slic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace salrefine {

namespace {

double srgb_linearize(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double kCut = 216.0 / 24389.0;  // (6/29)^3
  return t > kCut ? std::cbrt(t) : t * (841.0 / 108.0) + 4.0 / 29.0;
}

struct Center {
  double x, y;
  double lab[3];
};

struct Component {
  int label = 0;
  int first_pixel = 0;  // row-major discovery index
  std::vector<int> pixels;
};

}  // namespace

std::array<double, 3> lab_from_srgb(double r, double g, double b) {
  const double rl = srgb_linearize(r);
  const double gl = srgb_linearize(g);
  const double bl = srgb_linearize(b);

  const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
  const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;

  const double fx = lab_f(x / 0.95047);
  const double fy = lab_f(y / 1.0);
  const double fz = lab_f(z / 1.08883);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

SuperpixelLabeling slic_segment(const ImageRGB& image, int target_count,
                                double compactness, int max_iters) {
  const int w = image.width;
  const int h = image.height;
  const long long pixel_count = static_cast<long long>(w) * h;
  if (target_count < 1 || target_count > pixel_count)
    throw std::invalid_argument(
        "slic_segment: target_count must be in [1, width*height]");

  std::vector<std::array<double, 3>> lab(pixel_count);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      lab[static_cast<size_t>(y) * w + x] =
          lab_from_srgb(image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2));

  auto lab_dist2 = [&](const std::array<double, 3>& a, const double b[3]) {
    const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
    return d0 * d0 + d1 * d1 + d2 * d2;
  };

  // Color gradient magnitude used for seed perturbation.
  auto gradient = [&](int x, int y) {
    const int xl = std::max(0, x - 1), xr = std::min(w - 1, x + 1);
    const int yu = std::max(0, y - 1), yd = std::min(h - 1, y + 1);
    const auto& right = lab[static_cast<size_t>(y) * w + xr];
    const auto& left = lab[static_cast<size_t>(y) * w + xl];
    const auto& down = lab[static_cast<size_t>(yd) * w + x];
    const auto& up = lab[static_cast<size_t>(yu) * w + x];
    double g = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double dx = right[c] - left[c];
      const double dy = down[c] - up[c];
      g += dx * dx + dy * dy;
    }
    return g;
  };

  // Grid seeds in continuous pixel-center coordinates.
  const double step =
      std::sqrt(static_cast<double>(pixel_count) / target_count);
  const int nx = std::clamp(
      static_cast<int>(std::ceil(
          std::sqrt(static_cast<double>(target_count) * w / h))),
      1, w);
  const int ny = std::clamp(
      static_cast<int>(std::lround(static_cast<double>(target_count) / nx)), 1,
      h);

  std::vector<Center> centers;
  centers.reserve(static_cast<size_t>(nx) * ny);
  for (int gy = 0; gy < ny; ++gy) {
    for (int gx = 0; gx < nx; ++gx) {
      Center c;
      c.x = (gx + 0.5) * static_cast<double>(w) / nx - 0.5;
      c.y = (gy + 0.5) * static_cast<double>(h) / ny - 0.5;
      int px = std::clamp(static_cast<int>(std::lround(c.x)), 0, w - 1);
      int py = std::clamp(static_cast<int>(std::lround(c.y)), 0, h - 1);

      // Move to the lowest-gradient pixel in the 3x3 neighborhood; ties keep
      // the grid position (and its fractional coordinates).
      int best_x = px, best_y = py;
      double best_g = gradient(px, py);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int qx = px + dx, qy = py + dy;
          if (qx < 0 || qx >= w || qy < 0 || qy >= h) continue;
          const double g = gradient(qx, qy);
          if (g < best_g) {
            best_g = g;
            best_x = qx;
            best_y = qy;
          }
        }
      }
      if (best_x != px || best_y != py) {
        c.x = best_x;
        c.y = best_y;
      }
      const auto& seed_lab =
          lab[static_cast<size_t>(std::clamp(
                  static_cast<int>(std::lround(c.y)), 0, h - 1)) * w +
              std::clamp(static_cast<int>(std::lround(c.x)), 0, w - 1)];
      c.lab[0] = seed_lab[0];
      c.lab[1] = seed_lab[1];
      c.lab[2] = seed_lab[2];
      centers.push_back(c);
    }
  }
  const int k_n = static_cast<int>(centers.size());
  const double spatial_scale = compactness / step;

  std::vector<int> labels(pixel_count, -1);
  std::vector<double> best_dist(pixel_count);

  for (int iter = 0; iter < max_iters; ++iter) {
    std::fill(labels.begin(), labels.end(), -1);
    std::fill(best_dist.begin(), best_dist.end(),
              std::numeric_limits<double>::infinity());

    for (int c = 0; c < k_n; ++c) {
      const Center& ctr = centers[c];
      const int x0 = std::max(0, static_cast<int>(std::ceil(ctr.x - step)));
      const int x1 = std::min(w - 1, static_cast<int>(std::floor(ctr.x + step)));
      const int y0 = std::max(0, static_cast<int>(std::ceil(ctr.y - step)));
      const int y1 = std::min(h - 1, static_cast<int>(std::floor(ctr.y + step)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const size_t p = static_cast<size_t>(y) * w + x;
          const double dx = x - ctr.x, dy = y - ctr.y;
          const double d = std::sqrt(lab_dist2(lab[p], ctr.lab)) +
                           spatial_scale * std::sqrt(dx * dx + dy * dy);
          if (d < best_dist[p]) {  // strict: ties keep the lower index
            best_dist[p] = d;
            labels[p] = c;
          }
        }
      }
    }

    // Pixels outside every window fall back to a full scan.
    for (size_t p = 0; p < labels.size(); ++p) {
      if (labels[p] >= 0) continue;
      const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      for (int c = 0; c < k_n; ++c) {
        const double dx = x - centers[c].x, dy = y - centers[c].y;
        const double d = std::sqrt(lab_dist2(lab[p], centers[c].lab)) +
                         spatial_scale * std::sqrt(dx * dx + dy * dy);
        if (d < best_dist[p]) {
          best_dist[p] = d;
          labels[p] = c;
        }
      }
    }

    // Recenter on cluster means; empty clusters keep their position.
    std::vector<double> sx(k_n, 0.0), sy(k_n, 0.0), sl(k_n, 0.0),
        sa(k_n, 0.0), sb(k_n, 0.0);
    std::vector<long long> n(k_n, 0);
    for (size_t p = 0; p < labels.size(); ++p) {
      const int c = labels[p];
      sx[c] += static_cast<double>(p % w);
      sy[c] += static_cast<double>(p / w);
      sl[c] += lab[p][0];
      sa[c] += lab[p][1];
      sb[c] += lab[p][2];
      ++n[c];
    }
    for (int c = 0; c < k_n; ++c) {
      if (n[c] == 0) continue;
      const double inv = 1.0 / static_cast<double>(n[c]);
      centers[c] = {sx[c] * inv, sy[c] * inv,
                    {sl[c] * inv, sa[c] * inv, sb[c] * inv}};
    }
  }

  // Connectivity pass: flood-fill components per label, keep the largest
  // component of each label, merge the rest into the largest adjacent region.
  std::vector<int> comp_of(pixel_count, -1);
  std::vector<Component> comps;
  std::vector<int> stack;
  for (size_t p = 0; p < labels.size(); ++p) {
    if (comp_of[p] >= 0) continue;
    const int id = static_cast<int>(comps.size());
    Component comp;
    comp.label = labels[p];
    comp.first_pixel = static_cast<int>(p);
    stack.assign(1, static_cast<int>(p));
    comp_of[p] = id;
    while (!stack.empty()) {
      const int q = stack.back();
      stack.pop_back();
      comp.pixels.push_back(q);
      const int x = q % w, y = q / w;
      const int neigh[4] = {x > 0 ? q - 1 : -1, x + 1 < w ? q + 1 : -1,
                            y > 0 ? q - w : -1, y + 1 < h ? q + w : -1};
      for (int r : neigh) {
        if (r < 0 || comp_of[r] >= 0 || labels[r] != comp.label) continue;
        comp_of[r] = id;
        stack.push_back(r);
      }
    }
    comps.push_back(std::move(comp));
  }

  std::vector<int> keeper_of_label(k_n, -1);
  for (int id = 0; id < static_cast<int>(comps.size()); ++id) {
    int& keeper = keeper_of_label[comps[id].label];
    if (keeper < 0 || comps[id].pixels.size() > comps[keeper].pixels.size())
      keeper = id;  // earlier discovery wins ties
  }

  // region[p]: final label, -1 while the pixel sits in an unmerged orphan.
  std::vector<int> region(pixel_count, -1);
  std::vector<long long> region_size(k_n, 0);
  std::vector<int> orphans;
  for (int id = 0; id < static_cast<int>(comps.size()); ++id) {
    const Component& comp = comps[id];
    if (keeper_of_label[comp.label] == id) {
      for (int p : comp.pixels) region[p] = comp.label;
      region_size[comp.label] += static_cast<long long>(comp.pixels.size());
    } else {
      orphans.push_back(id);
    }
  }
  std::sort(orphans.begin(), orphans.end(), [&](int a, int b) {
    return comps[a].first_pixel < comps[b].first_pixel;
  });

  while (!orphans.empty()) {
    std::vector<int> deferred;
    bool progressed = false;
    for (int id : orphans) {
      const Component& comp = comps[id];
      int best_label = -1;
      long long best_size = -1;
      for (int p : comp.pixels) {
        const int x = p % w, y = p / w;
        const int neigh[4] = {x > 0 ? p - 1 : -1, x + 1 < w ? p + 1 : -1,
                              y > 0 ? p - w : -1, y + 1 < h ? p + w : -1};
        for (int r : neigh) {
          if (r < 0 || region[r] < 0) continue;
          const int lbl = region[r];
          if (region_size[lbl] > best_size ||
              (region_size[lbl] == best_size && lbl < best_label)) {
            best_size = region_size[lbl];
            best_label = lbl;
          }
        }
      }
      if (best_label < 0) {
        deferred.push_back(id);
        continue;
      }
      for (int p : comp.pixels) region[p] = best_label;
      region_size[best_label] += static_cast<long long>(comp.pixels.size());
      progressed = true;
    }
    if (!progressed)
      throw std::logic_error("slic_segment: connectivity merge stalled");
    orphans = std::move(deferred);
  }

  // Compact the surviving labels to [0, count).
  std::vector<int> dense(k_n, -1);
  int count = 0;
  for (int c = 0; c < k_n; ++c)
    if (region_size[c] > 0) dense[c] = count++;

  SuperpixelLabeling out;
  out.width = w;
  out.height = h;
  out.count = count;
  out.labels.resize(pixel_count);
  for (size_t p = 0; p < out.labels.size(); ++p)
    out.labels[p] = dense[region[p]];
  return out;
}

SuperpixelFeatures superpixel_features(const ImageRGB& image,
                                       const SuperpixelLabeling& labeling) {
  if (labeling.width != image.width || labeling.height != image.height)
    throw std::invalid_argument(
        "superpixel_features: labeling/image dimension mismatch");

  const int n = labeling.count;
  std::vector<std::array<double, 5>> sums(n, {0, 0, 0, 0, 0});
  std::vector<long long> sizes(n, 0);

  for (int y = 0; y < labeling.height; ++y) {
    for (int x = 0; x < labeling.width; ++x) {
      const int lbl = labeling.at(x, y);
      if (lbl < 0 || lbl >= n)
        throw std::invalid_argument("superpixel_features: label out of range");
      const auto lab =
          lab_from_srgb(image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2));
      sums[lbl][0] += lab[0];
      sums[lbl][1] += lab[1];
      sums[lbl][2] += lab[2];
      sums[lbl][3] += x;
      sums[lbl][4] += y;
      ++sizes[lbl];
    }
  }

  SuperpixelFeatures feats;
  feats.count = n;
  feats.features.resize(n);
  for (int i = 0; i < n; ++i) {
    if (sizes[i] == 0)
      throw std::invalid_argument("superpixel_features: empty label " +
                                  std::to_string(i));
    const double inv = 1.0 / static_cast<double>(sizes[i]);
    feats.features[i] = {sums[i][0] * inv / 100.0, sums[i][1] * inv / 128.0,
                         sums[i][2] * inv / 128.0,
                         sums[i][3] * inv / labeling.width,
                         sums[i][4] * inv / labeling.height};
  }
  return feats;
}

std::set<std::pair<int, int>> adjacency_pairs(
    const SuperpixelLabeling& labeling) {
  std::set<std::pair<int, int>> pairs;
  const int w = labeling.width, h = labeling.height;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int a = labeling.at(x, y);
      if (x + 1 < w) {
        const int b = labeling.at(x + 1, y);
        if (a != b) pairs.emplace(std::min(a, b), std::max(a, b));
      }
      if (y + 1 < h) {
        const int b = labeling.at(x, y + 1);
        if (a != b) pairs.emplace(std::min(a, b), std::max(a, b));
      }
    }
  }
  return pairs;
}

}  // namespace salrefine
