#include "salrefine/refine.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace salrefine {

RefineSystem build_system(const SuperpixelFeatures& feats,
                          const std::set<std::pair<int, int>>& pairs,
                          const GrayMap& coarse,
                          const SuperpixelLabeling& labeling,
                          double seed_hi, double seed_lo, double theta1,
                          double theta2) {
  const int n = feats.count;
  if (n != labeling.count)
    throw std::invalid_argument("build_system: feature/labeling count mismatch");
  if (coarse.width != labeling.width || coarse.height != labeling.height)
    throw std::invalid_argument("build_system: coarse map dimension mismatch");

  // Mean coarse saliency per superpixel.
  std::vector<double> mean_sal(n, 0.0);
  std::vector<long long> sizes(n, 0);
  for (int y = 0; y < labeling.height; ++y) {
    for (int x = 0; x < labeling.width; ++x) {
      const int lbl = labeling.at(x, y);
      mean_sal[lbl] += coarse.at(x, y);
      ++sizes[lbl];
    }
  }
  for (int i = 0; i < n; ++i) mean_sal[i] /= static_cast<double>(sizes[i]);

  RefineSystem sys;
  sys.count = n;
  sys.theta1 = theta1;
  sys.theta2 = theta2;

  sys.gram.resize(n, n);
  for (int i = 0; i < n; ++i) {
    sys.gram(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (int f = 0; f < 5; ++f) {
        const double d = feats.features[i][f] - feats.features[j][f];
        d2 += d * d;
      }
      const double k = std::exp(-0.5 * d2);
      sys.gram(i, j) = k;
      sys.gram(j, i) = k;
    }
  }

  sys.adj = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= n || j >= n || i == j)
      throw std::invalid_argument("build_system: invalid adjacency pair");
    sys.adj(i, j) = sys.gram(i, j);
    sys.adj(j, i) = sys.gram(j, i);
  }
  sys.degree = sys.adj.rowwise().sum();
  sys.laplacian = Eigen::MatrixXd(sys.degree.asDiagonal()) - sys.adj;

  sys.seeded.assign(n, 0);
  sys.targets = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (mean_sal[i] >= seed_hi) {
      sys.seeded[i] = 1;
      sys.targets(i) = 1.0;
    } else if (mean_sal[i] <= seed_lo) {
      sys.seeded[i] = 1;
      sys.targets(i) = 0.0;
    }
  }
  sys.seed_count = 0;
  for (int s : sys.seeded) sys.seed_count += s;

  if (sys.seed_count == 0) {
    // Degenerate coarse map: anchor on the extremes instead.
    int top = 0, bottom = 0;
    for (int i = 1; i < n; ++i) {
      if (mean_sal[i] > mean_sal[top]) top = i;
      if (mean_sal[i] <= mean_sal[bottom]) bottom = i;
    }
    sys.seeded[top] = 1;
    sys.targets(top) = 1.0;
    if (bottom != top) {
      sys.seeded[bottom] = 1;
      sys.targets(bottom) = 0.0;
    }
    sys.seed_count = bottom != top ? 2 : 1;
    sys.seed_fallback = true;
  }
  return sys;
}

RegressionSolution solve_alpha(const RefineSystem& sys) {
  const int n = sys.count;
  const double l = static_cast<double>(sys.seed_count);
  if (n < 1 || sys.seed_count < 1)
    throw std::invalid_argument("solve_alpha: empty system or no seeds");

  // D^-1/2 with zero-degree entries dropped from the smoothness term.
  Eigen::VectorXd dinv_sqrt(n);
  for (int i = 0; i < n; ++i)
    dinv_sqrt(i) =
        sys.degree(i) > 0.0 ? 1.0 / std::sqrt(sys.degree(i)) : 0.0;

  Eigen::MatrixXd jk = sys.gram;
  for (int i = 0; i < n; ++i)
    if (!sys.seeded[i]) jk.row(i).setZero();

  const Eigen::MatrixXd smooth = dinv_sqrt.asDiagonal() * sys.laplacian *
                                 dinv_sqrt.asDiagonal() * sys.gram;
  const Eigen::MatrixXd system =
      jk + sys.theta1 * l * Eigen::MatrixXd::Identity(n, n) +
      (sys.theta2 * l / (static_cast<double>(n) * n)) * smooth;

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  const Eigen::VectorXd alpha = lu.solve(sys.targets);
  if (!alpha.allFinite() ||
      (system * alpha - sys.targets).norm() >
          1e-6 * (1.0 + sys.targets.norm())) {
    throw std::runtime_error(
        "solve_alpha: singular system, rcond estimate " +
        std::to_string(lu.rcond()));
  }

  const Eigen::VectorXd scores = sys.gram * alpha;
  RegressionSolution sol;
  sol.coefficients.assign(alpha.data(), alpha.data() + n);
  sol.scores.assign(scores.data(), scores.data() + n);
  return sol;
}

GrayMap render_refined(const RegressionSolution& sol,
                       const SuperpixelLabeling& labeling) {
  if (static_cast<int>(sol.scores.size()) != labeling.count)
    throw std::invalid_argument("render_refined: score/labeling count mismatch");

  RawMap raw(labeling.width, labeling.height);
  for (size_t p = 0; p < raw.data.size(); ++p)
    raw.data[p] = sol.scores[labeling.labels[p]];
  return normalize_unit(raw);
}

GrayMap refine_map(const ImageRGB& image, const GrayMap& coarse,
                   const RefineOptions& opts, bool* seed_fallback) {
  if (coarse.width != image.width || coarse.height != image.height)
    throw std::invalid_argument("refine_map: coarse map dimension mismatch");

  const SuperpixelLabeling labeling = slic_segment(
      image, opts.superpixel_count, opts.compactness, opts.slic_iters);
  const SuperpixelFeatures feats = superpixel_features(image, labeling);
  const auto pairs = adjacency_pairs(labeling);
  const RefineSystem sys =
      build_system(feats, pairs, coarse, labeling, opts.seed_hi, opts.seed_lo,
                   opts.theta1, opts.theta2);
  if (seed_fallback) *seed_fallback = sys.seed_fallback;
  const RegressionSolution sol = solve_alpha(sys);
  return render_refined(sol, labeling);
}

}  // namespace salrefine
