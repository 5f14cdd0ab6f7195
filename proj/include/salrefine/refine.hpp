#pragma once

#include <Eigen/Dense>
#include <set>
#include <utility>
#include <vector>

#include "salrefine/image.hpp"
#include "salrefine/slic.hpp"

namespace salrefine {

/// Superpixel regression system: Gaussian gram matrix, adjacency-weighted
/// graph Laplacian, and the seed selection that anchors the solve.
struct RefineSystem {
  int count = 0;                 // N
  Eigen::MatrixXd gram;          // K, K(i,j) = exp(-0.5 * |x_i - x_j|^2)
  Eigen::MatrixXd adj;           // A, gram entries on adjacent pairs else 0
  Eigen::VectorXd degree;        // diagonal of D, row sums of A
  Eigen::MatrixXd laplacian;     // L = D - A
  std::vector<int> seeded;       // 0/1 diagonal of J
  Eigen::VectorXd targets;       // y, nonzero only on seeded entries
  int seed_count = 0;            // l
  bool seed_fallback = false;    // degenerate coarse map triggered top/bottom-1
  double theta1 = 1.0;
  double theta2 = 1e-6;
};

struct RegressionSolution {
  std::vector<double> coefficients;  // alpha*
  std::vector<double> scores;        // g(x_i) = (K alpha*)_i, un-normalized
};

struct RefineOptions {
  int superpixel_count = 200;
  double compactness = 10.0;
  int slic_iters = 10;
  double seed_hi = 0.7;
  double seed_lo = 0.2;
  double theta1 = 1.0;
  double theta2 = 1e-6;
};

/// Assemble the system from superpixel features, the adjacency set and a
/// coarse saliency map. Superpixels whose mean coarse saliency reaches
/// seed_hi become positive seeds (y=1), those at or below seed_lo negative
/// seeds (y=0). If neither side qualifies, the top-1 and bottom-1 superpixels
/// by mean saliency are seeded instead and seed_fallback is set.
RefineSystem build_system(const SuperpixelFeatures& feats,
                          const std::set<std::pair<int, int>>& pairs,
                          const GrayMap& coarse,
                          const SuperpixelLabeling& labeling,
                          double seed_hi = 0.7, double seed_lo = 0.2,
                          double theta1 = 1.0, double theta2 = 1e-6);

/// Closed-form solve
///   alpha* = (JK + theta1*l*I + theta2*l/N^2 * D^-1/2 L D^-1/2 K)^-1 y
/// via dense LU with partial pivoting. Zero-degree rows of D contribute
/// nothing to the smoothness term. Throws std::runtime_error (with a
/// condition estimate) if the guarded system is numerically singular.
RegressionSolution solve_alpha(const RefineSystem& sys);

/// Paint each pixel with its superpixel score, then min-max normalize.
GrayMap render_refined(const RegressionSolution& sol,
                       const SuperpixelLabeling& labeling);

/// Full refinement pipeline: SLIC, features, adjacency, system, solve,
/// render. seed_fallback (when non-null) reports degenerate seeding.
GrayMap refine_map(const ImageRGB& image, const GrayMap& coarse,
                   const RefineOptions& opts = {},
                   bool* seed_fallback = nullptr);

}  // namespace salrefine
