#pragma once

#include <Eigen/Dense>

#include "salrefine/refine.hpp"
#include "salrefine/rng.hpp"

namespace testutil {

/// The regression objective in matrix form,
///   F(a) = (1/l) |y - J K a|^2 + t1 a'K a + (t2/N^2) a'K D^-1/2 L D^-1/2 K a,
/// minimized iteratively. This never assembles or inverts the closed-form
/// system matrix; it only evaluates gradients, so it is an independent route
/// to the same optimum.
class ObjectiveOracle {
 public:
  explicit ObjectiveOracle(const salrefine::RefineSystem& sys)
      : k_(sys.gram),
        y_(sys.targets),
        seeded_(sys.seeded),
        l_(static_cast<double>(sys.seed_count)),
        theta1_(sys.theta1),
        theta2_(sys.theta2),
        n_(sys.count) {
    Eigen::VectorXd dinv(n_);
    for (int i = 0; i < n_; ++i)
      dinv(i) = sys.degree(i) > 0.0 ? 1.0 / std::sqrt(sys.degree(i)) : 0.0;
    smooth_ = dinv.asDiagonal() * sys.laplacian * dinv.asDiagonal();
  }

  Eigen::VectorXd select(const Eigen::VectorXd& v) const {  // J v
    Eigen::VectorXd out = v;
    for (int i = 0; i < n_; ++i)
      if (!seeded_[i]) out(i) = 0.0;
    return out;
  }

  double value(const Eigen::VectorXd& alpha) const {
    const Eigen::VectorXd ka = k_ * alpha;
    const Eigen::VectorXd resid = y_ - select(ka);
    return resid.squaredNorm() / l_ + theta1_ * alpha.dot(ka) +
           theta2_ / (static_cast<double>(n_) * n_) *
               ka.dot(smooth_ * ka);
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& alpha) const {
    const Eigen::VectorXd ka = k_ * alpha;
    return (2.0 / l_) * (k_ * select(select(ka) - y_)) +
           2.0 * theta1_ * ka +
           (2.0 * theta2_ / (static_cast<double>(n_) * n_)) *
               (k_ * (smooth_ * ka));
  }

  /// Conjugate-gradient minimization of the quadratic: solves H a = b with
  /// H v = gradient(v) - gradient(0) and b = -gradient(0).
  Eigen::VectorXd minimize() const {
    const Eigen::VectorXd g0 = gradient(Eigen::VectorXd::Zero(n_));
    const auto h_times = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      return gradient(v) - g0;
    };
    const Eigen::VectorXd b = -g0;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
    Eigen::VectorXd r = b;
    Eigen::VectorXd p = r;
    double rs = r.squaredNorm();
    const double tol = 1e-28 * std::max(1.0, b.squaredNorm());
    for (int it = 0; it < 200 * n_ && rs > tol; ++it) {
      const Eigen::VectorXd hp = h_times(p);
      const double denom = p.dot(hp);
      if (denom <= 0.0) break;
      const double step = rs / denom;
      x += step * p;
      r -= step * hp;
      const double rs_next = r.squaredNorm();
      p = r + (rs_next / rs) * p;
      rs = rs_next;
    }
    return x;
  }

 private:
  Eigen::MatrixXd k_;
  Eigen::MatrixXd smooth_;
  Eigen::VectorXd y_;
  std::vector<int> seeded_;
  double l_;
  double theta1_;
  double theta2_;
  int n_;
};

/// Random system with well-separated features (pairwise distance >= 3, so
/// the gram matrix is diagonally dominant and the objective has a unique
/// minimizer), a connected adjacency chain plus extra random edges, and a
/// random seeded subset.
inline salrefine::RefineSystem make_random_system(salrefine::Rng& rng, int n) {
  using namespace salrefine;

  SuperpixelFeatures feats;
  feats.count = n;
  feats.features.resize(n);
  for (int i = 0; i < n; ++i) {
    auto& f = feats.features[i];
    for (int attempt = 0; attempt < 1000; ++attempt) {
      for (double& v : f) v = rng.uniform(0.0, 10.0);
      bool separated = true;
      for (int j = 0; j < i && separated; ++j) {
        double d2 = 0.0;
        for (int c = 0; c < 5; ++c) {
          const double d = f[c] - feats.features[j][c];
          d2 += d * d;
        }
        separated = d2 >= 9.0;
      }
      if (separated) break;
      if (attempt == 999)
        throw std::runtime_error("could not separate oracle features");
    }
  }

  std::set<std::pair<int, int>> pairs;
  for (int i = 0; i + 1 < n; ++i) pairs.emplace(i, i + 1);
  for (int e = 0; e < n; ++e) {
    const int i = rng.range(0, n - 1);
    const int j = rng.range(0, n - 1);
    if (i != j) pairs.emplace(std::min(i, j), std::max(i, j));
  }

  // A labeling with one column per superpixel and a matching coarse map
  // drives the seed selection through the public builder.
  SuperpixelLabeling lab;
  lab.width = n;
  lab.height = 2;
  lab.count = n;
  lab.labels.resize(static_cast<size_t>(n) * 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < n; ++x) lab.labels[static_cast<size_t>(y) * n + x] = x;

  GrayMap coarse(n, 2);
  for (int x = 0; x < n; ++x) {
    const double v = rng.uniform();
    coarse.at(x, 0) = v;
    coarse.at(x, 1) = v;
  }
  return build_system(feats, pairs, coarse, lab);
}

}  // namespace testutil
