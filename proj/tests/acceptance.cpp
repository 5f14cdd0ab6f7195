// Acceptance suite: one self-contained check per shipping criterion, one
// PASS/FAIL line each. Returns nonzero if any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gradient_check.hpp"
#include "metrics_oracle.hpp"
#include "objective_oracle.hpp"
#include "salrefine/image_io.hpp"
#include "salrefine/metrics.hpp"
#include "salrefine/refine.hpp"
#include "salrefine/rng.hpp"
#include "salrefine/slic.hpp"
#include "salrefine/sum.hpp"
#include "salrefine/synthetic.hpp"
#include "salrefine/toy_scorer.hpp"

namespace fs = std::filesystem;
using namespace salrefine;
using Clock = std::chrono::steady_clock;

namespace {

struct Criterion {
  int id;
  const char* label;
  bool (*run)(std::string& detail);
  double budget_seconds;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

// --- 1. metric oracle equivalence -----------------------------------------

bool metrics_vs_oracle(std::string& detail) {
  Rng rng(20240801);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    GrayMap map(8, 8);
    for (double& v : map.data) v = rng.uniform();
    BinaryMask gt(8, 8);
    for (auto& v : gt.data) v = rng.uniform() < 0.35 ? 1 : 0;
    gt.data[rng.below(gt.data.size())] = 1;

    const PrCurve fast = pr_curve(map, gt);
    const PrCurve slow = testutil::oracle_pr_curve(map, gt);
    for (int k = 0; k < 256; ++k) {
      worst = std::max(worst, std::abs(fast.points[k].precision -
                                       slow.points[k].precision));
      worst = std::max(worst, std::abs(fast.points[k].recall -
                                       slow.points[k].recall));
    }
    worst = std::max(worst, std::abs(max_fbeta(fast) -
                                     testutil::oracle_max_fbeta(slow)));
    worst = std::max(worst,
                     std::abs(mae(map, gt) - testutil::oracle_mae(map, gt)));
  }
  detail = "max deviation " + sci(worst);
  return worst <= 1e-12;
}

// --- 2. closed-form correctness --------------------------------------------

bool closed_form_vs_minimizer(std::string& detail) {
  Rng rng(20240802);
  double worst_rel = 0.0, worst_grad = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const RefineSystem sys =
        testutil::make_random_system(rng, rng.range(4, 20));
    const RegressionSolution sol = solve_alpha(sys);
    const testutil::ObjectiveOracle oracle(sys);

    const Eigen::VectorXd numeric = oracle.minimize();
    const Eigen::Map<const Eigen::VectorXd> closed(sol.coefficients.data(),
                                                   sys.count);
    worst_rel = std::max(worst_rel, (closed - numeric).norm() /
                                        std::max(1e-12, numeric.norm()));
    worst_grad = std::max(
        worst_grad,
        oracle.gradient(closed).norm() / (1.0 + sys.targets.norm()));
  }
  detail = "max rel " + sci(worst_rel) + ", grad ratio " + sci(worst_grad);
  return worst_rel <= 1e-6 && worst_grad <= 1e-8;
}

// --- 3. ridge reduction -----------------------------------------------------

bool ridge_reduction(std::string& detail) {
  Rng rng(20240803);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.range(3, 20);
    RefineSystem sys = testutil::make_random_system(rng, n);
    sys.theta2 = 0.0;
    sys.seeded.assign(n, 1);
    sys.seed_count = n;
    for (int i = 0; i < n; ++i) sys.targets(i) = rng.uniform();

    const RegressionSolution sol = solve_alpha(sys);
    const Eigen::VectorXd ridge =
        (sys.gram + sys.theta1 * n * Eigen::MatrixXd::Identity(n, n))
            .partialPivLu()
            .solve(sys.targets);
    for (int i = 0; i < n; ++i)
      worst = std::max(worst, std::abs(sol.coefficients[i] - ridge(i)));
  }
  detail = "max abs deviation " + sci(worst);
  return worst <= 1e-10;
}

// --- 4. gradient fidelity ---------------------------------------------------

bool gradient_fidelity(std::string& detail) {
  Rng rng(20240804);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const ToyScorer model =
        make_toy_scorer(rng.next_u64(), rng.range(1, 4), 8);
    const ImageRGB image = testutil::random_image(rng, 8);
    worst = std::max(
        worst, testutil::max_gradient_error(model, image, rng.range(0, 4)));
  }
  detail = "max rel error " + sci(worst);
  return worst <= 1e-4;
}

// --- 5. refinement improves boundaries --------------------------------------

ImageRGB shape_image(Rng& rng, int size, BinaryMask& mask_out) {
  ImageRGB img(size, size);
  mask_out = BinaryMask(size, size);
  const double bg[3] = {0.15 + rng.uniform(-0.05, 0.05),
                        0.22 + rng.uniform(-0.05, 0.05),
                        0.55 + rng.uniform(-0.05, 0.05)};
  const double fg[3] = {0.85 + rng.uniform(-0.07, 0.07),
                        0.35 + rng.uniform(-0.07, 0.07),
                        0.15 + rng.uniform(-0.07, 0.07)};
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = bg[c];

  const bool square = rng.uniform() < 0.5;
  const int half = rng.range(size * 3 / 10, size * 2 / 5);
  const int cx = rng.range(half + 2, size - half - 3);
  const int cy = rng.range(half + 2, size - half - 3);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const bool in =
          square ? std::abs(x - cx) <= half && std::abs(y - cy) <= half
                 : (x - cx) * (x - cx) + (y - cy) * (y - cy) <= half * half;
      if (!in) continue;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = fg[c];
      mask_out.set(x, y, true);
    }
  return img;
}

bool refinement_improves(std::string& detail) {
  Rng rng(20240805);
  double coarse_f = 0.0, refined_f = 0.0, coarse_mae = 0.0, refined_mae = 0.0;
  const int n = 20;
  for (int trial = 0; trial < n; ++trial) {
    BinaryMask gt;
    const ImageRGB img = shape_image(rng, 64, gt);
    const GrayMap coarse = box_blur(mask_to_graymap(gt), 9);
    const GrayMap refined = refine_map(img, coarse);

    coarse_f += max_fbeta(pr_curve(coarse, gt));
    refined_f += max_fbeta(pr_curve(refined, gt));
    coarse_mae += mae(coarse, gt);
    refined_mae += mae(refined, gt);
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "mean F %.4f -> %.4f, mean MAE %.4f -> %.4f", coarse_f / n,
                refined_f / n, coarse_mae / n, refined_mae / n);
  detail = buf;
  return refined_f >= coarse_f && refined_mae < coarse_mae;
}

// --- 6. SUM growth ----------------------------------------------------------

double iou_above_half(const GrayMap& map, const BinaryMask& gt) {
  long long inter = 0, uni = 0;
  for (size_t p = 0; p < map.data.size(); ++p) {
    const bool a = map.data[p] > 0.5;
    const bool b = gt.data[p] != 0;
    inter += a && b;
    uni += a || b;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Two blobs, one in the scorer's canonical color and one washed out, so the
// first pass under-covers and the update loop has ground to recover.
ToySample two_tone_blobs(uint64_t seed, int size) {
  Rng rng(seed);
  ToySample s;
  s.label = 2;
  s.image = ImageRGB(size, size);
  s.mask = BinaryMask(size, size);
  const double bg[3] = {0.12, 0.18, 0.30};
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c) s.image.at(x, y, c) = bg[c];

  const int r = 6;
  const int ax = rng.range(r + 2, size / 2 - r - 2);
  const int ay = rng.range(r + 2, size - r - 3);
  const int bx = rng.range(size / 2 + r + 2, size - r - 3);
  const int by = rng.range(r + 2, size - r - 3);
  const double col_a[3] = {0.85, 0.25, 0.15};
  const double col_b[3] = {0.55, 0.45, 0.35};
  const auto paint = [&](int cx, int cy, const double col[3]) {
    for (int y = cy - r; y <= cy + r; ++y)
      for (int x = cx - r; x <= cx + r; ++x) {
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > r * r) continue;
        for (int c = 0; c < 3; ++c) s.image.at(x, y, c) = col[c];
        s.mask.set(x, y, true);
      }
  };
  paint(ax, ay, col_a);
  paint(bx, by, col_b);
  return s;
}

bool sum_growth(std::string& detail) {
  const auto dataset = make_toy_dataset(11, 20, 64);
  ToyScorer model = make_toy_scorer(77, 8, 64);
  TrainOptions opts;
  opts.learning_rate = 0.02;
  opts.use_mask_loss = true;
  SgdState state;
  Rng rng(123);
  for (int step = 0; step < 500; ++step) {
    std::vector<TrainSample> batch;
    for (int b = 0; b < 8; ++b) {
      const ToySample& smp = dataset[rng.below(dataset.size())];
      batch.push_back({smp.image, smp.label});
    }
    model = train_step(model, batch, opts, state).model;
  }

  SumConfig cfg;
  cfg.iterations = 10;
  bool area_ok = true;
  double iou_first = 0.0, iou_last = 0.0;
  const int n = 8;
  for (int i = 0; i < n; ++i) {
    const ToySample sample = two_tone_blobs(6000 + i, 64);
    const auto records = update_loop(sample.image, model, cfg, sample.label);
    const GrayMap& first = records.front().map;
    const GrayMap last = accumulated_map(records);
    area_ok = area_ok &&
              active_area_fraction(last) >= active_area_fraction(first);
    iou_first += iou_above_half(first, sample.mask);
    iou_last += iou_above_half(last, sample.mask);
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "area monotone %s, mean IoU %.4f -> %.4f", area_ok ? "yes" : "NO",
                iou_first / n, iou_last / n);
  detail = buf;
  return area_ok && iou_last >= iou_first;
}

// --- 7. refinement throughput ----------------------------------------------

bool refinement_throughput(std::string& detail) {
  Rng rng(20240807);
  BinaryMask gt;
  const ImageRGB img = shape_image(rng, 400, gt);
  const GrayMap coarse = box_blur(mask_to_graymap(gt), 20);

  const auto start = Clock::now();
  const GrayMap refined = refine_map(img, coarse);  // 200 superpixels default
  const double elapsed = seconds_since(start);

  detail = std::to_string(elapsed) + " s for 400x400 with 200 superpixels";
  return elapsed < 1.0 && refined.width == 400;
}

// --- 8. SLIC partition validity ----------------------------------------------

bool slic_partitions(std::string& detail) {
  Rng rng(20240808);
  for (int trial = 0; trial < 50; ++trial) {
    ImageRGB img(64, 64);
    for (double& v : img.data) v = rng.uniform();
    const int target = trial % 3 == 0 ? 32 : (trial % 3 == 1 ? 64 : 128);
    const SuperpixelLabeling lab = slic_segment(img, target);

    if (lab.count < (target + 1) / 2 || lab.count > target * 3 / 2) {
      detail = "count " + std::to_string(lab.count) + " outside bounds for "
               "target " + std::to_string(target);
      return false;
    }
    std::vector<long long> sizes(lab.count, 0);
    for (int v : lab.labels) {
      if (v < 0 || v >= lab.count) {
        detail = "label out of range";
        return false;
      }
      ++sizes[v];
    }
    for (long long s : sizes)
      if (s == 0) {
        detail = "empty label";
        return false;
      }

    // 4-connectivity: count flood-fill components, must equal count.
    std::vector<int> seen(lab.labels.size(), 0);
    std::vector<int> stack;
    int components = 0;
    for (size_t p = 0; p < lab.labels.size(); ++p) {
      if (seen[p]) continue;
      ++components;
      stack.assign(1, static_cast<int>(p));
      seen[p] = 1;
      while (!stack.empty()) {
        const int q = stack.back();
        stack.pop_back();
        const int x = q % 64, y = q / 64;
        const int neigh[4] = {x > 0 ? q - 1 : -1, x + 1 < 64 ? q + 1 : -1,
                              y > 0 ? q - 64 : -1, y + 1 < 64 ? q + 64 : -1};
        for (int r : neigh) {
          if (r < 0 || seen[r] || lab.labels[r] != lab.labels[q]) continue;
          seen[r] = 1;
          stack.push_back(r);
        }
      }
    }
    if (components != lab.count) {
      detail = "disconnected labeling (" + std::to_string(components) +
               " components for " + std::to_string(lab.count) + " labels)";
      return false;
    }
  }
  detail = "50 labelings, all valid partitions";
  return true;
}

// --- 9. CLI determinism -------------------------------------------------------

#ifndef SALREFINE_CLI
#define SALREFINE_CLI "salrefine"
#endif

bool shell(const std::string& cmd) {
  const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return rc != -1 && WIFEXITED(rc) && WEXITSTATUS(rc) == 0;
}

bool hash_tree(const fs::path& root,
               std::map<std::string, std::vector<char>>& out) {
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    if (!in) return false;
    out[fs::relative(entry.path(), root).string()] =
        std::vector<char>(std::istreambuf_iterator<char>(in),
                          std::istreambuf_iterator<char>());
  }
  return true;
}

bool cli_determinism(std::string& detail) {
  const std::string cli = SALREFINE_CLI;
  const fs::path base =
      fs::temp_directory_path() / ("salrefine_accept_" +
                                   std::to_string(::getpid()));
  fs::remove_all(base);

  for (const char* run : {"run1", "run2"}) {
    const fs::path dir = base / run;
    fs::create_directories(dir);
    const std::string d = dir.string();
    const std::string ok_cmds[] = {
        cli + " gentoy --out " + d + "/toy --per-class 2 --seed 9 --size 64",
        cli + " traintoy --data " + d + "/toy --epochs 1 --batch 4 --seed 9 "
              "--out " + d + "/model.bin",
        cli + " cam --image " + d + "/toy/img_0004_count2.png --model " + d +
              "/model.bin --out " + d + "/cam.png",
        cli + " refine --image " + d + "/toy/img_0004_count2.png --coarse " +
              d + "/cam.png --out " + d + "/refined.png",
        cli + " sumdemo --image " + d + "/toy/img_0004_count2.png --model " +
              d + "/model.bin --iterations 2 --out-dir " + d + "/demo",
        cli + " eval --maps " + d + "/toy/gt --gt " + d + "/toy/gt --out " +
              d + "/report.csv --json",
    };
    for (const std::string& cmd : ok_cmds) {
      if (!shell(cmd)) {
        detail = "command failed: " + cmd;
        fs::remove_all(base);
        return false;
      }
    }
  }

  std::map<std::string, std::vector<char>> a, b;
  if (!hash_tree(base / "run1", a) || !hash_tree(base / "run2", b)) {
    detail = "could not read artifacts";
    fs::remove_all(base);
    return false;
  }
  fs::remove_all(base);
  if (a.size() != b.size() || a.empty()) {
    detail = "artifact sets differ in size";
    return false;
  }
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) {
      detail = "artifact differs: " + name;
      return false;
    }
  }
  detail = std::to_string(a.size()) + " artifacts bitwise identical";
  return true;
}

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "metric oracle equivalence (200 random pairs, 1e-12)",
       metrics_vs_oracle, 5.0},
      {2, "closed-form solve matches objective minimizer",
       closed_form_vs_minimizer, 10.0},
      {3, "ridge reduction (theta2=0, all seeded)", ridge_reduction, 10.0},
      {4, "analytic gradients vs central differences", gradient_fidelity,
       30.0},
      {5, "refinement improves blurred ground truth", refinement_improves,
       60.0},
      {6, "saliency updating grows coverage after training", sum_growth,
       300.0},
      {7, "400x400 refinement under one second", refinement_throughput, 30.0},
      {8, "SLIC labelings are valid partitions", slic_partitions, 30.0},
      {9, "CLI commands are bitwise deterministic", cli_determinism, 120.0},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = Clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double elapsed = seconds_since(start);
    if (elapsed > c.budget_seconds) {
      ok = false;
      detail += " [over budget " + std::to_string(c.budget_seconds) + " s]";
    }
    std::printf("%s  criterion %d (%.2fs): %s — %s\n", ok ? "PASS" : "FAIL",
                c.id, elapsed, c.label, detail.c_str());
    failures += ok ? 0 : 1;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
