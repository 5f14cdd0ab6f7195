#include "salrefine/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "salrefine/image_io.hpp"

namespace salrefine {

namespace {

constexpr int kThresholds = 256;

void check_dims(const GrayMap& map, const BinaryMask& gt, const char* who) {
  if (map.width != gt.width || map.height != gt.height)
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}

// Largest k with k/255 <= v under the exact double comparison used by the
// binarization predicate; -1 if v < 0.
int last_passed_threshold(double v) {
  int lo = -1, hi = kThresholds - 1;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (static_cast<double>(mid) / 255.0 <= v)
      lo = mid;
    else
      hi = mid - 1;
  }
  return lo;
}

double fbeta(double p, double r, double beta2) {
  const double denom = beta2 * p + r;
  if (denom <= 0.0) return 0.0;
  return (1.0 + beta2) * p * r / denom;
}

// Mean and sample (N-1) standard deviation of map values under a predicate.
struct MaskedStats {
  double mean = 0.0;
  double stddev = 0.0;
  long long n = 0;
};

template <typename Pred>
MaskedStats masked_stats(const GrayMap& map, Pred&& keep) {
  MaskedStats st;
  double sum = 0.0;
  for (size_t p = 0; p < map.data.size(); ++p) {
    if (!keep(p)) continue;
    sum += map.data[p];
    ++st.n;
  }
  if (st.n == 0) return st;
  st.mean = sum / static_cast<double>(st.n);
  if (st.n > 1) {
    double sq = 0.0;
    for (size_t p = 0; p < map.data.size(); ++p) {
      if (!keep(p)) continue;
      const double d = map.data[p] - st.mean;
      sq += d * d;
    }
    st.stddev = std::sqrt(sq / static_cast<double>(st.n - 1));
  }
  return st;
}

// Object score 2x / (x^2 + 1 + sigma_x + eps) over one side of the mask.
double object_score(const GrayMap& values, const BinaryMask& gt, bool side) {
  const MaskedStats st = masked_stats(
      values, [&](size_t p) { return (gt.data[p] != 0) == side; });
  if (st.n == 0) return 0.0;
  constexpr double kEps = 2.220446049250313e-16;
  return 2.0 * st.mean / (st.mean * st.mean + 1.0 + st.stddev + kEps);
}

double s_object(const GrayMap& map, const BinaryMask& gt, double fg_ratio) {
  // Foreground side scores the map itself, background side its complement.
  GrayMap complement(map.width, map.height);
  for (size_t p = 0; p < map.data.size(); ++p)
    complement.data[p] = 1.0 - map.data[p];
  const double o_fg = object_score(map, gt, true);
  const double o_bg = object_score(complement, gt, false);
  return fg_ratio * o_fg + (1.0 - fg_ratio) * o_bg;
}

// SSIM variant used by the region term: means, sample variances and
// covariance of the full quadrant.
double quadrant_ssim(const GrayMap& map, const BinaryMask& gt, int x0, int y0,
                     int x1, int y1) {
  const long long n =
      static_cast<long long>(x1 - x0) * static_cast<long long>(y1 - y0);
  if (n <= 0) return 1.0;  // empty quadrant, identical by convention

  double sx = 0.0, sy = 0.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      sx += map.at(x, y);
      sy += gt.at(x, y) ? 1.0 : 0.0;
    }
  }
  const double mx = sx / static_cast<double>(n);
  const double my = sy / static_cast<double>(n);

  double vxx = 0.0, vyy = 0.0, vxy = 0.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const double dx = map.at(x, y) - mx;
      const double dy = (gt.at(x, y) ? 1.0 : 0.0) - my;
      vxx += dx * dx;
      vyy += dy * dy;
      vxy += dx * dy;
    }
  }
  constexpr double kEps = 2.220446049250313e-16;
  const double norm = n > 1 ? static_cast<double>(n - 1) : kEps;
  vxx /= norm;
  vyy /= norm;
  vxy /= norm;

  const double alpha = 4.0 * mx * my * vxy;
  const double beta = (mx * mx + my * my) * (vxx + vyy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  return beta == 0.0 ? 1.0 : 0.0;
}

double s_region(const GrayMap& map, const BinaryMask& gt) {
  // GT centroid in pixel coordinates.
  long long total = 0;
  double cx_sum = 0.0, cy_sum = 0.0;
  for (int y = 0; y < gt.height; ++y) {
    for (int x = 0; x < gt.width; ++x) {
      if (!gt.at(x, y)) continue;
      ++total;
      cx_sum += x;
      cy_sum += y;
    }
  }
  const int cx = static_cast<int>(
      std::lround(cx_sum / static_cast<double>(total)));
  const int cy = static_cast<int>(
      std::lround(cy_sum / static_cast<double>(total)));

  // Quadrants split after the centroid pixel; weights follow GT mass.
  const int xs[3] = {0, cx + 1, gt.width};
  const int ys[3] = {0, cy + 1, gt.height};
  double s = 0.0;
  for (int qy = 0; qy < 2; ++qy) {
    for (int qx = 0; qx < 2; ++qx) {
      long long mass = 0;
      for (int y = ys[qy]; y < ys[qy + 1]; ++y)
        for (int x = xs[qx]; x < xs[qx + 1]; ++x) mass += gt.at(x, y) ? 1 : 0;
      const double w = static_cast<double>(mass) / static_cast<double>(total);
      if (w > 0.0)
        s += w * quadrant_ssim(map, gt, xs[qx], ys[qy], xs[qx + 1], ys[qy + 1]);
    }
  }
  return s;
}

std::map<std::string, std::filesystem::path> index_by_stem(
    const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw std::runtime_error("not a directory: " + dir);
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".png" || ext == ".pgm" || ext == ".ppm")
      out.emplace(entry.path().stem().string(), entry.path());
  }
  return out;
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

PrCurve pr_curve(const GrayMap& map, const BinaryMask& gt) {
  check_dims(map, gt, "pr_curve");

  long long positives = 0;
  for (uint8_t v : gt.data) positives += v;
  if (positives == 0)
    throw std::invalid_argument("pr_curve: ground truth has no positive pixel");

  // tp_at[k] / fp_at[k]: counts for threshold index k, built from each
  // pixel's highest passed threshold so the comparison stays exact.
  std::vector<long long> tp_at(kThresholds, 0), fp_at(kThresholds, 0);
  for (size_t p = 0; p < map.data.size(); ++p) {
    const int k = last_passed_threshold(map.data[p]);
    if (k < 0) continue;
    if (gt.data[p])
      ++tp_at[k];
    else
      ++fp_at[k];
  }
  // Suffix sums: predicted-positive at threshold k means passed >= k.
  long long tp = 0, fp = 0;
  std::vector<long long> tps(kThresholds), fps(kThresholds);
  for (int k = kThresholds - 1; k >= 0; --k) {
    tp += tp_at[k];
    fp += fp_at[k];
    tps[k] = tp;
    fps[k] = fp;
  }

  PrCurve curve;
  curve.points.resize(kThresholds);
  for (int k = 0; k < kThresholds; ++k) {
    PrPoint& pt = curve.points[k];
    pt.threshold = static_cast<double>(k) / 255.0;
    const long long predicted = tps[k] + fps[k];
    pt.precision = predicted == 0
                       ? 1.0
                       : static_cast<double>(tps[k]) /
                             static_cast<double>(predicted);
    pt.recall = static_cast<double>(tps[k]) / static_cast<double>(positives);
  }
  return curve;
}

double max_fbeta(const PrCurve& curve, double beta2) {
  double best = 0.0;
  for (const PrPoint& pt : curve.points)
    best = std::max(best, fbeta(pt.precision, pt.recall, beta2));
  return best;
}

double mae(const GrayMap& map, const BinaryMask& gt) {
  check_dims(map, gt, "mae");
  double total = 0.0;
  for (size_t p = 0; p < map.data.size(); ++p)
    total += std::abs(map.data[p] - (gt.data[p] ? 1.0 : 0.0));
  return total / static_cast<double>(map.data.size());
}

double s_measure(const GrayMap& map, const BinaryMask& gt) {
  check_dims(map, gt, "s_measure");

  long long positives = 0;
  for (uint8_t v : gt.data) positives += v;
  const double fg_ratio =
      static_cast<double>(positives) / static_cast<double>(gt.data.size());

  double mean_map = 0.0;
  for (double v : map.data) mean_map += v;
  mean_map /= static_cast<double>(map.data.size());

  double s;
  if (positives == 0)
    s = 1.0 - mean_map;
  else if (positives == static_cast<long long>(gt.data.size()))
    s = mean_map;
  else
    s = 0.5 * s_object(map, gt, fg_ratio) + 0.5 * s_region(map, gt);
  return std::clamp(s, 0.0, 1.0);
}

EvalReport batch_eval(const std::string& map_dir, const std::string& gt_dir,
                      int jobs) {
  const auto maps = index_by_stem(map_dir);
  const auto gts = index_by_stem(gt_dir);

  std::vector<std::pair<std::string, std::pair<std::string, std::string>>>
      matched;
  int skipped = 0;
  for (const auto& [stem, path] : maps) {
    const auto it = gts.find(stem);
    if (it == gts.end()) {
      std::fprintf(stderr, "warning: no ground truth for %s, skipped\n",
                   path.string().c_str());
      ++skipped;
      continue;
    }
    matched.push_back({stem, {path.string(), it->second.string()}});
  }
  for (const auto& [stem, path] : gts)
    if (maps.find(stem) == maps.end()) {
      std::fprintf(stderr, "warning: no map for %s, skipped\n",
                   path.string().c_str());
      ++skipped;
    }
  if (matched.empty())
    throw std::runtime_error("batch_eval: no matching filenames between " +
                             map_dir + " and " + gt_dir);

  std::vector<EvalRow> rows(matched.size());
  std::vector<int> row_skipped(matched.size(), 0);
  auto eval_one = [&](size_t i) {
    const auto& [stem, paths] = matched[i];
    const GrayMap map = load_graymap(paths.first);
    const GrayMap gt_gray = load_graymap(paths.second);
    BinaryMask gt(gt_gray.width, gt_gray.height);
    for (size_t p = 0; p < gt.data.size(); ++p)
      gt.data[p] = gt_gray.data[p] > 0.5 ? 1 : 0;

    bool any = false;
    for (uint8_t v : gt.data) any = any || v;
    if (!any) {
      std::fprintf(stderr, "warning: empty ground truth for %s, skipped\n",
                   stem.c_str());
      row_skipped[i] = 1;
      return;
    }
    EvalRow& row = rows[i];
    row.id = stem;
    row.max_fbeta = max_fbeta(pr_curve(map, gt));
    row.mae = mae(map, gt);
    row.s_measure = s_measure(map, gt);
  };

  jobs = std::max(1, jobs);
  if (jobs == 1) {
    for (size_t i = 0; i < matched.size(); ++i) eval_one(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < matched.size();
             i = next.fetch_add(1))
          eval_one(i);
      });
    for (auto& th : pool) th.join();
  }

  EvalReport report;
  for (size_t i = 0; i < matched.size(); ++i) {
    if (row_skipped[i]) {
      ++skipped;
      continue;
    }
    report.rows.push_back(rows[i]);
  }
  report.skipped = skipped;
  if (report.rows.empty())
    throw std::runtime_error("batch_eval: no usable map/gt pairs");

  report.mean.id = "MEAN";
  for (const EvalRow& row : report.rows) {
    report.mean.max_fbeta += row.max_fbeta;
    report.mean.mae += row.mae;
    report.mean.s_measure += row.s_measure;
  }
  const double inv = 1.0 / static_cast<double>(report.rows.size());
  report.mean.max_fbeta *= inv;
  report.mean.mae *= inv;
  report.mean.s_measure *= inv;
  return report;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path + ".tmp");
  if (!out) throw std::runtime_error("cannot open file for write: " + path);
  out << "id,max_fbeta,mae,s_measure\n";
  for (const EvalRow& row : report.rows)
    out << row.id << "," << format_metric(row.max_fbeta) << ","
        << format_metric(row.mae) << "," << format_metric(row.s_measure)
        << "\n";
  out << "MEAN," << format_metric(report.mean.max_fbeta) << ","
      << format_metric(report.mean.mae) << ","
      << format_metric(report.mean.s_measure) << "\n";
  out.close();
  if (!out) throw std::runtime_error("write failed: " + path);
  std::filesystem::rename(path + ".tmp", path);
}

void write_report_json(const EvalReport& report, const std::string& path) {
  nlohmann::json rows = nlohmann::json::array();
  for (const EvalRow& row : report.rows)
    rows.push_back({{"id", row.id},
                    {"max_fbeta", row.max_fbeta},
                    {"mae", row.mae},
                    {"s_measure", row.s_measure}});
  const nlohmann::json doc = {
      {"rows", rows},
      {"mean",
       {{"max_fbeta", report.mean.max_fbeta},
        {"mae", report.mean.mae},
        {"s_measure", report.mean.s_measure}}},
      {"skipped", report.skipped}};

  std::ofstream out(path + ".tmp");
  if (!out) throw std::runtime_error("cannot open file for write: " + path);
  out << doc.dump(2) << "\n";
  out.close();
  if (!out) throw std::runtime_error("write failed: " + path);
  std::filesystem::rename(path + ".tmp", path);
}

}  // namespace salrefine
