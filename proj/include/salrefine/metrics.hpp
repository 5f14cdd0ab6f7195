#pragma once

#include <string>
#include <vector>

#include "salrefine/image.hpp"

namespace salrefine {

/// Precision/recall at the 256 thresholds k/255, k = 0..255. A pixel is
/// predicted positive iff map >= threshold; precision is 1 when nothing is
/// predicted.
struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // 256 entries, ascending thresholds
};

PrCurve pr_curve(const GrayMap& map, const BinaryMask& gt);

/// Max over the curve of (1+b2)*p*r / (b2*p + r); points with p = r = 0
/// contribute 0.
double max_fbeta(const PrCurve& curve, double beta2 = 0.3);

/// Mean absolute per-pixel difference.
double mae(const GrayMap& map, const BinaryMask& gt);

/// Structure measure S = (S_o + S_r) / 2, clamped to [0,1]. S_o combines
/// foreground/background object scores weighted by the GT foreground ratio;
/// S_r averages per-quadrant SSIM around the GT centroid with weights
/// proportional to each quadrant's GT mass. Degenerate all-background or
/// all-foreground GT falls back to 1 - mean(map) and mean(map) respectively.
double s_measure(const GrayMap& map, const BinaryMask& gt);

struct EvalRow {
  std::string id;
  double max_fbeta = 0.0;
  double mae = 0.0;
  double s_measure = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;   // sorted by id
  EvalRow mean;                // id = "MEAN"
  int skipped = 0;             // unmatched or unusable files
};

/// Evaluate every map/gt pair matched by filename stem across the two
/// directories. Unmatched files are skipped with a warning count; an empty
/// intersection is an error. jobs > 1 fans out across images.
EvalReport batch_eval(const std::string& map_dir, const std::string& gt_dir,
                      int jobs = 1);

void write_report_csv(const EvalReport& report, const std::string& path);
void write_report_json(const EvalReport& report, const std::string& path);

}  // namespace salrefine
