#pragma once

#include <vector>

#include "salrefine/image.hpp"
#include "salrefine/toy_scorer.hpp"

namespace salrefine {

/// Saliency update configuration. omega controls the sharpness of the soft
/// mask, sigma its threshold, alpha the mask-mining loss weight.
struct SumConfig {
  double omega = 50.0;
  double sigma = 0.5;
  double alpha = 1.0;
  int iterations = 1;
};

struct IterationRecord {
  int iteration_index = 0;  // 1-based
  GrayMap map;              // saliency map produced at this iteration
  ImageRGB masked_image;    // input consumed at this iteration
  double class_score = 0.0; // softmax score of the tracked class on that input
};

/// Soft removal of salient regions:
/// out = I0 - sigmoid(omega * (M - sigma)) * I0, one mask factor broadcast
/// over the three channels. Output stays in [0,1] and never exceeds I0.
ImageRGB fuse_mask(const ImageRGB& original, const GrayMap& map,
                   const SumConfig& cfg);

/// Mean of the class scores measured on masked images.
double mask_mining_loss(const std::vector<double>& scores);

double total_loss(double l_cls, double l_mask, double alpha);

/// Multi-scale saliency of one image under the scorer: the image is degraded
/// to each scale, brought back to the model resolution, and the per-scale
/// CAMs fuse at the image resolution.
GrayMap scorer_saliency(const ToyScorer& model, const ImageRGB& image,
                        int class_index,
                        const std::vector<double>& scales = {0.5, 0.75, 1.0});

/// Iterative saliency updating: iteration 1 maps the original image;
/// iteration i >= 2 maps the fusion of the original with the running
/// elementwise maximum of all previous maps. class_index < 0 selects the
/// scorer's argmax class at iteration 1.
std::vector<IterationRecord> update_loop(
    const ImageRGB& original, const ToyScorer& model, const SumConfig& cfg,
    int class_index = -1,
    const std::vector<double>& scales = {0.5, 0.75, 1.0});

/// Running elementwise maximum of the per-iteration maps (raw, un-normalized).
GrayMap accumulated_map(const std::vector<IterationRecord>& records);

/// Fraction of pixels strictly above 0.5.
double active_area_fraction(const GrayMap& map);

}  // namespace salrefine
