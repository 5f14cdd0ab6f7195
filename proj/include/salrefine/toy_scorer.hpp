#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "salrefine/image.hpp"

namespace salrefine {

constexpr int kNumClasses = 5;  // subitizing categories 0,1,2,3,4+

/// Minimal differentiable subitizing classifier: 3x3x3 valid convolution,
/// ReLU, global average pool, 5-way linear head, softmax. All passes are
/// written out by hand so the gradients can be checked against finite
/// differences.
struct ToyScorer {
  int channels = 8;     // K
  int input_size = 64;  // expected square input resolution
  uint64_t rng_seed = 0;
  std::vector<double> conv_kernels;  // K x 3(in) x 3 x 3, kernel-major
  std::vector<double> conv_bias;     // K
  std::vector<double> head_weights;  // 5 x K, class-major
  std::vector<double> head_bias;     // 5

  double& kernel_at(int k, int c, int u, int v) {
    return conv_kernels[((static_cast<size_t>(k) * 3 + c) * 3 + u) * 3 + v];
  }
  double kernel_at(int k, int c, int u, int v) const {
    return conv_kernels[((static_cast<size_t>(k) * 3 + c) * 3 + u) * 3 + v];
  }
};

/// Uniform [-0.1, 0.1] initialization from the given seed.
ToyScorer make_toy_scorer(uint64_t seed, int channels = 8, int input_size = 64);

struct ForwardTrace {
  FeatureStack features;        // post-ReLU conv output, K x (s-2) x (s-2)
  std::vector<double> pooled;   // K
  std::vector<double> logits;   // 5
  std::vector<double> probs;    // 5, softmax of logits
  ImageRGB input;               // image the trace was computed from
};

/// Deterministic forward pass. The image must match model.input_size on both
/// sides; callers resize first.
ForwardTrace forward(const ToyScorer& model, const ImageRGB& image);

int argmax_class(const ForwardTrace& trace);

/// Gradients of one scalar with respect to every parameter block.
struct ParamGrads {
  std::vector<double> conv_kernels;
  std::vector<double> conv_bias;
  std::vector<double> head_weights;
  std::vector<double> head_bias;
};

struct ClassGradients {
  GradStack features;  // d(logit_c) / d(features), matches feature shape
  ParamGrads params;   // d(logit_c) / d(parameters)
};

/// Backward pass for the pre-softmax logit of class_index.
ClassGradients backprop_class(const ToyScorer& model, const ForwardTrace& trace,
                              int class_index);

/// Backward pass for an arbitrary scalar with given d(scalar)/d(logits);
/// shared machinery behind class, cross-entropy and mask-score gradients.
ParamGrads backprop_logits(const ToyScorer& model, const ForwardTrace& trace,
                           std::span<const double> dlogits);

/// Mean over the batch of -log(probs[label]), probabilities floored at 1e-12.
double cross_entropy_loss(const std::vector<std::vector<double>>& probs_batch,
                          const std::vector<int>& labels);

struct TrainSample {
  ImageRGB image;
  int label = 0;
};

struct TrainOptions {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // Mask-mining term: when enabled, each sample is additionally scored on a
  // masked copy of itself and alpha * mean(class score) joins the loss.
  bool use_mask_loss = false;
  double alpha = 1.0;
  double omega = 50.0;
  double sigma = 0.5;
};

/// SGD momentum buffers, one per parameter block; zero-initialized lazily.
struct SgdState {
  ParamGrads velocity;
  bool initialized = false;
};

struct TrainStepResult {
  ToyScorer model;
  double loss = 0.0;
  double l_cls = 0.0;
  double l_mask = 0.0;
};

/// One SGD step (momentum + weight decay) over the batch. Loss is
/// l_cls + alpha * l_mask when the mask term is enabled, else l_cls alone.
/// Throws std::runtime_error on non-finite gradients.
TrainStepResult train_step(const ToyScorer& model,
                           std::span<const TrainSample> batch,
                           const TrainOptions& opts, SgdState& state);

/// Checkpoint: one tensor record per parameter block plus a text manifest
/// ("name KxMxH offset" lines) at <path>.manifest.
void save_toy_scorer(const ToyScorer& model, const std::string& path);
ToyScorer load_toy_scorer(const std::string& path);

}  // namespace salrefine
