#include "salrefine/toy_scorer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "salrefine/gradcam.hpp"
#include "salrefine/image_io.hpp"
#include "salrefine/rng.hpp"
#include "salrefine/sum.hpp"

namespace salrefine {

namespace {

void fill_uniform(Rng& rng, std::vector<double>& v) {
  for (double& x : v) x = rng.uniform(-0.1, 0.1);
}

size_t kernel_index(const ToyScorer& m, int k, int c, int u, int v) {
  (void)m;
  return ((static_cast<size_t>(k) * 3 + c) * 3 + u) * 3 + v;
}

ParamGrads zero_grads(const ToyScorer& model) {
  ParamGrads g;
  g.conv_kernels.assign(model.conv_kernels.size(), 0.0);
  g.conv_bias.assign(model.conv_bias.size(), 0.0);
  g.head_weights.assign(model.head_weights.size(), 0.0);
  g.head_bias.assign(model.head_bias.size(), 0.0);
  return g;
}

void accumulate(ParamGrads& into, const ParamGrads& g, double scale) {
  for (size_t i = 0; i < into.conv_kernels.size(); ++i)
    into.conv_kernels[i] += scale * g.conv_kernels[i];
  for (size_t i = 0; i < into.conv_bias.size(); ++i)
    into.conv_bias[i] += scale * g.conv_bias[i];
  for (size_t i = 0; i < into.head_weights.size(); ++i)
    into.head_weights[i] += scale * g.head_weights[i];
  for (size_t i = 0; i < into.head_bias.size(); ++i)
    into.head_bias[i] += scale * g.head_bias[i];
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

// v = momentum * v + (g + wd * p); p -= lr * v
void sgd_update(std::vector<double>& params, const std::vector<double>& grads,
                std::vector<double>& velocity, const TrainOptions& opts) {
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] + opts.weight_decay * params[i];
    velocity[i] = opts.momentum * velocity[i] + g;
    params[i] -= opts.learning_rate * velocity[i];
  }
}

FeatureStack as_record(const std::vector<double>& v, int k, int m, int h) {
  FeatureStack rec(k, m, h);
  rec.data = v;
  return rec;
}

}  // namespace

ToyScorer make_toy_scorer(uint64_t seed, int channels, int input_size) {
  if (channels < 1) throw std::invalid_argument("channels must be >= 1");
  if (input_size < 3) throw std::invalid_argument("input_size must be >= 3");
  ToyScorer m;
  m.channels = channels;
  m.input_size = input_size;
  m.rng_seed = seed;
  m.conv_kernels.resize(static_cast<size_t>(channels) * 3 * 3 * 3);
  m.conv_bias.resize(channels);
  m.head_weights.resize(static_cast<size_t>(kNumClasses) * channels);
  m.head_bias.resize(kNumClasses);

  Rng rng(seed);
  fill_uniform(rng, m.conv_kernels);
  fill_uniform(rng, m.conv_bias);
  fill_uniform(rng, m.head_weights);
  fill_uniform(rng, m.head_bias);
  return m;
}

ForwardTrace forward(const ToyScorer& model, const ImageRGB& image) {
  if (image.width != model.input_size || image.height != model.input_size)
    throw std::invalid_argument(
        "forward: image must be " + std::to_string(model.input_size) + "x" +
        std::to_string(model.input_size) + ", got " +
        std::to_string(image.width) + "x" + std::to_string(image.height));

  const int s = model.input_size;
  const int m = s - 2;  // valid padding
  const int k_n = model.channels;

  ForwardTrace trace;
  trace.input = image;
  trace.features = FeatureStack(k_n, m, m);
  trace.pooled.assign(k_n, 0.0);

  for (int k = 0; k < k_n; ++k) {
    double pool_sum = 0.0;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        double acc = model.conv_bias[k];
        for (int c = 0; c < 3; ++c)
          for (int u = 0; u < 3; ++u)
            for (int v = 0; v < 3; ++v)
              acc += model.kernel_at(k, c, u, v) * image.at(j + v, i + u, c);
        const double activated = acc > 0.0 ? acc : 0.0;
        trace.features.at(k, i, j) = activated;
        pool_sum += activated;
      }
    }
    trace.pooled[k] = pool_sum / (static_cast<double>(m) * m);
  }

  trace.logits.assign(kNumClasses, 0.0);
  for (int c = 0; c < kNumClasses; ++c) {
    double z = model.head_bias[c];
    for (int k = 0; k < k_n; ++k)
      z += model.head_weights[static_cast<size_t>(c) * k_n + k] *
           trace.pooled[k];
    trace.logits[c] = z;
  }

  // Numerically stable softmax.
  const double zmax = *std::max_element(trace.logits.begin(),
                                        trace.logits.end());
  trace.probs.assign(kNumClasses, 0.0);
  double denom = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    trace.probs[c] = std::exp(trace.logits[c] - zmax);
    denom += trace.probs[c];
  }
  for (double& p : trace.probs) p /= denom;
  return trace;
}

int argmax_class(const ForwardTrace& trace) {
  return static_cast<int>(std::max_element(trace.probs.begin(),
                                           trace.probs.end()) -
                          trace.probs.begin());
}

ParamGrads backprop_logits(const ToyScorer& model, const ForwardTrace& trace,
                           std::span<const double> dlogits) {
  if (dlogits.size() != kNumClasses)
    throw std::invalid_argument("dlogits must have 5 entries");

  const int k_n = model.channels;
  const int m = trace.features.rows;
  const double inv_area = 1.0 / (static_cast<double>(m) * m);
  ParamGrads g = zero_grads(model);

  std::vector<double> dpooled(k_n, 0.0);
  for (int c = 0; c < kNumClasses; ++c) {
    g.head_bias[c] = dlogits[c];
    for (int k = 0; k < k_n; ++k) {
      g.head_weights[static_cast<size_t>(c) * k_n + k] =
          dlogits[c] * trace.pooled[k];
      dpooled[k] += dlogits[c] *
                    model.head_weights[static_cast<size_t>(c) * k_n + k];
    }
  }

  const ImageRGB& image = trace.input;
  for (int k = 0; k < k_n; ++k) {
    const double dfeat = dpooled[k] * inv_area;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        if (trace.features.at(k, i, j) <= 0.0) continue;  // ReLU cut
        g.conv_bias[k] += dfeat;
        for (int c = 0; c < 3; ++c)
          for (int u = 0; u < 3; ++u)
            for (int v = 0; v < 3; ++v)
              g.conv_kernels[kernel_index(model, k, c, u, v)] +=
                  dfeat * image.at(j + v, i + u, c);
      }
    }
  }
  return g;
}

ClassGradients backprop_class(const ToyScorer& model,
                              const ForwardTrace& trace, int class_index) {
  if (class_index < 0 || class_index >= kNumClasses)
    throw std::invalid_argument("class index out of range [0,4]");

  const int k_n = model.channels;
  const int m = trace.features.rows;
  const double inv_area = 1.0 / (static_cast<double>(m) * m);

  ClassGradients out;
  // d(logit_c)/d(features): the pool and head are linear, so the gradient is
  // uniform across positions within each channel.
  out.features = GradStack(k_n, m, m);
  for (int k = 0; k < k_n; ++k) {
    const double d =
        model.head_weights[static_cast<size_t>(class_index) * k_n + k] *
        inv_area;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) out.features.at(k, i, j) = d;
  }

  std::vector<double> dlogits(kNumClasses, 0.0);
  dlogits[class_index] = 1.0;
  out.params = backprop_logits(model, trace, dlogits);
  return out;
}

double cross_entropy_loss(const std::vector<std::vector<double>>& probs_batch,
                          const std::vector<int>& labels) {
  if (probs_batch.empty() || probs_batch.size() != labels.size())
    throw std::invalid_argument("cross_entropy_loss: batch size mismatch");
  double total = 0.0;
  for (size_t i = 0; i < probs_batch.size(); ++i) {
    const int label = labels[i];
    if (label < 0 || label >= kNumClasses)
      throw std::invalid_argument("label out of range [0,4]");
    total += -std::log(std::max(probs_batch[i][label], 1e-12));
  }
  return total / static_cast<double>(probs_batch.size());
}

TrainStepResult train_step(const ToyScorer& model,
                           std::span<const TrainSample> batch,
                           const TrainOptions& opts, SgdState& state) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  if (opts.learning_rate < 0.0)
    throw std::invalid_argument("train_step: negative learning rate");

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  ParamGrads total = zero_grads(model);
  double l_cls = 0.0;
  double l_mask = 0.0;

  for (const TrainSample& sample : batch) {
    const ForwardTrace trace = forward(model, sample.image);
    l_cls += -std::log(std::max(trace.probs[sample.label], 1e-12));

    std::vector<double> dlogits(kNumClasses, 0.0);
    for (int c = 0; c < kNumClasses; ++c) dlogits[c] = trace.probs[c] * inv_n;
    dlogits[sample.label] -= inv_n;
    accumulate(total, backprop_logits(model, trace, dlogits), 1.0);

    if (opts.use_mask_loss) {
      // Single-scale saliency of the labelled class masks the sample; the
      // masked copy is treated as a fresh input (no gradient through the
      // mask construction).
      const ClassGradients cg = backprop_class(model, trace, sample.label);
      const NeuronWeights w = neuron_weights(cg.features, sample.label);
      const RawMap raw = cam(trace.features, w);
      const GrayMap map = multiscale_cam(
          {raw}, sample.image.width, sample.image.height);
      SumConfig cfg;
      cfg.omega = opts.omega;
      cfg.sigma = opts.sigma;
      const ImageRGB masked = fuse_mask(sample.image, map, cfg);

      const ForwardTrace mtrace = forward(model, masked);
      const double p = mtrace.probs[sample.label];
      l_mask += p;

      // d(p_label)/d(logit_j) = p_label * (delta - p_j)
      std::vector<double> dmask(kNumClasses, 0.0);
      for (int c = 0; c < kNumClasses; ++c)
        dmask[c] = -p * mtrace.probs[c] * opts.alpha * inv_n;
      dmask[sample.label] += p * opts.alpha * inv_n;
      accumulate(total, backprop_logits(model, mtrace, dmask), 1.0);
    }
  }

  l_cls *= inv_n;
  l_mask *= inv_n;

  if (!all_finite(total.conv_kernels) || !all_finite(total.conv_bias) ||
      !all_finite(total.head_weights) || !all_finite(total.head_bias))
    throw std::runtime_error("train_step: non-finite gradients, step aborted");

  if (!state.initialized) {
    state.velocity = zero_grads(model);
    state.initialized = true;
  }

  TrainStepResult result;
  result.model = model;
  sgd_update(result.model.conv_kernels, total.conv_kernels,
             state.velocity.conv_kernels, opts);
  sgd_update(result.model.conv_bias, total.conv_bias,
             state.velocity.conv_bias, opts);
  sgd_update(result.model.head_weights, total.head_weights,
             state.velocity.head_weights, opts);
  sgd_update(result.model.head_bias, total.head_bias,
             state.velocity.head_bias, opts);

  result.l_cls = l_cls;
  result.l_mask = l_mask;
  result.loss = opts.use_mask_loss ? l_cls + opts.alpha * l_mask : l_cls;
  return result;
}

void save_toy_scorer(const ToyScorer& model, const std::string& path) {
  struct Block {
    const char* name;
    FeatureStack rec;
  };
  const int k_n = model.channels;
  const Block blocks[] = {
      {"conv_kernels", as_record(model.conv_kernels, k_n, 3, 9)},
      {"conv_bias", as_record(model.conv_bias, 1, 1, k_n)},
      {"head_weights", as_record(model.head_weights, 1, kNumClasses, k_n)},
      {"head_bias", as_record(model.head_bias, 1, 1, kNumClasses)},
  };

  std::ofstream bin(path + ".tmp", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open file for write: " + path);
  std::ostringstream manifest;
  for (const Block& b : blocks) {
    manifest << b.name << " " << b.rec.channels << "x" << b.rec.rows << "x"
             << b.rec.cols << " " << bin.tellp() << "\n";
    write_tensor_record(b.rec, bin);
  }
  manifest << "input_size " << model.input_size << "\n";
  manifest << "seed " << model.rng_seed << "\n";
  bin.close();
  if (!bin) throw std::runtime_error("write failed: " + path);

  std::ofstream mf(path + ".manifest.tmp");
  if (!mf) throw std::runtime_error("cannot open file for write: " + path);
  mf << manifest.str();
  mf.close();

  std::filesystem::rename(path + ".tmp", path);
  std::filesystem::rename(path + ".manifest.tmp", path + ".manifest");
}

ToyScorer load_toy_scorer(const std::string& path) {
  std::ifstream mf(path + ".manifest");
  if (!mf)
    throw std::runtime_error("cannot open checkpoint manifest: " + path +
                             ".manifest");
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open checkpoint: " + path);

  ToyScorer model;
  bool have_kernels = false;
  std::string line;
  while (std::getline(mf, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name;
    ls >> name;
    if (name == "input_size") {
      ls >> model.input_size;
      continue;
    }
    if (name == "seed") {
      ls >> model.rng_seed;
      continue;
    }
    std::string shape;
    long offset = -1;
    ls >> shape >> offset;
    if (!ls || offset < 0)
      throw std::runtime_error("malformed manifest line: " + line);
    bin.seekg(offset);
    const FeatureStack rec = read_tensor_record(bin, path + ":" + name);
    if (name == "conv_kernels") {
      model.channels = rec.channels;
      model.conv_kernels = rec.data;
      have_kernels = true;
    } else if (name == "conv_bias") {
      model.conv_bias = rec.data;
    } else if (name == "head_weights") {
      model.head_weights = rec.data;
    } else if (name == "head_bias") {
      model.head_bias = rec.data;
    } else {
      throw std::runtime_error("unknown checkpoint block: " + name);
    }
  }

  if (!have_kernels || model.conv_bias.size() != (size_t)model.channels ||
      model.head_weights.size() !=
          static_cast<size_t>(kNumClasses) * model.channels ||
      model.head_bias.size() != kNumClasses)
    throw std::runtime_error("incomplete or inconsistent checkpoint: " + path);
  return model;
}

}  // namespace salrefine
