#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <string>
#include <vector>

#include "salrefine/gradcam.hpp"
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

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CamArgs {
  std::string image, model, acts, grads, out;
  int class_index = -1;
  std::vector<double> scales = {0.5, 0.75, 1.0};
};

struct RefineArgs {
  std::string image, coarse, out, dump_labels;
  RefineOptions opts;
};

struct SumDemoArgs {
  std::string image, model, out_dir;
  int class_index = -1;
  SumConfig cfg;
  std::vector<double> scales = {0.5, 0.75, 1.0};
};

struct EvalArgs {
  std::string maps, gt, out;
  bool json = false;
  int jobs = 1;
};

struct TrainArgs {
  std::string data, out;
  int epochs = 10;
  int batch = 8;
  int channels = 8;
  int input_size = 64;
  uint64_t seed = 42;
  TrainOptions opts;
};

struct GenArgs {
  std::string out;
  int per_class = 10;
  int size = 64;
  uint64_t seed = 42;
};

void write_text_atomic(const std::string& path, const std::string& text) {
  std::ofstream out(path + ".tmp");
  if (!out) throw std::runtime_error("cannot open file for write: " + path);
  out << text;
  out.close();
  if (!out) throw std::runtime_error("write failed: " + path);
  fs::rename(path + ".tmp", path);
}

int run_cam(const CamArgs& args) {
  const ImageRGB image = load_image(args.image);
  GrayMap map;
  if (!args.model.empty()) {
    const ToyScorer model = load_toy_scorer(args.model);
    int cls = args.class_index;
    if (cls < 0) {
      const ImageRGB scaled =
          resize_bilinear(image, model.input_size, model.input_size);
      cls = argmax_class(forward(model, scaled));
      std::fprintf(stderr, "using argmax class %d\n", cls);
    }
    map = scorer_saliency(model, image, cls, args.scales);
  } else {
    const FeatureStack acts = load_tensor(args.acts);
    const GradStack grads = load_tensor(args.grads);
    if (acts.channels != grads.channels || acts.rows != grads.rows ||
        acts.cols != grads.cols)
      throw std::runtime_error("activation/gradient shape mismatch");
    const NeuronWeights w =
        neuron_weights(grads, args.class_index < 0 ? 0 : args.class_index);
    map = multiscale_cam({cam(acts, w)}, image.width, image.height);
  }
  save_graymap(map, args.out);
  return 0;
}

int run_refine(const RefineArgs& args) {
  const ImageRGB image = load_image(args.image);
  const GrayMap coarse = load_graymap(args.coarse);
  if (coarse.width != image.width || coarse.height != image.height) {
    std::fprintf(stderr, "error: coarse map is %dx%d but the image is %dx%d\n",
                 coarse.width, coarse.height, image.width, image.height);
    return kExitUsage;
  }

  if (!args.dump_labels.empty()) {
    const SuperpixelLabeling lab =
        slic_segment(image, args.opts.superpixel_count, args.opts.compactness,
                     args.opts.slic_iters);
    save_label_map_pgm16(lab.labels, lab.width, lab.height, args.dump_labels);
  }

  bool fallback = false;
  const GrayMap refined = refine_map(image, coarse, args.opts, &fallback);
  if (fallback)
    std::fprintf(stderr,
                 "warning: degenerate coarse map, fell back to top/bottom-1 "
                 "seeding\n");
  save_graymap(refined, args.out);
  return 0;
}

int run_sumdemo(const SumDemoArgs& args) {
  const ImageRGB image = load_image(args.image);
  const ToyScorer model = load_toy_scorer(args.model);
  fs::create_directories(args.out_dir);

  const auto records =
      update_loop(image, model, args.cfg, args.class_index, args.scales);

  // The area column tracks the raw running maximum; the final artifact is
  // its normalization.
  std::string csv = "iteration,class_score,active_area_fraction\n";
  GrayMap accumulated = records.front().map;
  for (const IterationRecord& rec : records) {
    for (size_t i = 0; i < accumulated.data.size(); ++i)
      accumulated.data[i] = std::max(accumulated.data[i], rec.map.data[i]);

    char name[32];
    std::snprintf(name, sizeof(name), "iter_%03d.png", rec.iteration_index);
    save_graymap(rec.map, (fs::path(args.out_dir) / name).string());

    char line[128];
    std::snprintf(line, sizeof(line), "%d,%.6f,%.6f\n", rec.iteration_index,
                  rec.class_score, active_area_fraction(accumulated));
    csv += line;
  }

  RawMap raw(accumulated.width, accumulated.height);
  raw.data = accumulated.data;
  save_graymap(normalize_unit(raw),
               (fs::path(args.out_dir) / "accumulated.png").string());
  write_text_atomic((fs::path(args.out_dir) / "summary.csv").string(), csv);
  return 0;
}

int run_eval(const EvalArgs& args) {
  const EvalReport report = batch_eval(args.maps, args.gt, args.jobs);
  write_report_csv(report, args.out);
  if (args.json) {
    fs::path json_path(args.out);
    json_path.replace_extension(".json");
    write_report_json(report, json_path.string());
  }
  if (report.skipped > 0)
    std::fprintf(stderr, "warning: %d file(s) skipped\n", report.skipped);
  std::printf("MEAN max_fbeta=%.6f mae=%.6f s_measure=%.6f over %zu image(s)\n",
              report.mean.max_fbeta, report.mean.mae, report.mean.s_measure,
              report.rows.size());
  return 0;
}

int run_traintoy(const TrainArgs& args) {
  // Labels ride in the filenames: *_count{0..4}.png
  const std::regex label_re(".*_count([0-4])\\.(png|pgm|ppm)$");
  std::vector<TrainSample> samples;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(args.data))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  for (const auto& path : files) {
    std::smatch m;
    const std::string name = path.filename().string();
    if (!std::regex_match(name, m, label_re)) {
      std::fprintf(stderr, "warning: cannot parse label from %s, skipped\n",
                   name.c_str());
      continue;
    }
    TrainSample sample;
    sample.label = m[1].str()[0] - '0';
    sample.image = resize_bilinear(load_image(path.string()), args.input_size,
                                   args.input_size);
    samples.push_back(std::move(sample));
  }
  if (samples.empty()) {
    std::fprintf(stderr, "error: no labelled samples in %s\n",
                 args.data.c_str());
    return kExitUsage;
  }
  std::fprintf(stderr, "training on %zu samples\n", samples.size());

  ToyScorer model = make_toy_scorer(args.seed, args.channels, args.input_size);
  SgdState state;
  Rng shuffle_rng(args.seed ^ 0x5a5a5a5au);

  std::string log = "epoch,l_cls,l_mask,total\n";
  std::vector<size_t> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < args.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double sum_cls = 0.0, sum_mask = 0.0, sum_total = 0.0;
    int steps = 0;
    for (size_t begin = 0; begin < order.size();
         begin += static_cast<size_t>(args.batch)) {
      std::vector<TrainSample> batch;
      for (size_t i = begin;
           i < std::min(order.size(), begin + static_cast<size_t>(args.batch));
           ++i)
        batch.push_back(samples[order[i]]);
      TrainStepResult result = train_step(model, batch, args.opts, state);
      model = std::move(result.model);
      sum_cls += result.l_cls;
      sum_mask += result.l_mask;
      sum_total += result.loss;
      ++steps;
    }
    char line[160];
    std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f\n", epoch,
                  sum_cls / steps, sum_mask / steps, sum_total / steps);
    log += line;
    std::fprintf(stderr, "epoch %s", line);
  }

  save_toy_scorer(model, args.out);
  write_text_atomic(args.out + ".losses.csv", log);
  return 0;
}

int run_gentoy(const GenArgs& args) {
  fs::create_directories(fs::path(args.out) / "gt");
  Rng rng(args.seed);
  int index = 0;
  for (int count = 0; count <= 4; ++count) {
    for (int i = 0; i < args.per_class; ++i) {
      const ToySample sample =
          make_blob_sample(rng.next_u64(), count, args.size);
      char name[48];
      std::snprintf(name, sizeof(name), "img_%04d_count%d.png", index++, count);
      save_image(sample.image, (fs::path(args.out) / name).string());
      save_graymap(mask_to_graymap(sample.mask),
                   (fs::path(args.out) / "gt" / name).string());
    }
  }
  std::fprintf(stderr, "wrote %d images to %s\n", index, args.out.c_str());
  return 0;
}

// Plain key=value config file applied as defaults; explicit flags override.
void apply_config(CLI::App& app, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("config", "cannot open config " + path);
  std::map<std::string, std::string> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    values[line.substr(0, eq)] = line.substr(eq + 1);
  }

  for (CLI::App* sub : app.get_subcommands({})) {
    for (CLI::Option* opt : sub->get_options()) {
      if (opt->get_lnames().empty()) continue;
      const auto it = values.find(opt->get_lnames().front());
      if (it == values.end()) continue;
      try {
        opt->default_val(it->second);
      } catch (const CLI::Error&) {
        throw CLI::ValidationError(
            "config", "bad value for " + it->first + ": " + it->second);
      }
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saliency map generation, refinement and evaluation toolkit"};
  app.require_subcommand(1);

  CamArgs cam_args;
  CLI::App* cam_cmd =
      app.add_subcommand("cam", "Multi-scale class activation saliency map");
  cam_cmd->add_option("--image", cam_args.image, "Input image")
      ->required()
      ->check(CLI::ExistingFile);
  cam_cmd->add_option("--model", cam_args.model, "Toy scorer checkpoint")
      ->check(CLI::ExistingFile);
  cam_cmd->add_option("--acts", cam_args.acts, "Precomputed activation tensor")
      ->check(CLI::ExistingFile);
  cam_cmd->add_option("--grads", cam_args.grads, "Precomputed gradient tensor")
      ->check(CLI::ExistingFile);
  cam_cmd
      ->add_option("--class", cam_args.class_index,
                   "Class index (default: argmax)")
      ->check(CLI::Range(0, 4));
  cam_cmd->add_option("--scales", cam_args.scales, "Input scales")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  cam_cmd->add_option("--out", cam_args.out, "Output map path")->required();

  RefineArgs refine_args;
  CLI::App* refine_cmd = app.add_subcommand(
      "refine", "Superpixel-graph refinement of a coarse map");
  refine_cmd->add_option("--image", refine_args.image, "Input image")
      ->required()
      ->check(CLI::ExistingFile);
  refine_cmd->add_option("--coarse", refine_args.coarse, "Coarse saliency map")
      ->required()
      ->check(CLI::ExistingFile);
  refine_cmd->add_option("--out", refine_args.out, "Output map path")
      ->required();
  refine_cmd->add_option("--superpixels", refine_args.opts.superpixel_count,
                         "Superpixel target count");
  refine_cmd->add_option("--seed-hi", refine_args.opts.seed_hi,
                         "Positive seed threshold");
  refine_cmd->add_option("--seed-lo", refine_args.opts.seed_lo,
                         "Negative seed threshold");
  refine_cmd->add_option("--theta1", refine_args.opts.theta1,
                         "Kernel norm weight");
  refine_cmd->add_option("--theta2", refine_args.opts.theta2,
                         "Laplacian smoothness weight");
  refine_cmd->add_option("--dump-labels", refine_args.dump_labels,
                         "Write the superpixel label map (16-bit PGM)");

  SumDemoArgs sum_args;
  CLI::App* sum_cmd = app.add_subcommand(
      "sumdemo", "Iterative saliency updating demonstration");
  sum_cmd->add_option("--image", sum_args.image, "Input image")
      ->required()
      ->check(CLI::ExistingFile);
  sum_cmd->add_option("--model", sum_args.model, "Toy scorer checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  sum_cmd
      ->add_option("--iterations", sum_args.cfg.iterations,
                   "Update iterations")
      ->check(CLI::PositiveNumber);
  sum_cmd->add_option("--omega", sum_args.cfg.omega, "Mask sharpness");
  sum_cmd->add_option("--sigma", sum_args.cfg.sigma, "Mask threshold");
  sum_cmd
      ->add_option("--class", sum_args.class_index,
                   "Class index (default: argmax)")
      ->check(CLI::Range(0, 4));
  sum_cmd->add_option("--scales", sum_args.scales, "Input scales")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  sum_cmd->add_option("--out-dir", sum_args.out_dir, "Output directory")
      ->required();

  EvalArgs eval_args;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Evaluate saliency maps against ground truth");
  eval_cmd->add_option("--maps", eval_args.maps, "Directory of saliency maps")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--gt", eval_args.gt, "Directory of ground-truth masks")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--out", eval_args.out, "Report CSV path")->required();
  eval_cmd->add_flag("--json", eval_args.json, "Also write a JSON report");
  eval_cmd->add_option("--jobs", eval_args.jobs, "Parallel workers")
      ->check(CLI::PositiveNumber);

  TrainArgs train_args;
  train_args.opts.use_mask_loss = true;
  CLI::App* train_cmd = app.add_subcommand(
      "traintoy", "Train the toy subitizing scorer on a labelled directory");
  train_cmd
      ->add_option("--data", train_args.data,
                   "Directory of *_count{0..4}.png images")
      ->required()
      ->check(CLI::ExistingDirectory);
  train_cmd->add_option("--epochs", train_args.epochs, "Training epochs")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--out", train_args.out, "Checkpoint path")->required();
  train_cmd->add_option("--seed", train_args.seed, "Initialization seed");
  train_cmd->add_option("--batch", train_args.batch, "Batch size")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--channels", train_args.channels, "Conv channels")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train_args.opts.learning_rate, "Learning rate");
  train_cmd->add_option("--momentum", train_args.opts.momentum, "SGD momentum");
  train_cmd->add_option("--weight-decay", train_args.opts.weight_decay,
                        "Weight decay");
  train_cmd->add_option("--alpha", train_args.opts.alpha,
                        "Mask mining loss weight");
  train_cmd->add_flag("--mask-loss,!--no-mask-loss",
                      train_args.opts.use_mask_loss,
                      "Enable the mask mining loss term");
  train_cmd->add_option("--omega", train_args.opts.omega, "Mask sharpness");
  train_cmd->add_option("--sigma", train_args.opts.sigma, "Mask threshold");

  GenArgs gen_args;
  CLI::App* gen_cmd = app.add_subcommand(
      "gentoy", "Generate the synthetic blob-counting dataset");
  gen_cmd->add_option("--out", gen_args.out, "Output directory")->required();
  gen_cmd->add_option("--per-class", gen_args.per_class, "Images per class")
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--size", gen_args.size, "Image size")
      ->check(CLI::Range(16, 4096));
  gen_cmd->add_option("--seed", gen_args.seed, "Generator seed");

  try {
    app.preparse_callback([&](size_t) {
      if (const char* cfg = std::getenv("SALREFINE_CONFIG"))
        apply_config(app, cfg);
    });
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (cam_cmd->parsed()) {
      const bool model_route = !cam_args.model.empty();
      const bool tensor_route =
          !cam_args.acts.empty() || !cam_args.grads.empty();
      if (model_route == tensor_route ||
          (tensor_route && (cam_args.acts.empty() || cam_args.grads.empty()))) {
        std::fprintf(stderr,
                     "error: pass either --model or both --acts and --grads\n");
        return kExitUsage;
      }
      return run_cam(cam_args);
    }
    if (refine_cmd->parsed()) return run_refine(refine_args);
    if (sum_cmd->parsed()) return run_sumdemo(sum_args);
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (train_cmd->parsed()) return run_traintoy(train_args);
    if (gen_cmd->parsed()) return run_gentoy(gen_args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
