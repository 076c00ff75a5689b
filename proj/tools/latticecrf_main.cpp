#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "latticecrf/crf.hpp"
#include "latticecrf/data_io.hpp"
#include "latticecrf/image_io.hpp"
#include "latticecrf/learning.hpp"
#include "latticecrf/metrics.hpp"

namespace lc = latticecrf;

namespace {

struct KernelOptions {
  double w1 = 1.0;
  double theta_alpha = 61.0;
  double theta_beta = 11.0;
  double w2 = 1.0;
  double theta_gamma = 1.0;
  int iterations = 10;
  bool no_normalize = false;
};

void add_kernel_options(CLI::App* cmd, KernelOptions& k, bool required_appearance) {
  auto* w1 = cmd->add_option("--w1", k.w1, "Appearance kernel weight");
  auto* ta = cmd->add_option("--theta-alpha", k.theta_alpha, "Appearance spatial bandwidth (pixels)");
  auto* tb = cmd->add_option("--theta-beta", k.theta_beta, "Appearance color bandwidth");
  if (required_appearance) {
    w1->required();
    ta->required();
    tb->required();
  }
  cmd->add_option("--w2", k.w2, "Smoothness kernel weight")->default_val(1.0);
  cmd->add_option("--theta-gamma", k.theta_gamma, "Smoothness spatial bandwidth (pixels)")
      ->default_val(1.0);
  cmd->add_option("--iters", k.iterations, "Mean-field iterations")->default_val(10);
  cmd->add_flag("--no-normalize", k.no_normalize, "Disable per-pixel message normalization");
}

lc::KernelSpec unit_kernel(int dim, double weight) {
  lc::KernelSpec spec;
  spec.inv_stddevs.assign(dim, 1.0);
  spec.weight = weight;
  return spec;
}

lc::DenseCRFModel build_model(const lc::Image& image, const lc::UnaryField& unary,
                              const lc::CompatibilityMatrix& compat, const KernelOptions& k) {
  if (image.width != unary.width || image.height != unary.height)
    throw std::runtime_error("image size does not match unary container size");
  lc::DenseCRFModel model(unary, compat);
  model.set_normalize_messages(!k.no_normalize);
  model.add_kernel(unit_kernel(5, k.w1),
                   lc::build_appearance_features(image, k.theta_alpha, k.theta_beta));
  if (k.w2 > 0.0)
    model.add_kernel(unit_kernel(2, k.w2),
                     lc::build_smoothness_features(image.width, image.height, k.theta_gamma));
  return model;
}

lc::CompatibilityMatrix load_compat_arg(const std::string& arg, int num_labels) {
  if (arg == "potts") return lc::CompatibilityMatrix::potts(num_labels);
  lc::CompatibilityMatrix c = lc::load_compatibility(arg);
  if (c.num_labels() != num_labels)
    throw std::runtime_error("compatibility matrix size does not match unary label count");
  return c;
}

int cmd_infer(const std::string& image_path, const std::string& unary_path,
              const std::string& out_path, const KernelOptions& k, const std::string& compat_arg,
              const std::string& kl_trace_path) {
  lc::Image image = lc::load_image(image_path);
  lc::UnaryField unary = lc::load_unary(unary_path);
  lc::DenseCRFModel model =
      build_model(image, unary, load_compat_arg(compat_arg, unary.num_labels), k);

  std::vector<double> trace;
  lc::Matrix q = lc::run_inference(model, k.iterations, lc::FilterBackend::kLattice,
                                   kl_trace_path.empty() ? nullptr : &trace);

  std::vector<int32_t> labels = lc::map_labeling(q);
  lc::LabelMap map(unary.width, unary.height);
  map.labels.assign(labels.begin(), labels.end());
  lc::save_labelmap(map, lc::Palette::standard(unary.num_labels), out_path);

  if (!kl_trace_path.empty()) {
    std::ofstream f(kl_trace_path);
    if (!f) throw std::runtime_error("cannot write " + kl_trace_path);
    f << "iteration,kl_estimate\n";
    for (size_t t = 0; t < trace.size(); t++) f << t << "," << trace[t] << "\n";
  }
  std::printf("wrote %s (%dx%d, %d labels)\n", out_path.c_str(), unary.width, unary.height,
              unary.num_labels);
  return 0;
}

std::vector<lc::LabeledExample> load_examples(const std::string& manifest_path) {
  std::vector<lc::LabeledExample> examples;
  for (const auto& entry : lc::load_manifest(manifest_path)) {
    lc::LabeledExample ex;
    ex.image = lc::load_image(entry.image);
    ex.unary = lc::load_unary(entry.unary);
    ex.gt = lc::load_labelmap(entry.ground_truth);
    examples.push_back(std::move(ex));
  }
  return examples;
}

int cmd_learn_compat(const std::string& manifest_path, const std::string& out_path,
                     const KernelOptions& k, const std::string& init_arg, int max_iterations) {
  std::vector<lc::LabeledExample> loaded = load_examples(manifest_path);

  int num_labels = loaded.front().unary.num_labels;
  lc::CompatibilityMatrix init = load_compat_arg(init_arg, num_labels);

  std::vector<lc::TrainingExample> training;
  for (auto& ex : loaded) {
    if (ex.unary.num_labels != num_labels)
      throw std::runtime_error("label count differs across manifest entries");
    if (ex.gt.width != ex.unary.width || ex.gt.height != ex.unary.height)
      throw std::runtime_error("ground-truth size does not match unary container size");
    lc::DenseCRFModel model = build_model(ex.image, ex.unary, init, k);
    lc::GroundTruthIndicator truth = lc::GroundTruthIndicator::from_labelmap(ex.gt, num_labels);
    training.push_back({std::move(model), std::move(truth)});
  }

  lc::LearnConfig cfg;
  cfg.max_iterations = max_iterations;
  cfg.inference_iterations = k.iterations;
  lc::FitResult result = lc::fit_compatibility(training, init, cfg);
  lc::save_compatibility(result.compatibility, out_path);
  std::printf("wrote %s after %d iterations (objective %.6g -> %.6g, |grad| %.3g)\n",
              out_path.c_str(), result.iterations, result.objective_trace.front(),
              result.objective_trace.back(), result.gradient_norm);
  return 0;
}

int cmd_grid_search(const std::string& manifest_path, const std::string& grid_path,
                    const KernelOptions& k) {
  std::ifstream f(grid_path);
  if (!f) throw std::runtime_error("cannot open " + grid_path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(grid_path + ": " + e.what());
  }
  lc::GridSpec grid;
  try {
    grid.w1 = j.at("w1").get<std::vector<double>>();
    grid.theta_alpha = j.at("theta_alpha").get<std::vector<double>>();
    grid.theta_beta = j.at("theta_beta").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(grid_path + ": expected arrays w1, theta_alpha, theta_beta (" +
                             e.what() + ")");
  }

  lc::SearchConfig cfg;
  cfg.w2 = k.w2;
  cfg.theta_gamma = k.theta_gamma;
  cfg.iterations = k.iterations;
  cfg.normalize = !k.no_normalize;

  lc::GridSearchResult result =
      lc::grid_search_kernel_params(load_examples(manifest_path), grid, cfg);
  std::printf("%-10s %-12s %-12s %s\n", "w1", "theta_alpha", "theta_beta", "accuracy");
  for (const auto& pt : result.evaluated)
    std::printf("%-10g %-12g %-12g %.4f\n", pt.w1, pt.theta_alpha, pt.theta_beta, pt.accuracy);
  std::printf("best: w1=%g theta_alpha=%g theta_beta=%g accuracy=%.4f\n", result.best.w1,
              result.best.theta_alpha, result.best.theta_beta, result.best.accuracy);
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path,
             const std::vector<int>& trimap_widths, bool voc, int num_labels,
             const std::string& csv_path) {
  lc::LabelMap pred = lc::load_labelmap(pred_path);
  lc::LabelMap gt = lc::load_labelmap(gt_path);

  if (num_labels <= 0) {
    int32_t top = 0;
    for (int32_t l : pred.labels) top = std::max(top, l);
    for (int32_t l : gt.labels) top = std::max(top, l);
    num_labels = top + 1;
  }

  std::vector<std::pair<std::string, double>> report;
  report.emplace_back("global", lc::global_accuracy(pred, gt));
  report.emplace_back("average", lc::average_accuracy(pred, gt, num_labels));
  for (int w : trimap_widths) {
    lc::TrimapResult t = lc::trimap_error(pred, gt, w);
    report.emplace_back("trimap_" + std::to_string(w), t.error_percent);
  }
  if (voc) {
    lc::IouResult iou = lc::voc_iou(pred, gt, num_labels);
    report.emplace_back("voc", iou.mean_iou);
    for (int c = 0; c < num_labels; c++)
      if (iou.has_union[c]) report.emplace_back("voc_" + std::to_string(c), iou.per_class[c]);
  }

  for (const auto& [key, value] : report) std::printf("%s=%.4f\n", key.c_str(), value);

  if (!csv_path.empty()) {
    std::ofstream f(csv_path);
    if (!f) throw std::runtime_error("cannot write " + csv_path);
    f << "image,metric,value\n";
    for (const auto& [key, value] : report)
      f << pred_path << "," << key << "," << std::fixed << std::setprecision(4) << value << "\n";
  }
  return 0;
}

int cmd_bench_filter(int n, int d, int l, uint64_t seed) {
  if (n < 1 || d < 1 || l < 1) throw std::runtime_error("bench-filter: n, d, l must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  lc::FeatureMatrix f(n, d);
  for (int i = 0; i < n; i++)
    for (int j = 0; j < d; j++) f.at(i, j) = gauss(rng);
  lc::Matrix v(n, l);
  for (int i = 0; i < n; i++)
    for (int c = 0; c < l; c++) v(i, c) = uni(rng);
  lc::KernelSpec kernel = unit_kernel(d, 1.0);

  auto t0 = std::chrono::steady_clock::now();
  lc::PermutohedralLattice lattice(lc::whiten_features(f, kernel));
  auto t1 = std::chrono::steady_clock::now();
  lc::Matrix out = lattice.filter(v, true);
  auto t2 = std::chrono::steady_clock::now();

  std::printf("n=%d d=%d l=%d vertices=%d build_ms=%.3f filter_ms=%.3f", n, d, l,
              lattice.num_vertices(), std::chrono::duration<double, std::milli>(t1 - t0).count(),
              std::chrono::duration<double, std::milli>(t2 - t1).count());

  if (n <= lc::kBruteForceCap) {
    lc::Matrix exact = lc::brute_force_filter(f, kernel, v, true);
    double worst = 0.0;
    for (int c = 0; c < l; c++) {
      double num = 0.0, den = 0.0;
      for (int i = 0; i < n; i++) {
        double diff = out(i, c) - exact(i, c);
        num += diff * diff;
        den += exact(i, c) * exact(i, c);
      }
      worst = std::max(worst, std::sqrt(num / den));
    }
    std::printf(" oracle_rel_l2=%.6f", worst);
  }
  std::printf("\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense CRF inference with lattice-accelerated Gaussian filtering"};
  app.require_subcommand(1);

  // infer
  auto* infer = app.add_subcommand("infer", "Run mean-field inference on one image");
  std::string image_path, unary_path, out_path, compat_arg = "potts", kl_trace_path;
  KernelOptions infer_k;
  infer->add_option("--image", image_path, "Input image (PPM or PNG)")->required();
  infer->add_option("--unary", unary_path, "Unary cost container")->required();
  infer->add_option("--out", out_path, "Output label map (PNG)")->required();
  add_kernel_options(infer, infer_k, true);
  infer->add_option("--compat", compat_arg, "'potts' or a compatibility matrix file");
  infer->add_option("--kl-trace", kl_trace_path, "Write per-iteration KL estimates (CSV)");

  // learn-compat
  auto* learn = app.add_subcommand("learn-compat", "Fit the compatibility matrix on a manifest");
  std::string learn_manifest, learn_out, learn_init = "potts";
  int learn_max_iters = 100;
  KernelOptions learn_k;
  learn->add_option("--manifest", learn_manifest, "Manifest of image/unary/ground-truth triples")
      ->required();
  learn->add_option("--out", learn_out, "Output compatibility matrix file")->required();
  add_kernel_options(learn, learn_k, false);
  learn->add_option("--init", learn_init, "'potts' or a compatibility matrix file to start from");
  learn->add_option("--max-iters", learn_max_iters, "Optimizer iteration cap")->default_val(100);

  // grid-search
  auto* gridc = app.add_subcommand("grid-search", "Exhaustive appearance-parameter search");
  std::string grid_manifest, grid_path;
  KernelOptions grid_k;
  gridc->add_option("--manifest", grid_manifest, "Manifest of image/unary/ground-truth triples")
      ->required();
  gridc->add_option("--grid", grid_path, "JSON file with w1, theta_alpha, theta_beta arrays")
      ->required();
  gridc->add_option("--w2", grid_k.w2, "Smoothness kernel weight")->default_val(1.0);
  gridc->add_option("--theta-gamma", grid_k.theta_gamma, "Smoothness spatial bandwidth")
      ->default_val(1.0);
  gridc->add_option("--iters", grid_k.iterations, "Mean-field iterations")->default_val(10);
  gridc->add_flag("--no-normalize", grid_k.no_normalize, "Disable message normalization");

  // eval
  auto* eval = app.add_subcommand("eval", "Score a predicted label map against ground truth");
  std::string pred_path, gt_path;
  std::vector<int> trimap_widths;
  bool voc = false;
  int num_labels = 0;
  eval->add_option("--pred", pred_path, "Predicted label map (PNG)")->required();
  eval->add_option("--gt", gt_path, "Ground-truth label map (PNG)")->required();
  std::string eval_csv;
  eval->add_option("--trimap-width", trimap_widths, "Trimap band width(s) in pixels");
  eval->add_flag("--voc", voc, "Also report intersection-over-union");
  eval->add_option("--num-labels", num_labels, "Label count (default: largest label + 1)");
  eval->add_option("--csv", eval_csv, "Also write one image,metric,value row per metric");

  // bench-filter
  auto* bench = app.add_subcommand("bench-filter", "Time the lattice filter on random points");
  int bench_n = 1000, bench_d = 5, bench_l = 4;
  uint64_t bench_seed = 1;
  bench->add_option("--n", bench_n, "Point count")->default_val(1000);
  bench->add_option("--d", bench_d, "Feature dimension")->default_val(5);
  bench->add_option("--l", bench_l, "Value columns")->default_val(4);
  bench->add_option("--seed", bench_seed, "RNG seed")->default_val(1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (infer->parsed())
      return cmd_infer(image_path, unary_path, out_path, infer_k, compat_arg, kl_trace_path);
    if (learn->parsed())
      return cmd_learn_compat(learn_manifest, learn_out, learn_k, learn_init, learn_max_iters);
    if (gridc->parsed()) return cmd_grid_search(grid_manifest, grid_path, grid_k);
    if (eval->parsed())
      return cmd_eval(pred_path, gt_path, trimap_widths, voc, num_labels, eval_csv);
    if (bench->parsed()) return cmd_bench_filter(bench_n, bench_d, bench_l, bench_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
