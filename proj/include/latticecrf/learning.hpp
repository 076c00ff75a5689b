#pragma once

#include <cstdint>
#include <vector>

#include "latticecrf/crf.hpp"
#include "latticecrf/metrics.hpp"

namespace latticecrf {

// One-hot ground-truth rows T_i(a); void pixels have all-zero rows and are
// excluded from learning sums.
struct GroundTruthIndicator {
  Matrix t;                      // N x L
  std::vector<uint8_t> is_void;  // N
  int num_labeled = 0;

  static GroundTruthIndicator from_labels(const std::vector<int32_t>& labels, int num_labels);
  static GroundTruthIndicator from_labelmap(const LabelMap& map, int num_labels);
};

// Estimated log-likelihood gradient with respect to the compatibility
// entries:
//   G(a, b) = -sum_i T_ia [K T]_ib + sum_i Q_ia [K Q]_ib
// where [K V]_i = sum_m w_m sum_{j != i} k^m(f_i, f_j) V_j, computed with
// unnormalized filtering, void rows zeroed before filtering, and void
// pixels skipped in the outer sums. Returned symmetrized: (G + G^T) / 2.
Matrix compatibility_gradient(const DenseCRFModel& model, const GroundTruthIndicator& truth,
                              const Matrix& q, FilterBackend backend = FilterBackend::kLattice);

struct TrainingExample {
  DenseCRFModel model;
  GroundTruthIndicator truth;
};

struct LearnConfig {
  int memory = 10;                // L-BFGS history pairs
  int max_iterations = 100;
  double gradient_tolerance = 1e-4;
  double armijo_c = 1e-4;         // sufficient-decrease constant
  int max_step_halvings = 30;
  int inference_iterations = 10;
  FilterBackend backend = FilterBackend::kLattice;
};

struct FitResult {
  CompatibilityMatrix compatibility;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<double> objective_trace;  // objective before each accepted step + final
};

// Maximum-likelihood refinement of the symmetric compatibility matrix by
// L-BFGS over its upper triangle. The models' compatibilities are updated
// in place as the optimizer moves; kernels and lattices are reused across
// evaluations. The objective couples the ground-truth pairwise cost with
// the mean-field free energy of the current marginals, so its compatibility
// gradient is the (negated) estimate above.
FitResult fit_compatibility(std::vector<TrainingExample>& examples,
                            const CompatibilityMatrix& initial, const LearnConfig& config = {});

// Image + unary + ground truth triple used by the parameter searches.
struct LabeledExample {
  Image image;
  UnaryField unary;
  LabelMap gt;
};

// Shared inference settings for searches: the smoothness kernel stays fixed
// while the appearance kernel is searched.
struct SearchConfig {
  double w2 = 1.0;
  double theta_gamma = 1.0;
  int iterations = 10;
  bool normalize = true;
  FilterBackend backend = FilterBackend::kLattice;
};

struct GridSpec {
  std::vector<double> w1;
  std::vector<double> theta_alpha;
  std::vector<double> theta_beta;
};

struct GridPoint {
  double w1 = 0.0;
  double theta_alpha = 0.0;
  double theta_beta = 0.0;
  double accuracy = 0.0;  // percent
};

struct GridSearchResult {
  GridPoint best;
  std::vector<GridPoint> evaluated;  // grid order: w1 outer, then alpha, then beta
};

// Exhaustive search maximizing global accuracy over the labeled examples.
// Ties keep the earliest grid point.
GridSearchResult grid_search_kernel_params(const std::vector<LabeledExample>& examples,
                                           const GridSpec& grid,
                                           const SearchConfig& config = {});

struct SweepResult {
  std::vector<double> theta_alpha;
  std::vector<double> theta_beta;
  Matrix accuracy;  // percent, alphas on rows, betas on columns
};

// Accuracy surface over (theta_alpha, theta_beta) with the appearance kernel
// only (the smoothness kernel is dropped so the sweep isolates the
// appearance parameters).
SweepResult parameter_sweep(const std::vector<LabeledExample>& examples, double w1,
                            const std::vector<double>& theta_alphas,
                            const std::vector<double>& theta_betas,
                            const SearchConfig& config = {});

}  // namespace latticecrf
