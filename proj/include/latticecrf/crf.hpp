#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "latticecrf/lattice.hpp"
#include "latticecrf/matrix.hpp"

namespace latticecrf {

// 8-bit RGB image, row-major, interleaved channels.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

  uint8_t* at(int x, int y) { return pixels.data() + 3 * (static_cast<size_t>(y) * width + x); }
  const uint8_t* at(int x, int y) const {
    return pixels.data() + 3 * (static_cast<size_t>(y) * width + x);
  }
  int num_pixels() const { return width * height; }
};

// Per-pixel label costs (negative log unary potentials), N x L with pixels
// in row-major image order.
struct UnaryField {
  int width = 0;
  int height = 0;
  int num_labels = 0;
  Matrix costs;

  UnaryField() = default;
  UnaryField(int w, int h, int labels)
      : width(w), height(h), num_labels(labels), costs(w * h, labels, 0.0) {}

  int num_pixels() const { return width * height; }

  // Throws std::invalid_argument on empty shape, storage mismatch, or
  // non-finite costs.
  void validate() const;
};

// Symmetric L x L label compatibility function mu(a, b). Positive entries
// penalise co-occurrence of the pair across an edge.
struct CompatibilityMatrix {
  Matrix mu;

  static CompatibilityMatrix potts(int num_labels);

  int num_labels() const { return mu.rows(); }

  // Throws std::invalid_argument unless mu is square, finite, and exactly
  // symmetric.
  void validate() const;
};

// (x, y, r, g, b) scaled by (1/theta_alpha, 1/theta_alpha, 1/theta_beta,
// 1/theta_beta, 1/theta_beta). The paired KernelSpec is all-ones since the
// scaling is already applied.
FeatureMatrix build_appearance_features(const Image& image, double theta_alpha, double theta_beta);

// (x, y) scaled by 1/theta_gamma.
FeatureMatrix build_smoothness_features(int width, int height, double theta_gamma);

enum class FilterBackend {
  kLattice,     // permutohedral approximation, O(N)
  kBruteForce,  // exact pairwise sums, O(N^2), capped
};

// Fully connected pairwise CRF with Gaussian-mixture edge potentials.
// Kernels own an immutable lattice built once at add_kernel time, so copies
// of the model (e.g. with a different compatibility) share the expensive
// structures.
class DenseCRFModel {
 public:
  struct Kernel {
    KernelSpec spec;  // inv_stddevs all ones when features are pre-scaled
    std::shared_ptr<const FeatureMatrix> features;
    std::shared_ptr<const PermutohedralLattice> lattice;
  };

  DenseCRFModel(UnaryField unary, CompatibilityMatrix compatibility);

  // Whitens the features, builds the lattice, appends the kernel.
  void add_kernel(const KernelSpec& spec, FeatureMatrix features);

  int num_pixels() const { return unary_.num_pixels(); }
  int num_labels() const { return unary_.num_labels; }

  const UnaryField& unary() const { return unary_; }
  const CompatibilityMatrix& compatibility() const { return compatibility_; }
  void set_compatibility(CompatibilityMatrix c);
  const std::vector<Kernel>& kernels() const { return kernels_; }

  // Message normalization: divide filtered messages by the per-pixel
  // all-ones kernel response. On by default.
  bool normalize_messages() const { return normalize_messages_; }
  void set_normalize_messages(bool on) { normalize_messages_ = on; }

 private:
  UnaryField unary_;
  CompatibilityMatrix compatibility_;
  std::vector<Kernel> kernels_;
  bool normalize_messages_ = true;
};

using MarginalField = Matrix;  // N x L, rows on the simplex

// Softmax of the negated unary costs, the mean-field starting point.
MarginalField init_marginals(const UnaryField& unary);

// One filtered message per kernel: Qt_i(l) = sum_{j != i} k(f_i, f_j) q_j(l),
// normalized per pixel when the model says so. Kernel weights are NOT
// applied here; compatibility_transform folds them in.
std::vector<Matrix> message_pass(const DenseCRFModel& model, const Matrix& q,
                                 FilterBackend backend = FilterBackend::kLattice);

// Qh_i(a) = sum_b mu(a, b) sum_m w_m Qt^m_i(b).
Matrix compatibility_transform(const DenseCRFModel& model, const std::vector<Matrix>& messages);

// Parallel mean-field update: softmax_i(-unary - Qh).
MarginalField mean_field_iteration(const DenseCRFModel& model, const Matrix& q,
                                   FilterBackend backend = FilterBackend::kLattice);

// Runs `iterations` updates from init_marginals. If kl_trace is non-null it
// receives iterations+1 KL estimates, entry t being the value before
// iteration t+1 (entry 0 = initialization, last entry = final marginals).
MarginalField run_inference(const DenseCRFModel& model, int iterations,
                            FilterBackend backend = FilterBackend::kLattice,
                            std::vector<double>* kl_trace = nullptr);

// Argmax label per pixel; ties resolve to the lowest label index.
std::vector<int32_t> map_labeling(const Matrix& q);

// Exact Gibbs energy of a labeling, O(N^2). Refuses N > kBruteForceCap.
double gibbs_energy(const DenseCRFModel& model, const std::vector<int32_t>& labeling);

// KL(Q || P) up to the constant log Z:
//   sum_i sum_l Q log Q + sum_i sum_l Q * unary + 1/2 sum_i sum_a Q_ia Qh_ia.
double kl_divergence_estimate(const DenseCRFModel& model, const Matrix& q,
                              FilterBackend backend = FilterBackend::kLattice);

}  // namespace latticecrf
