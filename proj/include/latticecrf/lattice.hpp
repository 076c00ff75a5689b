#pragma once

#include <cstdint>
#include <vector>

#include "latticecrf/matrix.hpp"

namespace latticecrf {

// Point cloud in feature space, one d-dimensional feature vector per point,
// stored row-major.
struct FeatureMatrix {
  int n_points = 0;
  int dim = 0;
  std::vector<double> values;

  FeatureMatrix() = default;
  FeatureMatrix(int n, int d)
      : n_points(n), dim(d), values(static_cast<size_t>(n) * d, 0.0) {}

  double& at(int i, int j) { return values[static_cast<size_t>(i) * dim + j]; }
  double at(int i, int j) const { return values[static_cast<size_t>(i) * dim + j]; }
  double* row(int i) { return values.data() + static_cast<size_t>(i) * dim; }
  const double* row(int i) const { return values.data() + static_cast<size_t>(i) * dim; }

  // Throws std::invalid_argument on empty shape, size mismatch, or
  // non-finite entries.
  void validate() const;
};

// Diagonal Gaussian kernel: weight * exp(-1/2 sum_j inv_stddevs[j]^2 (f_i[j]-f_j[j])^2).
struct KernelSpec {
  std::vector<double> inv_stddevs;
  double weight = 1.0;

  static KernelSpec from_stddevs(const std::vector<double>& stddevs, double weight = 1.0);

  int dim() const { return static_cast<int>(inv_stddevs.size()); }

  // Throws std::invalid_argument on non-positive or non-finite bandwidths,
  // or negative / non-finite weight.
  void validate() const;
};

// Scales each feature column by the kernel's inverse standard deviation, so
// the kernel becomes a unit Gaussian in the output space.
FeatureMatrix whiten_features(const FeatureMatrix& features, const KernelSpec& kernel);

// Exact O(N^2) Gaussian filter, the correctness oracle for the lattice.
// Refuses inputs with more than kBruteForceCap points.
inline constexpr int kBruteForceCap = 10000;
Matrix brute_force_filter(const FeatureMatrix& features, const KernelSpec& kernel,
                          const Matrix& values, bool normalize);

// Permutohedral-lattice approximation of the Gaussian transform
//   out_i = sum_j exp(-1/2 ||f_i - f_j||^2) values_j
// over whitened features f. Construction embeds the points into the
// hyperplane sum(x)=0 in R^{d+1}, finds the enclosing lattice simplex of
// each point, and precomputes barycentric weights plus the blur adjacency.
// Immutable after construction; filter() is const and safe to share.
class PermutohedralLattice {
 public:
  explicit PermutohedralLattice(const FeatureMatrix& whitened_features);

  int num_points() const { return n_; }
  int dim() const { return d_; }
  int num_vertices() const { return m_; }

  // values is num_points x L. normalize divides each output row by the
  // filtered all-ones response of that point (clamped at 1e-20).
  Matrix filter(const Matrix& values, bool normalize) const;

  // Pipeline stages, exposed for inspection. filter() composes them.
  Matrix splat(const Matrix& values) const;          // num_points x L -> num_vertices x L
  Matrix blur(const Matrix& vertex_values) const;    // [1,2,1]/4 along axes 0..d
  Matrix slice(const Matrix& vertex_values) const;   // num_vertices x L -> num_points x L

  // Filtered all-ones response per point.
  const std::vector<double>& normalization() const { return norm_; }

  // Enclosing-simplex bookkeeping for point i: d+1 vertex ids and weights.
  const int32_t* simplex_vertices(int i) const { return &offsets_[static_cast<size_t>(i) * (d_ + 1)]; }
  const double* simplex_weights(int i) const { return &barycentric_[static_cast<size_t>(i) * (d_ + 1)]; }

  // Full (d+1)-dimensional lattice key of vertex m; coordinates sum to zero.
  std::vector<int32_t> vertex_key(int m) const;

 private:
  void splat_into(const double* in, int num_cols, double* vertex_buf) const;
  double* blur_pingpong(double* buf, double* scratch, int num_cols) const;
  void slice_from(const double* vertex_buf, int num_cols, double* out) const;

  int n_ = 0;
  int d_ = 0;
  int m_ = 0;
  double slice_scale_ = 1.0;
  std::vector<int32_t> offsets_;      // n*(d+1), vertex id per point/remainder
  std::vector<double> barycentric_;   // n*(d+1)
  std::vector<int32_t> blur_n1_;      // (d+1)*m, neighbor id + 1, 0 = absent
  std::vector<int32_t> blur_n2_;
  std::vector<int32_t> keys_;         // m*d, first d lattice coordinates
  std::vector<double> norm_;          // n, filtered ones
};

Matrix lattice_filter(const PermutohedralLattice& lattice, const Matrix& values, bool normalize);

}  // namespace latticecrf
