#include "latticecrf/crf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace latticecrf {

void UnaryField::validate() const {
  if (width < 1 || height < 1) throw std::invalid_argument("UnaryField: empty image");
  if (num_labels < 1) throw std::invalid_argument("UnaryField: need at least one label");
  if (costs.rows() != num_pixels() || costs.cols() != num_labels)
    throw std::invalid_argument("UnaryField: cost matrix shape mismatch");
  for (size_t i = 0; i < costs.size(); i++)
    if (!std::isfinite(costs.data()[i]))
      throw std::invalid_argument("UnaryField: non-finite cost");
}

CompatibilityMatrix CompatibilityMatrix::potts(int num_labels) {
  if (num_labels < 1) throw std::invalid_argument("CompatibilityMatrix: need at least one label");
  CompatibilityMatrix c;
  c.mu = Matrix(num_labels, num_labels, 1.0);
  for (int l = 0; l < num_labels; l++) c.mu(l, l) = 0.0;
  return c;
}

void CompatibilityMatrix::validate() const {
  if (mu.rows() < 1 || mu.rows() != mu.cols())
    throw std::invalid_argument("CompatibilityMatrix: must be square and non-empty");
  for (int a = 0; a < mu.rows(); a++)
    for (int b = 0; b < mu.cols(); b++) {
      if (!std::isfinite(mu(a, b)))
        throw std::invalid_argument("CompatibilityMatrix: non-finite entry");
      if (mu(a, b) != mu(b, a))
        throw std::invalid_argument("CompatibilityMatrix: not symmetric");
    }
}

FeatureMatrix build_appearance_features(const Image& image, double theta_alpha,
                                        double theta_beta) {
  if (image.width < 1 || image.height < 1)
    throw std::invalid_argument("build_appearance_features: empty image");
  if (!(theta_alpha > 0.0) || !std::isfinite(theta_alpha) || !(theta_beta > 0.0) ||
      !std::isfinite(theta_beta))
    throw std::invalid_argument("build_appearance_features: bandwidths must be positive");
  FeatureMatrix f(image.num_pixels(), 5);
  const double sp = 1.0 / theta_alpha;
  const double cl = 1.0 / theta_beta;
  int i = 0;
  for (int y = 0; y < image.height; y++)
    for (int x = 0; x < image.width; x++, i++) {
      const uint8_t* px = image.at(x, y);
      double* row = f.row(i);
      row[0] = sp * x;
      row[1] = sp * y;
      row[2] = cl * px[0];
      row[3] = cl * px[1];
      row[4] = cl * px[2];
    }
  return f;
}

FeatureMatrix build_smoothness_features(int width, int height, double theta_gamma) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("build_smoothness_features: empty image");
  if (!(theta_gamma > 0.0) || !std::isfinite(theta_gamma))
    throw std::invalid_argument("build_smoothness_features: bandwidth must be positive");
  FeatureMatrix f(width * height, 2);
  const double sp = 1.0 / theta_gamma;
  int i = 0;
  for (int y = 0; y < height; y++)
    for (int x = 0; x < width; x++, i++) {
      f.at(i, 0) = sp * x;
      f.at(i, 1) = sp * y;
    }
  return f;
}

DenseCRFModel::DenseCRFModel(UnaryField unary, CompatibilityMatrix compatibility)
    : unary_(std::move(unary)), compatibility_(std::move(compatibility)) {
  unary_.validate();
  compatibility_.validate();
  if (compatibility_.num_labels() != unary_.num_labels)
    throw std::invalid_argument("DenseCRFModel: compatibility size does not match label count");
}

void DenseCRFModel::add_kernel(const KernelSpec& spec, FeatureMatrix features) {
  spec.validate();
  features.validate();
  if (features.n_points != num_pixels())
    throw std::invalid_argument("DenseCRFModel::add_kernel: feature count does not match pixels");
  if (spec.dim() != features.dim)
    throw std::invalid_argument("DenseCRFModel::add_kernel: kernel/feature dimension mismatch");
  Kernel k;
  k.spec = spec;
  k.lattice = std::make_shared<PermutohedralLattice>(whiten_features(features, spec));
  k.features = std::make_shared<FeatureMatrix>(std::move(features));
  kernels_.push_back(std::move(k));
}

void DenseCRFModel::set_compatibility(CompatibilityMatrix c) {
  c.validate();
  if (c.num_labels() != unary_.num_labels)
    throw std::invalid_argument("DenseCRFModel: compatibility size does not match label count");
  compatibility_ = std::move(c);
}

namespace {

// out = row-wise softmax of -energy, with the max shifted out before
// exponentiation.
void softmax_neg_rows(const Matrix& energy, Matrix& out) {
  const int n = energy.rows();
  const int L = energy.cols();
  for (int i = 0; i < n; i++) {
    const double* e = energy.row(i);
    double* o = out.row(i);
    double top = -e[0];
    for (int l = 1; l < L; l++) top = std::max(top, -e[l]);
    double sum = 0.0;
    for (int l = 0; l < L; l++) {
      o[l] = std::exp(-e[l] - top);
      sum += o[l];
    }
    double inv = 1.0 / sum;
    for (int l = 0; l < L; l++) o[l] *= inv;
  }
}

void check_marginals_shape(const DenseCRFModel& model, const Matrix& q, const char* where) {
  if (q.rows() != model.num_pixels() || q.cols() != model.num_labels())
    throw std::invalid_argument(std::string(where) + ": marginal shape does not match model");
}

}  // namespace

MarginalField init_marginals(const UnaryField& unary) {
  unary.validate();
  Matrix q(unary.num_pixels(), unary.num_labels);
  softmax_neg_rows(unary.costs, q);
  return q;
}

std::vector<Matrix> message_pass(const DenseCRFModel& model, const Matrix& q,
                                 FilterBackend backend) {
  check_marginals_shape(model, q, "message_pass");
  const int n = model.num_pixels();
  const int L = model.num_labels();
  std::vector<Matrix> out;
  out.reserve(model.kernels().size());

  for (const auto& kernel : model.kernels()) {
    Matrix raw;
    const double* khat = nullptr;
    std::vector<double> khat_storage;
    if (backend == FilterBackend::kLattice) {
      raw = kernel.lattice->filter(q, false);
      khat = kernel.lattice->normalization().data();
    } else {
      raw = brute_force_filter(*kernel.features, kernel.spec, q, false);
      Matrix ones(n, 1, 1.0);
      Matrix sums = brute_force_filter(*kernel.features, kernel.spec, ones, false);
      khat_storage.resize(n);
      for (int i = 0; i < n; i++) khat_storage[i] = sums(i, 0);
      khat = khat_storage.data();
    }

    // The filter sums over all j including i with k(f_i, f_i) = 1; remove
    // the self message before normalizing.
    if (model.normalize_messages()) {
      for (int i = 0; i < n; i++) {
        double inv = 1.0 / std::max(khat[i], 1e-20);
        double* r = raw.row(i);
        const double* qi = q.row(i);
        for (int l = 0; l < L; l++) r[l] = (r[l] - qi[l]) * inv;
      }
    } else {
      for (int i = 0; i < n; i++) {
        double* r = raw.row(i);
        const double* qi = q.row(i);
        for (int l = 0; l < L; l++) r[l] -= qi[l];
      }
    }
    out.push_back(std::move(raw));
  }
  return out;
}

Matrix compatibility_transform(const DenseCRFModel& model, const std::vector<Matrix>& messages) {
  if (messages.size() != model.kernels().size())
    throw std::invalid_argument("compatibility_transform: one message block per kernel expected");
  const int n = model.num_pixels();
  const int L = model.num_labels();

  Matrix combined(n, L, 0.0);
  for (size_t m = 0; m < messages.size(); m++) {
    if (messages[m].rows() != n || messages[m].cols() != L)
      throw std::invalid_argument("compatibility_transform: message shape does not match model");
    const double w = model.kernels()[m].spec.weight;
    const double* src = messages[m].data();
    double* dst = combined.data();
    for (size_t i = 0; i < combined.size(); i++) dst[i] += w * src[i];
  }

  const Matrix& mu = model.compatibility().mu;
  Matrix out(n, L);
  for (int i = 0; i < n; i++) {
    const double* s = combined.row(i);
    double* o = out.row(i);
    for (int a = 0; a < L; a++) {
      const double* mrow = mu.row(a);
      double acc = 0.0;
      for (int b = 0; b < L; b++) acc += mrow[b] * s[b];
      o[a] = acc;
    }
  }
  return out;
}

MarginalField mean_field_iteration(const DenseCRFModel& model, const Matrix& q,
                                   FilterBackend backend) {
  check_marginals_shape(model, q, "mean_field_iteration");
  Matrix qhat = compatibility_transform(model, message_pass(model, q, backend));
  const Matrix& costs = model.unary().costs;
  Matrix energy(q.rows(), q.cols());
  for (size_t i = 0; i < energy.size(); i++)
    energy.data()[i] = costs.data()[i] + qhat.data()[i];
  Matrix out(q.rows(), q.cols());
  softmax_neg_rows(energy, out);
  return out;
}

MarginalField run_inference(const DenseCRFModel& model, int iterations, FilterBackend backend,
                            std::vector<double>* kl_trace) {
  if (iterations < 0) throw std::invalid_argument("run_inference: negative iteration count");
  MarginalField q = init_marginals(model.unary());
  if (kl_trace) {
    kl_trace->clear();
    kl_trace->reserve(iterations + 1);
    kl_trace->push_back(kl_divergence_estimate(model, q, backend));
  }
  for (int t = 0; t < iterations; t++) {
    q = mean_field_iteration(model, q, backend);
    if (kl_trace) kl_trace->push_back(kl_divergence_estimate(model, q, backend));
  }
  return q;
}

std::vector<int32_t> map_labeling(const Matrix& q) {
  if (q.rows() < 1 || q.cols() < 1) throw std::invalid_argument("map_labeling: empty marginals");
  std::vector<int32_t> labels(q.rows());
  for (int i = 0; i < q.rows(); i++) {
    const double* row = q.row(i);
    int best = 0;
    for (int l = 1; l < q.cols(); l++)
      if (row[l] > row[best]) best = l;
    labels[i] = best;
  }
  return labels;
}

double gibbs_energy(const DenseCRFModel& model, const std::vector<int32_t>& labeling) {
  const int n = model.num_pixels();
  const int L = model.num_labels();
  if (static_cast<int>(labeling.size()) != n)
    throw std::invalid_argument("gibbs_energy: labeling size does not match pixels");
  for (int32_t l : labeling)
    if (l < 0 || l >= L) throw std::invalid_argument("gibbs_energy: label out of range");
  if (n > kBruteForceCap)
    throw std::invalid_argument("gibbs_energy: point count exceeds cap");

  double energy = 0.0;
  const Matrix& costs = model.unary().costs;
  for (int i = 0; i < n; i++) energy += costs(i, labeling[i]);

  const Matrix& mu = model.compatibility().mu;
  std::vector<FeatureMatrix> whitened;
  whitened.reserve(model.kernels().size());
  for (const auto& k : model.kernels()) whitened.push_back(whiten_features(*k.features, k.spec));

  for (int i = 0; i < n; i++) {
    for (int j = i + 1; j < n; j++) {
      double m = mu(labeling[i], labeling[j]);
      if (m == 0.0) continue;
      double pair = 0.0;
      for (size_t ki = 0; ki < whitened.size(); ki++) {
        const double* fi = whitened[ki].row(i);
        const double* fj = whitened[ki].row(j);
        double dist2 = 0.0;
        for (int c = 0; c < whitened[ki].dim; c++) {
          double diff = fi[c] - fj[c];
          dist2 += diff * diff;
        }
        pair += model.kernels()[ki].spec.weight * std::exp(-0.5 * dist2);
      }
      energy += m * pair;
    }
  }
  return energy;
}

double kl_divergence_estimate(const DenseCRFModel& model, const Matrix& q,
                              FilterBackend backend) {
  check_marginals_shape(model, q, "kl_divergence_estimate");
  Matrix qhat = compatibility_transform(model, message_pass(model, q, backend));
  const Matrix& costs = model.unary().costs;
  double kl = 0.0;
  for (int i = 0; i < q.rows(); i++) {
    const double* qi = q.row(i);
    const double* ci = costs.row(i);
    const double* hi = qhat.row(i);
    for (int l = 0; l < q.cols(); l++) {
      if (qi[l] > 0.0) kl += qi[l] * std::log(qi[l]);
      kl += qi[l] * (ci[l] + 0.5 * hi[l]);
    }
  }
  return kl;
}

}  // namespace latticecrf
