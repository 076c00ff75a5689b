#include "latticecrf/learning.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace latticecrf {

GroundTruthIndicator GroundTruthIndicator::from_labels(const std::vector<int32_t>& labels,
                                                       int num_labels) {
  if (num_labels < 1)
    throw std::invalid_argument("GroundTruthIndicator: need at least one label");
  if (labels.empty()) throw std::invalid_argument("GroundTruthIndicator: empty labeling");
  GroundTruthIndicator g;
  g.t = Matrix(static_cast<int>(labels.size()), num_labels, 0.0);
  g.is_void.assign(labels.size(), 0);
  for (size_t i = 0; i < labels.size(); i++) {
    int32_t l = labels[i];
    if (l == LabelMap::kVoid) {
      g.is_void[i] = 1;
      continue;
    }
    if (l < 0 || l >= num_labels)
      throw std::invalid_argument("GroundTruthIndicator: label outside [0, num_labels)");
    g.t(static_cast<int>(i), l) = 1.0;
    g.num_labeled++;
  }
  return g;
}

GroundTruthIndicator GroundTruthIndicator::from_labelmap(const LabelMap& map, int num_labels) {
  map.validate(num_labels);
  return from_labels(map.labels, num_labels);
}

namespace {

// [K V]_i = sum_m w_m sum_{j != i} k^m(f_i, f_j) V_j via unnormalized
// filtering; the filters include j == i with unit weight, subtracted here.
Matrix kernel_filtered_sums(const DenseCRFModel& model, const Matrix& v, FilterBackend backend) {
  Matrix out(v.rows(), v.cols(), 0.0);
  for (const auto& kernel : model.kernels()) {
    Matrix f = backend == FilterBackend::kLattice
                   ? kernel.lattice->filter(v, false)
                   : brute_force_filter(*kernel.features, kernel.spec, v, false);
    const double w = kernel.spec.weight;
    for (size_t i = 0; i < out.size(); i++)
      out.data()[i] += w * (f.data()[i] - v.data()[i]);
  }
  return out;
}

// S_ab = sum_i A_ia B_ib. A's void rows are zero, which keeps void pixels
// out of the sum.
Matrix pair_sums(const Matrix& a, const Matrix& b) {
  const int L = a.cols();
  Matrix s(L, L, 0.0);
  for (int i = 0; i < a.rows(); i++) {
    const double* ar = a.row(i);
    const double* br = b.row(i);
    for (int x = 0; x < L; x++) {
      if (ar[x] == 0.0) continue;
      double* sr = s.row(x);
      for (int y = 0; y < L; y++) sr[y] += ar[x] * br[y];
    }
  }
  return s;
}

Matrix masked_marginals(const Matrix& q, const std::vector<uint8_t>& is_void) {
  Matrix out = q;
  for (int i = 0; i < out.rows(); i++) {
    if (!is_void[i]) continue;
    double* r = out.row(i);
    for (int l = 0; l < out.cols(); l++) r[l] = 0.0;
  }
  return out;
}

void check_truth_shape(const DenseCRFModel& model, const GroundTruthIndicator& truth,
                       const char* where) {
  if (truth.t.rows() != model.num_pixels() || truth.t.cols() != model.num_labels() ||
      truth.is_void.size() != static_cast<size_t>(model.num_pixels()))
    throw std::invalid_argument(std::string(where) + ": ground truth shape does not match model");
}

}  // namespace

Matrix compatibility_gradient(const DenseCRFModel& model, const GroundTruthIndicator& truth,
                              const Matrix& q, FilterBackend backend) {
  check_truth_shape(model, truth, "compatibility_gradient");
  if (q.rows() != model.num_pixels() || q.cols() != model.num_labels())
    throw std::invalid_argument("compatibility_gradient: marginal shape does not match model");

  Matrix qm = masked_marginals(q, truth.is_void);
  Matrix kt = kernel_filtered_sums(model, truth.t, backend);
  Matrix kq = kernel_filtered_sums(model, qm, backend);
  Matrix tkt = pair_sums(truth.t, kt);
  Matrix qkq = pair_sums(qm, kq);

  const int L = model.num_labels();
  Matrix g(L, L);
  for (int a = 0; a < L; a++)
    for (int b = 0; b < L; b++) {
      double raw_ab = qkq(a, b) - tkt(a, b);
      double raw_ba = qkq(b, a) - tkt(b, a);
      g(a, b) = 0.5 * (raw_ab + raw_ba);
    }
  return g;
}

namespace {

int pack_size(int L) { return L * (L + 1) / 2; }

std::vector<double> pack_upper(const Matrix& mu) {
  std::vector<double> x;
  x.reserve(pack_size(mu.rows()));
  for (int a = 0; a < mu.rows(); a++)
    for (int b = a; b < mu.cols(); b++) x.push_back(mu(a, b));
  return x;
}

Matrix unpack_upper(const std::vector<double>& x, int L) {
  Matrix mu(L, L);
  size_t i = 0;
  for (int a = 0; a < L; a++)
    for (int b = a; b < L; b++) {
      mu(a, b) = x[i];
      mu(b, a) = x[i];
      i++;
    }
  return mu;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); i++) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

struct ExampleCache {
  Matrix tkt;       // mu-independent pairwise sums of the ground truth
  double unary_t;   // unary cost of the ground truth over labeled pixels
};

struct Eval {
  double f = 0.0;
  std::vector<double> g;
};

double mu_pair_energy(const Matrix& mu, const Matrix& sums) {
  double e = 0.0;
  for (int a = 0; a < mu.rows(); a++)
    for (int b = 0; b < mu.cols(); b++) e += mu(a, b) * sums(a, b);
  return 0.5 * e;
}

// Objective: mean over examples of
//   [unary(T) + 1/2 sum mu (T'KT)] - [sum Q log Q + sum Q unary + 1/2 sum mu (Q'KQ)]
// i.e. ground-truth energy minus the mean-field free energy of the current
// marginals. Decreasing it raises the likelihood estimate whose gradient is
// compatibility_gradient.
Eval evaluate_objective(std::vector<TrainingExample>& examples,
                        const std::vector<ExampleCache>& caches, const std::vector<double>& x,
                        const LearnConfig& cfg) {
  const int L = examples.front().model.num_labels();
  Matrix mu = unpack_upper(x, L);

  Eval ev;
  ev.g.assign(x.size(), 0.0);
  Matrix gsum(L, L, 0.0);

  for (size_t e = 0; e < examples.size(); e++) {
    DenseCRFModel& model = examples[e].model;
    const GroundTruthIndicator& truth = examples[e].truth;
    CompatibilityMatrix c;
    c.mu = mu;
    model.set_compatibility(c);

    Matrix q = run_inference(model, cfg.inference_iterations, cfg.backend);
    Matrix qm = masked_marginals(q, truth.is_void);
    Matrix kq = kernel_filtered_sums(model, qm, cfg.backend);
    Matrix qkq = pair_sums(qm, kq);

    double free_lin = 0.0;
    const Matrix& costs = model.unary().costs;
    for (int i = 0; i < q.rows(); i++) {
      const double* qi = q.row(i);
      const double* ci = costs.row(i);
      for (int l = 0; l < L; l++) {
        if (qi[l] > 0.0) free_lin += qi[l] * std::log(qi[l]);
        free_lin += qi[l] * ci[l];
      }
    }

    ev.f += caches[e].unary_t + mu_pair_energy(mu, caches[e].tkt) -
            (free_lin + mu_pair_energy(mu, qkq));
    for (int a = 0; a < L; a++)
      for (int b = 0; b < L; b++)
        gsum(a, b) += 0.5 * ((qkq(a, b) - caches[e].tkt(a, b)) +
                             (qkq(b, a) - caches[e].tkt(b, a)));
  }

  const double inv = 1.0 / static_cast<double>(examples.size());
  ev.f *= inv;
  // d/dmu_ab of the objective is the negated likelihood gradient; diagonal
  // entries appear once in the upper triangle but carry the 1/2 pair factor.
  size_t i = 0;
  for (int a = 0; a < L; a++)
    for (int b = a; b < L; b++) {
      double gab = gsum(a, b) * inv;
      ev.g[i++] = (a == b) ? -0.5 * gab : -gab;
    }
  return ev;
}

}  // namespace

FitResult fit_compatibility(std::vector<TrainingExample>& examples,
                            const CompatibilityMatrix& initial, const LearnConfig& config) {
  if (examples.empty()) throw std::invalid_argument("fit_compatibility: no training examples");
  initial.validate();
  const int L = initial.num_labels();
  for (auto& ex : examples) {
    if (ex.model.num_labels() != L)
      throw std::invalid_argument("fit_compatibility: label count differs across examples");
    check_truth_shape(ex.model, ex.truth, "fit_compatibility");
  }
  if (config.memory < 1 || config.max_iterations < 0)
    throw std::invalid_argument("fit_compatibility: bad optimizer configuration");

  std::vector<ExampleCache> caches;
  caches.reserve(examples.size());
  for (auto& ex : examples) {
    ExampleCache c;
    Matrix kt = kernel_filtered_sums(ex.model, ex.truth.t, config.backend);
    c.tkt = pair_sums(ex.truth.t, kt);
    c.unary_t = 0.0;
    const Matrix& costs = ex.model.unary().costs;
    for (int i = 0; i < ex.truth.t.rows(); i++) {
      if (ex.truth.is_void[i]) continue;
      for (int l = 0; l < L; l++)
        if (ex.truth.t(i, l) != 0.0) c.unary_t += costs(i, l);
    }
    caches.push_back(std::move(c));
  }

  std::vector<double> x = pack_upper(initial.mu);
  Eval cur = evaluate_objective(examples, caches, x, config);

  FitResult result;
  result.objective_trace.push_back(cur.f);

  std::deque<std::vector<double>> hist_s, hist_y;
  std::deque<double> hist_rho;

  for (int iter = 0; iter < config.max_iterations; iter++) {
    if (norm2(cur.g) <= config.gradient_tolerance) break;

    // Two-loop recursion for the search direction.
    std::vector<double> p = cur.g;
    std::vector<double> alpha(hist_s.size());
    for (int h = static_cast<int>(hist_s.size()) - 1; h >= 0; h--) {
      alpha[h] = hist_rho[h] * dot(hist_s[h], p);
      for (size_t k = 0; k < p.size(); k++) p[k] -= alpha[h] * hist_y[h][k];
    }
    if (!hist_s.empty()) {
      double gamma = dot(hist_s.back(), hist_y.back()) / dot(hist_y.back(), hist_y.back());
      for (double& v : p) v *= gamma;
    }
    for (size_t h = 0; h < hist_s.size(); h++) {
      double beta = hist_rho[h] * dot(hist_y[h], p);
      for (size_t k = 0; k < p.size(); k++) p[k] += (alpha[h] - beta) * hist_s[h][k];
    }
    for (double& v : p) v = -v;

    double slope = dot(cur.g, p);
    if (slope >= 0.0) {  // not a descent direction; fall back to steepest descent
      for (size_t k = 0; k < p.size(); k++) p[k] = -cur.g[k];
      slope = dot(cur.g, p);
    }

    // Backtracking line search with step halving.
    double step = 1.0;
    bool accepted = false;
    Eval next;
    std::vector<double> x_next(x.size());
    for (int h = 0; h <= config.max_step_halvings; h++) {
      for (size_t k = 0; k < x.size(); k++) x_next[k] = x[k] + step * p[k];
      next = evaluate_objective(examples, caches, x_next, config);
      if (next.f <= cur.f + config.armijo_c * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    std::vector<double> s(x.size()), y(x.size());
    for (size_t k = 0; k < x.size(); k++) {
      s[k] = x_next[k] - x[k];
      y[k] = next.g[k] - cur.g[k];
    }
    double sy = dot(s, y);
    if (sy > 1e-12 * norm2(s) * norm2(y)) {
      hist_s.push_back(std::move(s));
      hist_y.push_back(std::move(y));
      hist_rho.push_back(1.0 / sy);
      if (static_cast<int>(hist_s.size()) > config.memory) {
        hist_s.pop_front();
        hist_y.pop_front();
        hist_rho.pop_front();
      }
    }

    x = std::move(x_next);
    cur = std::move(next);
    result.iterations = iter + 1;
    result.objective_trace.push_back(cur.f);
  }

  result.compatibility.mu = unpack_upper(x, L);
  result.gradient_norm = norm2(cur.g);
  for (auto& ex : examples) ex.model.set_compatibility(result.compatibility);
  return result;
}

namespace {

KernelSpec unit_kernel(int dim, double weight) {
  KernelSpec k;
  k.inv_stddevs.assign(dim, 1.0);
  k.weight = weight;
  return k;
}

void check_example(const LabeledExample& ex) {
  ex.unary.validate();
  if (ex.image.width != ex.unary.width || ex.image.height != ex.unary.height)
    throw std::invalid_argument("search: image/unary shape mismatch");
  ex.gt.validate(ex.unary.num_labels);
  if (ex.gt.width != ex.unary.width || ex.gt.height != ex.unary.height)
    throw std::invalid_argument("search: ground-truth/unary shape mismatch");
}

// Returns (correct, labeled) for one example under the given appearance
// parameters.
std::pair<long, long> score_example(const LabeledExample& ex, double w1, double theta_alpha,
                                    double theta_beta, bool with_smoothness,
                                    const SearchConfig& cfg) {
  DenseCRFModel model(ex.unary, CompatibilityMatrix::potts(ex.unary.num_labels));
  model.set_normalize_messages(cfg.normalize);
  model.add_kernel(unit_kernel(5, w1), build_appearance_features(ex.image, theta_alpha, theta_beta));
  if (with_smoothness && cfg.w2 > 0.0)
    model.add_kernel(unit_kernel(2, cfg.w2),
                     build_smoothness_features(ex.unary.width, ex.unary.height, cfg.theta_gamma));
  Matrix q = run_inference(model, cfg.iterations, cfg.backend);
  std::vector<int32_t> pred = map_labeling(q);
  long correct = 0, labeled = 0;
  for (size_t i = 0; i < pred.size(); i++) {
    int32_t g = ex.gt.labels[i];
    if (g == LabelMap::kVoid) continue;
    labeled++;
    if (pred[i] == g) correct++;
  }
  return {correct, labeled};
}

}  // namespace

GridSearchResult grid_search_kernel_params(const std::vector<LabeledExample>& examples,
                                           const GridSpec& grid, const SearchConfig& config) {
  if (examples.empty()) throw std::invalid_argument("grid_search: no examples");
  if (grid.w1.empty() || grid.theta_alpha.empty() || grid.theta_beta.empty())
    throw std::invalid_argument("grid_search: empty grid axis");
  for (double w : grid.w1)
    if (w < 0.0 || !std::isfinite(w)) throw std::invalid_argument("grid_search: bad w1 value");
  for (double t : grid.theta_alpha)
    if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("grid_search: bad theta_alpha");
  for (double t : grid.theta_beta)
    if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("grid_search: bad theta_beta");
  for (const auto& ex : examples) check_example(ex);

  GridSearchResult result;
  bool have_best = false;
  for (double w1 : grid.w1)
    for (double ta : grid.theta_alpha)
      for (double tb : grid.theta_beta) {
        long correct = 0, labeled = 0;
        for (const auto& ex : examples) {
          auto [c, n] = score_example(ex, w1, ta, tb, true, config);
          correct += c;
          labeled += n;
        }
        if (labeled == 0) throw std::invalid_argument("grid_search: no labeled pixels");
        GridPoint pt{w1, ta, tb, 100.0 * correct / labeled};
        result.evaluated.push_back(pt);
        if (!have_best || pt.accuracy > result.best.accuracy) {
          result.best = pt;
          have_best = true;
        }
      }
  return result;
}

SweepResult parameter_sweep(const std::vector<LabeledExample>& examples, double w1,
                            const std::vector<double>& theta_alphas,
                            const std::vector<double>& theta_betas, const SearchConfig& config) {
  if (examples.empty()) throw std::invalid_argument("parameter_sweep: no examples");
  if (theta_alphas.empty() || theta_betas.empty())
    throw std::invalid_argument("parameter_sweep: empty axis");
  if (w1 < 0.0 || !std::isfinite(w1)) throw std::invalid_argument("parameter_sweep: bad w1");
  for (const auto& ex : examples) check_example(ex);

  SweepResult result;
  result.theta_alpha = theta_alphas;
  result.theta_beta = theta_betas;
  result.accuracy = Matrix(static_cast<int>(theta_alphas.size()),
                           static_cast<int>(theta_betas.size()), 0.0);
  for (size_t ai = 0; ai < theta_alphas.size(); ai++)
    for (size_t bi = 0; bi < theta_betas.size(); bi++) {
      long correct = 0, labeled = 0;
      for (const auto& ex : examples) {
        auto [c, n] =
            score_example(ex, w1, theta_alphas[ai], theta_betas[bi], false, config);
        correct += c;
        labeled += n;
      }
      if (labeled == 0) throw std::invalid_argument("parameter_sweep: no labeled pixels");
      result.accuracy(static_cast<int>(ai), static_cast<int>(bi)) = 100.0 * correct / labeled;
    }
  return result;
}

}  // namespace latticecrf
