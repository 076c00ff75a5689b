#pragma once

// Shared synthetic fixtures, dense reference implementations, and error
// measures for the test binaries. The reference paths are direct O(N^2)
// evaluations that never touch the lattice code.

#include <algorithm>
#include <array>
#include <climits>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "latticecrf/crf.hpp"
#include "latticecrf/learning.hpp"
#include "latticecrf/metrics.hpp"

namespace fixtures {

using latticecrf::CompatibilityMatrix;
using latticecrf::DenseCRFModel;
using latticecrf::FeatureMatrix;
using latticecrf::GroundTruthIndicator;
using latticecrf::Image;
using latticecrf::KernelSpec;
using latticecrf::LabelMap;
using latticecrf::Matrix;
using latticecrf::UnaryField;

// Raw-engine draws so results do not depend on the standard library's
// distribution implementations.
inline double unit_real(std::mt19937& g) { return g() * (1.0 / 4294967296.0); }

inline double normal(std::mt19937& g) {
  double u1 = unit_real(g);
  while (u1 <= 1e-12) u1 = unit_real(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * unit_real(g));
}

inline int uniform_int(std::mt19937& g, int n) {
  return static_cast<int>(g() % static_cast<unsigned>(n));
}

inline FeatureMatrix normal_points(int n, int d, double spread, std::mt19937& g) {
  FeatureMatrix f(n, d);
  for (double& v : f.values) v = spread * normal(g);
  return f;
}

inline Matrix random_values(int rows, int cols, std::mt19937& g) {
  Matrix m(rows, cols);
  for (size_t i = 0; i < m.size(); i++) m.data()[i] = unit_real(g);
  return m;
}

inline Image random_image(int w, int h, std::mt19937& g) {
  Image img(w, h);
  for (uint8_t& px : img.pixels) px = static_cast<uint8_t>(uniform_int(g, 256));
  return img;
}

inline UnaryField random_unary(int w, int h, int num_labels, double scale, std::mt19937& g) {
  UnaryField u(w, h, num_labels);
  for (size_t i = 0; i < u.costs.size(); i++) u.costs.data()[i] = scale * unit_real(g);
  return u;
}

inline KernelSpec unit_kernel(int dim, double weight = 1.0) {
  KernelSpec k;
  k.inv_stddevs.assign(dim, 1.0);
  k.weight = weight;
  return k;
}

inline double max_column_rel_l2(const Matrix& approx, const Matrix& exact) {
  double worst = 0.0;
  for (int c = 0; c < exact.cols(); c++) {
    double num = 0.0;
    double den = 0.0;
    for (int r = 0; r < exact.rows(); r++) {
      double d = approx(r, c) - exact(r, c);
      num += d * d;
      den += exact(r, c) * exact(r, c);
    }
    worst = std::max(worst, std::sqrt(num / std::max(den, 1e-300)));
  }
  return worst;
}

inline double rel_l2(const Matrix& a, const Matrix& b) {
  double num = 0.0;
  double den = 0.0;
  for (size_t i = 0; i < a.size(); i++) {
    double d = a.data()[i] - b.data()[i];
    num += d * d;
    den += b.data()[i] * b.data()[i];
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); i++)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

// Pairwise mixture kernel matrix K_ij = sum_m w_m exp(-1/2 ||f_i - f_j||^2)
// over whitened features, evaluated directly.
inline Matrix dense_kernel_matrix(const DenseCRFModel& model) {
  const int n = model.num_pixels();
  Matrix k(n, n, 0.0);
  for (const auto& kernel : model.kernels()) {
    FeatureMatrix wf = latticecrf::whiten_features(*kernel.features, kernel.spec);
    for (int i = 0; i < n; i++)
      for (int j = 0; j < n; j++) {
        double d2 = 0.0;
        for (int c = 0; c < wf.dim; c++) {
          double diff = wf.at(i, c) - wf.at(j, c);
          d2 += diff * diff;
        }
        k(i, j) += kernel.spec.weight * std::exp(-0.5 * d2);
      }
  }
  return k;
}

// Dense mean-field update: per-kernel messages, compatibility transform,
// and stabilized softmax, all by direct summation over pixel pairs.
inline Matrix dense_mean_field_update(const DenseCRFModel& model, const Matrix& q) {
  const int n = model.num_pixels();
  const int L = model.num_labels();
  const Matrix& mu = model.compatibility().mu;

  Matrix combined(n, L, 0.0);
  for (const auto& kernel : model.kernels()) {
    FeatureMatrix wf = latticecrf::whiten_features(*kernel.features, kernel.spec);
    for (int i = 0; i < n; i++) {
      std::vector<double> msg(L, 0.0);
      double khat = 0.0;
      for (int j = 0; j < n; j++) {
        double d2 = 0.0;
        for (int c = 0; c < wf.dim; c++) {
          double diff = wf.at(i, c) - wf.at(j, c);
          d2 += diff * diff;
        }
        double k = std::exp(-0.5 * d2);
        khat += k;
        if (j == i) continue;
        for (int l = 0; l < L; l++) msg[l] += k * q(j, l);
      }
      double scale = model.normalize_messages() ? 1.0 / std::max(khat, 1e-20) : 1.0;
      for (int l = 0; l < L; l++) combined(i, l) += kernel.spec.weight * scale * msg[l];
    }
  }

  Matrix out(n, L);
  const Matrix& costs = model.unary().costs;
  std::vector<double> energy(L);
  for (int i = 0; i < n; i++) {
    for (int a = 0; a < L; a++) {
      double pair = 0.0;
      for (int b = 0; b < L; b++) pair += mu(a, b) * combined(i, b);
      energy[a] = costs(i, a) + pair;
    }
    double lo = *std::min_element(energy.begin(), energy.end());
    double sum = 0.0;
    for (int a = 0; a < L; a++) {
      out(i, a) = std::exp(lo - energy[a]);
      sum += out(i, a);
    }
    for (int a = 0; a < L; a++) out(i, a) /= sum;
  }
  return out;
}

// Dense likelihood-gradient estimate: double sum over ordered pixel pairs,
// void pixels skipped on both sides.
inline Matrix dense_compatibility_gradient(const DenseCRFModel& model,
                                           const GroundTruthIndicator& truth, const Matrix& q) {
  const int n = model.num_pixels();
  const int L = model.num_labels();
  Matrix kmat = dense_kernel_matrix(model);
  Matrix g(L, L, 0.0);
  for (int i = 0; i < n; i++) {
    if (truth.is_void[i]) continue;
    for (int j = 0; j < n; j++) {
      if (j == i || truth.is_void[j]) continue;
      double k = kmat(i, j);
      for (int a = 0; a < L; a++) {
        if (truth.t(i, a) != 0.0)
          for (int b = 0; b < L; b++) g(a, b) -= k * truth.t(j, b);
        double qa = q(i, a);
        if (qa == 0.0) continue;
        for (int b = 0; b < L; b++) g(a, b) += k * qa * q(j, b);
      }
    }
  }
  Matrix sym(L, L);
  for (int a = 0; a < L; a++)
    for (int b = 0; b < L; b++) sym(a, b) = 0.5 * (g(a, b) + g(b, a));
  return sym;
}

// Two vertical regions with distinct base colors plus uniform pixel noise.
inline Image two_region_image(int w, int h, int noise, std::mt19937& g) {
  Image img(w, h);
  const int base[2][3] = {{70, 90, 200}, {200, 130, 60}};
  for (int y = 0; y < h; y++)
    for (int x = 0; x < w; x++) {
      const int* c = base[x < w / 2 ? 0 : 1];
      uint8_t* px = img.at(x, y);
      for (int ch = 0; ch < 3; ch++) {
        int jitter = noise > 0 ? uniform_int(g, 2 * noise + 1) - noise : 0;
        px[ch] = static_cast<uint8_t>(std::clamp(c[ch] + jitter, 0, 255));
      }
    }
  return img;
}

inline LabelMap two_region_truth(int w, int h) {
  LabelMap map(w, h, 0);
  for (int y = 0; y < h; y++)
    for (int x = w / 2; x < w; x++) map.at(x, y) = 1;
  return map;
}

// Unary costs favouring an intended label by `strength`; a fraction of
// pixels get a wrong intended label. Void pixels get all-zero rows.
inline UnaryField noisy_unary(const LabelMap& gt, int num_labels, double strength,
                              double flip_prob, std::mt19937& g) {
  UnaryField u(gt.width, gt.height, num_labels);
  for (int i = 0; i < gt.num_pixels(); i++) {
    int32_t label = gt.labels[i];
    if (label == LabelMap::kVoid) continue;
    int intended = label;
    if (unit_real(g) < flip_prob) {
      intended = uniform_int(g, num_labels - 1);
      if (intended >= label) intended++;
    }
    for (int l = 0; l < num_labels; l++)
      if (l != intended) u.costs(i, l) = strength;
  }
  return u;
}

// Unary noise in clustered blobs: inside each blob the intended label is
// redrawn, which plain per-pixel voting cannot fix.
inline void flip_unary_blobs(UnaryField& u, const LabelMap& gt, int num_blobs, int radius,
                             double strength, std::mt19937& g) {
  for (int b = 0; b < num_blobs; b++) {
    int cx = uniform_int(g, gt.width);
    int cy = uniform_int(g, gt.height);
    int32_t base = gt.at(cx, cy);
    if (base == LabelMap::kVoid) continue;
    int wrong = uniform_int(g, u.num_labels - 1);
    if (wrong >= base) wrong++;
    for (int y = std::max(0, cy - radius); y <= std::min(gt.height - 1, cy + radius); y++)
      for (int x = std::max(0, cx - radius); x <= std::min(gt.width - 1, cx + radius); x++) {
        int i = y * gt.width + x;
        for (int l = 0; l < u.num_labels; l++) u.costs(i, l) = l == wrong ? 0.0 : strength;
      }
  }
}

// Voronoi-cell image over random seed points: per-cell base color with a
// mild gradient and pixel noise, labels = cell id modulo num_labels.
struct BlobScene {
  Image image;
  LabelMap truth;
};

inline BlobScene blob_scene(int w, int h, int cells, int num_labels, int noise,
                            std::mt19937& g) {
  std::vector<int> cx(cells), cy(cells);
  std::vector<std::array<int, 3>> color(cells);
  for (int c = 0; c < cells; c++) {
    cx[c] = uniform_int(g, w);
    cy[c] = uniform_int(g, h);
    for (int ch = 0; ch < 3; ch++) color[c][ch] = 30 + uniform_int(g, 196);
  }
  BlobScene scene{Image(w, h), LabelMap(w, h, 0)};
  for (int y = 0; y < h; y++)
    for (int x = 0; x < w; x++) {
      int best = 0;
      long best_d = LONG_MAX;
      for (int c = 0; c < cells; c++) {
        long dx = x - cx[c];
        long dy = y - cy[c];
        long d = dx * dx + dy * dy;
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      scene.truth.at(x, y) = best % num_labels;
      uint8_t* px = scene.image.at(x, y);
      double shade = 1.0 - 0.15 * std::sqrt(static_cast<double>(best_d)) /
                               std::sqrt(static_cast<double>(w * w + h * h));
      for (int ch = 0; ch < 3; ch++) {
        int jitter = noise > 0 ? uniform_int(g, 2 * noise + 1) - noise : 0;
        px[ch] = static_cast<uint8_t>(std::clamp(
            static_cast<int>(color[best][ch] * shade) + jitter, 0, 255));
      }
    }
  return scene;
}

}  // namespace fixtures
