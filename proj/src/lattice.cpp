#include "latticecrf/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace latticecrf {

namespace {

// Open-addressing table mapping d-dimensional integer keys to dense vertex
// ids. Sized upfront for the worst case (every splat emits a fresh vertex),
// so the load factor never exceeds 1/2 and probing stays short.
class KeyTable {
 public:
  KeyTable(int key_size, size_t max_entries) : key_size_(key_size) {
    size_t cap = 16;
    while (cap < max_entries * 2) cap <<= 1;
    mask_ = cap - 1;
    buckets_.assign(cap, -1);
    keys_.reserve(max_entries * key_size_ / 4);
  }

  int size() const { return count_; }

  int find(const int32_t* key, bool create) {
    size_t h = hash(key) & mask_;
    for (;;) {
      int32_t slot = buckets_[h];
      if (slot < 0) {
        if (!create) return -1;
        keys_.insert(keys_.end(), key, key + key_size_);
        buckets_[h] = count_;
        return count_++;
      }
      if (std::equal(key, key + key_size_, &keys_[static_cast<size_t>(slot) * key_size_]))
        return slot;
      h = (h + 1) & mask_;
    }
  }

  const int32_t* key(int slot) const { return &keys_[static_cast<size_t>(slot) * key_size_]; }

  std::vector<int32_t> take_keys() { return std::move(keys_); }

 private:
  uint64_t hash(const int32_t* key) const {
    uint64_t h = 14695981039346656037ull;
    for (int i = 0; i < key_size_; i++) {
      h ^= static_cast<uint32_t>(key[i]);
      h *= 1099511628211ull;
    }
    return h;
  }

  int key_size_;
  int count_ = 0;
  size_t mask_ = 0;
  std::vector<int32_t> buckets_;
  std::vector<int32_t> keys_;
};

constexpr double kCoordLimit = 1e9;

}  // namespace

void FeatureMatrix::validate() const {
  if (n_points < 1) throw std::invalid_argument("FeatureMatrix: n_points must be >= 1");
  if (dim < 1) throw std::invalid_argument("FeatureMatrix: dim must be >= 1");
  if (values.size() != static_cast<size_t>(n_points) * dim)
    throw std::invalid_argument("FeatureMatrix: storage size does not match n_points*dim");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("FeatureMatrix: non-finite entry");
}

KernelSpec KernelSpec::from_stddevs(const std::vector<double>& stddevs, double weight) {
  KernelSpec k;
  k.weight = weight;
  k.inv_stddevs.reserve(stddevs.size());
  for (double s : stddevs) {
    if (!(s > 0.0) || !std::isfinite(s))
      throw std::invalid_argument("KernelSpec: standard deviations must be positive and finite");
    k.inv_stddevs.push_back(1.0 / s);
  }
  k.validate();
  return k;
}

void KernelSpec::validate() const {
  if (inv_stddevs.empty()) throw std::invalid_argument("KernelSpec: empty bandwidth vector");
  for (double v : inv_stddevs)
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument("KernelSpec: inverse standard deviations must be positive and finite");
  if (weight < 0.0 || !std::isfinite(weight))
    throw std::invalid_argument("KernelSpec: weight must be non-negative and finite");
}

FeatureMatrix whiten_features(const FeatureMatrix& features, const KernelSpec& kernel) {
  features.validate();
  kernel.validate();
  if (kernel.dim() != features.dim)
    throw std::invalid_argument("whiten_features: kernel dimension does not match features");
  FeatureMatrix out(features.n_points, features.dim);
  for (int i = 0; i < features.n_points; i++) {
    const double* src = features.row(i);
    double* dst = out.row(i);
    for (int j = 0; j < features.dim; j++) dst[j] = src[j] * kernel.inv_stddevs[j];
  }
  return out;
}

Matrix brute_force_filter(const FeatureMatrix& features, const KernelSpec& kernel,
                          const Matrix& values, bool normalize) {
  if (features.n_points > kBruteForceCap)
    throw std::invalid_argument("brute_force_filter: point count exceeds cap");
  if (values.rows() != features.n_points)
    throw std::invalid_argument("brute_force_filter: values row count does not match points");
  if (values.cols() < 1) throw std::invalid_argument("brute_force_filter: values need >= 1 column");

  FeatureMatrix w = whiten_features(features, kernel);
  const int n = w.n_points;
  const int d = w.dim;
  const int L = values.cols();

  Matrix out(n, L, 0.0);
  for (int i = 0; i < n; i++) {
    const double* fi = w.row(i);
    double* oi = out.row(i);
    double ksum = 0.0;
    for (int j = 0; j < n; j++) {
      const double* fj = w.row(j);
      double dist2 = 0.0;
      for (int k = 0; k < d; k++) {
        double diff = fi[k] - fj[k];
        dist2 += diff * diff;
      }
      double g = std::exp(-0.5 * dist2);
      ksum += g;
      const double* vj = values.row(j);
      for (int l = 0; l < L; l++) oi[l] += g * vj[l];
    }
    if (normalize) {
      double inv = 1.0 / std::max(ksum, 1e-20);
      for (int l = 0; l < L; l++) oi[l] *= inv;
    }
  }
  return out;
}

PermutohedralLattice::PermutohedralLattice(const FeatureMatrix& whitened_features) {
  whitened_features.validate();
  n_ = whitened_features.n_points;
  d_ = whitened_features.dim;
  const int dp1 = d_ + 1;

  offsets_.resize(static_cast<size_t>(n_) * dp1);
  barycentric_.resize(static_cast<size_t>(n_) * dp1);

  // Column scales of the elevation map. The columns are mutually orthogonal
  // with norm sqrt((j+1)(j+2)), so this embeds feature space isometrically
  // up to the factor sqrt(2/3)*(d+1), which sets the lattice spacing to one
  // standard deviation of the blur kernel.
  std::vector<double> scale(d_);
  for (int j = 0; j < d_; j++)
    scale[j] = (d_ + 1) * std::sqrt((2.0 / 3.0) / ((j + 1.0) * (j + 2.0)));

  // canonical[r][rank] is the offset from the remainder-0 corner to the
  // simplex vertex with coordinate remainder r.
  std::vector<int32_t> canonical(static_cast<size_t>(dp1) * dp1);
  for (int r = 0; r <= d_; r++)
    for (int j = 0; j <= d_; j++)
      canonical[static_cast<size_t>(r) * dp1 + j] = (j <= d_ - r) ? r : r - dp1;

  KeyTable table(d_, static_cast<size_t>(n_) * dp1);

  std::vector<double> elevated(dp1);
  std::vector<double> rem0(dp1);
  std::vector<int> rank(dp1);
  std::vector<double> bary(dp1 + 1);
  std::vector<int32_t> key(d_);
  const double inv_dp1 = 1.0 / dp1;

  for (int p = 0; p < n_; p++) {
    const double* f = whitened_features.row(p);

    double sm = 0.0;
    for (int j = d_; j > 0; j--) {
      double cf = f[j - 1] * scale[j - 1];
      elevated[j] = sm - j * cf;
      sm += cf;
    }
    elevated[0] = sm;

    // Round to the nearest lattice point whose coordinates are all
    // multiples of d+1 (remainder 0).
    int sum = 0;
    for (int i = 0; i <= d_; i++) {
      double v = elevated[i] * inv_dp1;
      double up = std::ceil(v) * dp1;
      double down = std::floor(v) * dp1;
      double r = (up - elevated[i] < elevated[i] - down) ? up : down;
      if (!(std::abs(r) < kCoordLimit))
        throw std::invalid_argument("PermutohedralLattice: feature coordinate out of range");
      rem0[i] = r;
      sum += static_cast<int>(r);
      rank[i] = 0;
    }
    sum /= dp1;

    // Rank coordinates by their residual, largest first.
    for (int i = 0; i < d_; i++) {
      double di = elevated[i] - rem0[i];
      for (int j = i + 1; j <= d_; j++) {
        if (di < elevated[j] - rem0[j])
          rank[i]++;
        else
          rank[j]++;
      }
    }

    // The per-coordinate rounding may have left the plane sum(x)=0; shift
    // the sum/d+1 worst offenders to the neighbouring remainder.
    for (int i = 0; i <= d_; i++) {
      rank[i] += sum;
      if (rank[i] < 0) {
        rank[i] += dp1;
        rem0[i] += dp1;
      } else if (rank[i] > d_) {
        rank[i] -= dp1;
        rem0[i] -= dp1;
      }
    }

    std::fill(bary.begin(), bary.end(), 0.0);
    for (int i = 0; i <= d_; i++) {
      double v = (elevated[i] - rem0[i]) * inv_dp1;
      bary[d_ - rank[i]] += v;
      bary[d_ - rank[i] + 1] -= v;
    }
    bary[0] += 1.0 + bary[dp1];

    for (int r = 0; r <= d_; r++) {
      for (int i = 0; i < d_; i++)
        key[i] = static_cast<int32_t>(rem0[i]) + canonical[static_cast<size_t>(r) * dp1 + rank[i]];
      offsets_[static_cast<size_t>(p) * dp1 + r] = table.find(key.data(), true);
      barycentric_[static_cast<size_t>(p) * dp1 + r] = bary[r];
    }
  }

  m_ = table.size();

  // Blur adjacency: along axis j the neighbours of a vertex differ by
  // +-((d+1)e_j - ones). Stored shifted by one so 0 marks a missing
  // neighbour, which reads from the permanently zero row of the value
  // buffers.
  blur_n1_.resize(static_cast<size_t>(dp1) * m_);
  blur_n2_.resize(static_cast<size_t>(dp1) * m_);
  {
    std::vector<int32_t> n1(d_), n2(d_);
    for (int j = 0; j <= d_; j++) {
      for (int v = 0; v < m_; v++) {
        const int32_t* k = table.key(v);
        for (int i = 0; i < d_; i++) {
          n1[i] = k[i] - 1;
          n2[i] = k[i] + 1;
        }
        if (j < d_) {
          n1[j] = k[j] + d_;
          n2[j] = k[j] - d_;
        }
        blur_n1_[static_cast<size_t>(j) * m_ + v] = table.find(n1.data(), false) + 1;
        blur_n2_[static_cast<size_t>(j) * m_ + v] = table.find(n2.data(), false) + 1;
      }
    }
  }

  keys_ = table.take_keys();
  keys_.resize(static_cast<size_t>(m_) * d_);

  // Slice gain calibrated so the composite splat/blur/slice kernel carries
  // the same integrated mass as the unit Gaussian it approximates: the
  // lattice holds one vertex per feature-space volume (3/2)^(d/2)/sqrt(d+1),
  // and the Gaussian integrates to (2pi)^(d/2). With this factor,
  // unnormalized outputs estimate the exact Gaussian-weighted sums and the
  // all-ones response estimates the true kernel row sums.
  slice_scale_ = std::pow(4.0 * M_PI / 3.0, 0.5 * d_) * std::sqrt(d_ + 1.0);

  norm_.assign(n_, 0.0);
  std::vector<double> ones(n_, 1.0);
  std::vector<double> a(static_cast<size_t>(m_ + 1), 0.0);
  std::vector<double> b(static_cast<size_t>(m_ + 1), 0.0);
  splat_into(ones.data(), 1, a.data());
  double* res = blur_pingpong(a.data(), b.data(), 1);
  slice_from(res, 1, norm_.data());
}

void PermutohedralLattice::splat_into(const double* in, int num_cols, double* vertex_buf) const {
  const int dp1 = d_ + 1;
  for (int p = 0; p < n_; p++) {
    const double* v = in + static_cast<size_t>(p) * num_cols;
    const int32_t* off = &offsets_[static_cast<size_t>(p) * dp1];
    const double* w = &barycentric_[static_cast<size_t>(p) * dp1];
    for (int r = 0; r <= d_; r++) {
      double* dst = vertex_buf + static_cast<size_t>(off[r] + 1) * num_cols;
      const double wr = w[r];
      for (int k = 0; k < num_cols; k++) dst[k] += wr * v[k];
    }
  }
}

double* PermutohedralLattice::blur_pingpong(double* buf, double* scratch, int num_cols) const {
  double* cur = buf;
  double* nxt = scratch;
  for (int j = 0; j <= d_; j++) {
    const int32_t* n1 = &blur_n1_[static_cast<size_t>(j) * m_];
    const int32_t* n2 = &blur_n2_[static_cast<size_t>(j) * m_];
    for (int v = 0; v < m_; v++) {
      const double* c = cur + static_cast<size_t>(v + 1) * num_cols;
      const double* a = cur + static_cast<size_t>(n1[v]) * num_cols;
      const double* b = cur + static_cast<size_t>(n2[v]) * num_cols;
      double* o = nxt + static_cast<size_t>(v + 1) * num_cols;
      for (int k = 0; k < num_cols; k++) o[k] = 0.5 * c[k] + 0.25 * (a[k] + b[k]);
    }
    std::swap(cur, nxt);
  }
  return cur;
}

void PermutohedralLattice::slice_from(const double* vertex_buf, int num_cols, double* out) const {
  const int dp1 = d_ + 1;
  for (int p = 0; p < n_; p++) {
    double* o = out + static_cast<size_t>(p) * num_cols;
    std::memset(o, 0, sizeof(double) * num_cols);
    const int32_t* off = &offsets_[static_cast<size_t>(p) * dp1];
    const double* w = &barycentric_[static_cast<size_t>(p) * dp1];
    for (int r = 0; r <= d_; r++) {
      const double* src = vertex_buf + static_cast<size_t>(off[r] + 1) * num_cols;
      const double wr = w[r] * slice_scale_;
      for (int k = 0; k < num_cols; k++) o[k] += wr * src[k];
    }
  }
}

Matrix PermutohedralLattice::filter(const Matrix& values, bool normalize) const {
  if (values.rows() != n_)
    throw std::invalid_argument("PermutohedralLattice::filter: values row count does not match points");
  if (values.cols() < 1)
    throw std::invalid_argument("PermutohedralLattice::filter: values need >= 1 column");
  const int L = values.cols();
  Matrix out(n_, L);
  std::vector<double> a(static_cast<size_t>(m_ + 1) * L, 0.0);
  std::vector<double> b(static_cast<size_t>(m_ + 1) * L, 0.0);
  splat_into(values.data(), L, a.data());
  double* res = blur_pingpong(a.data(), b.data(), L);
  slice_from(res, L, out.data());
  if (normalize) {
    for (int i = 0; i < n_; i++) {
      double inv = 1.0 / std::max(norm_[i], 1e-20);
      double* o = out.row(i);
      for (int l = 0; l < L; l++) o[l] *= inv;
    }
  }
  return out;
}

Matrix PermutohedralLattice::splat(const Matrix& values) const {
  if (values.rows() != n_)
    throw std::invalid_argument("PermutohedralLattice::splat: values row count does not match points");
  const int L = values.cols();
  std::vector<double> buf(static_cast<size_t>(m_ + 1) * L, 0.0);
  splat_into(values.data(), L, buf.data());
  Matrix out(m_, L);
  std::memcpy(out.data(), buf.data() + L, sizeof(double) * static_cast<size_t>(m_) * L);
  return out;
}

Matrix PermutohedralLattice::blur(const Matrix& vertex_values) const {
  if (vertex_values.rows() != m_)
    throw std::invalid_argument("PermutohedralLattice::blur: row count does not match vertices");
  const int L = vertex_values.cols();
  std::vector<double> a(static_cast<size_t>(m_ + 1) * L, 0.0);
  std::vector<double> b(static_cast<size_t>(m_ + 1) * L, 0.0);
  std::memcpy(a.data() + L, vertex_values.data(), sizeof(double) * static_cast<size_t>(m_) * L);
  double* res = blur_pingpong(a.data(), b.data(), L);
  Matrix out(m_, L);
  std::memcpy(out.data(), res + L, sizeof(double) * static_cast<size_t>(m_) * L);
  return out;
}

Matrix PermutohedralLattice::slice(const Matrix& vertex_values) const {
  if (vertex_values.rows() != m_)
    throw std::invalid_argument("PermutohedralLattice::slice: row count does not match vertices");
  const int L = vertex_values.cols();
  std::vector<double> buf(static_cast<size_t>(m_ + 1) * L, 0.0);
  std::memcpy(buf.data() + L, vertex_values.data(), sizeof(double) * static_cast<size_t>(m_) * L);
  Matrix out(n_, L);
  slice_from(buf.data(), L, out.data());
  return out;
}

std::vector<int32_t> PermutohedralLattice::vertex_key(int m) const {
  if (m < 0 || m >= m_) throw std::out_of_range("PermutohedralLattice::vertex_key: bad index");
  std::vector<int32_t> key(d_ + 1);
  int32_t sum = 0;
  for (int i = 0; i < d_; i++) {
    key[i] = keys_[static_cast<size_t>(m) * d_ + i];
    sum += key[i];
  }
  key[d_] = -sum;
  return key;
}

Matrix lattice_filter(const PermutohedralLattice& lattice, const Matrix& values, bool normalize) {
  return lattice.filter(values, normalize);
}

}  // namespace latticecrf
