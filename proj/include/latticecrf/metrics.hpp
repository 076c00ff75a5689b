#pragma once

#include <cstdint>
#include <vector>

namespace latticecrf {

// Per-pixel labels in row-major image order. kVoid marks unlabeled pixels
// (ignore regions in ground truth); predictions normally contain none.
struct LabelMap {
  static constexpr int32_t kVoid = -1;

  int width = 0;
  int height = 0;
  std::vector<int32_t> labels;

  LabelMap() = default;
  LabelMap(int w, int h, int32_t fill = kVoid)
      : width(w), height(h), labels(static_cast<size_t>(w) * h, fill) {}

  int32_t& at(int x, int y) { return labels[static_cast<size_t>(y) * width + x]; }
  int32_t at(int x, int y) const { return labels[static_cast<size_t>(y) * width + x]; }
  int num_pixels() const { return width * height; }

  // Throws std::invalid_argument on shape/storage mismatch or labels
  // outside [kVoid, num_labels) (upper bound checked only when >= 0).
  void validate(int num_labels = -1) const;
};

// All metrics return percentages in [0, 100].

// Correct / labeled over pixels whose ground truth is not void.
// Throws if shapes differ or the ground truth has no labeled pixels.
double global_accuracy(const LabelMap& pred, const LabelMap& gt);

// Mean per-class recall over classes present in the ground truth.
double average_accuracy(const LabelMap& pred, const LabelMap& gt, int num_labels);

struct TrimapResult {
  int band_pixels = 0;
  int errors = 0;
  double error_percent = 0.0;
};

// Error rate restricted to the band of labeled pixels within Chebyshev
// distance `width` of a label boundary (4-adjacent pixels with differing
// non-void ground-truth labels). Throws when the band is empty.
TrimapResult trimap_error(const LabelMap& pred, const LabelMap& gt, int width);

struct IouResult {
  std::vector<double> per_class;     // percent; 0 where has_union is false
  std::vector<uint8_t> has_union;    // classes with a non-empty union
  double mean_iou = 0.0;             // mean over classes with a union
};

// Intersection-over-union per class over pixels with labeled ground truth;
// classes absent from both prediction and ground truth are excluded from
// the mean.
IouResult voc_iou(const LabelMap& pred, const LabelMap& gt, int num_labels);

}  // namespace latticecrf
