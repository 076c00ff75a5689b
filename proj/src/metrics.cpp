#include "latticecrf/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace latticecrf {

void LabelMap::validate(int num_labels) const {
  if (width < 1 || height < 1) throw std::invalid_argument("LabelMap: empty map");
  if (labels.size() != static_cast<size_t>(width) * height)
    throw std::invalid_argument("LabelMap: storage size does not match shape");
  for (int32_t l : labels) {
    if (l < kVoid) throw std::invalid_argument("LabelMap: label below void sentinel");
    if (num_labels >= 0 && l >= num_labels)
      throw std::invalid_argument("LabelMap: label outside [0, num_labels)");
  }
}

namespace {

void check_same_shape(const LabelMap& pred, const LabelMap& gt, const char* where) {
  pred.validate();
  gt.validate();
  if (pred.width != gt.width || pred.height != gt.height)
    throw std::invalid_argument(std::string(where) + ": prediction/ground-truth shape mismatch");
}

}  // namespace

double global_accuracy(const LabelMap& pred, const LabelMap& gt) {
  check_same_shape(pred, gt, "global_accuracy");
  long correct = 0, labeled = 0;
  for (size_t i = 0; i < gt.labels.size(); i++) {
    if (gt.labels[i] == LabelMap::kVoid) continue;
    labeled++;
    if (pred.labels[i] == gt.labels[i]) correct++;
  }
  if (labeled == 0) throw std::invalid_argument("global_accuracy: ground truth has no labeled pixels");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(labeled);
}

double average_accuracy(const LabelMap& pred, const LabelMap& gt, int num_labels) {
  check_same_shape(pred, gt, "average_accuracy");
  if (num_labels < 1) throw std::invalid_argument("average_accuracy: need at least one label");
  gt.validate(num_labels);
  std::vector<long> present(num_labels, 0), correct(num_labels, 0);
  for (size_t i = 0; i < gt.labels.size(); i++) {
    int32_t g = gt.labels[i];
    if (g == LabelMap::kVoid) continue;
    present[g]++;
    if (pred.labels[i] == g) correct[g]++;
  }
  double sum = 0.0;
  int classes = 0;
  for (int c = 0; c < num_labels; c++) {
    if (present[c] == 0) continue;
    sum += static_cast<double>(correct[c]) / static_cast<double>(present[c]);
    classes++;
  }
  if (classes == 0) throw std::invalid_argument("average_accuracy: ground truth has no labeled pixels");
  return 100.0 * sum / classes;
}

TrimapResult trimap_error(const LabelMap& pred, const LabelMap& gt, int width) {
  check_same_shape(pred, gt, "trimap_error");
  if (width < 1) throw std::invalid_argument("trimap_error: band width must be at least 1");

  const int w = gt.width, h = gt.height;
  std::vector<uint8_t> in_band(static_cast<size_t>(w) * h, 0);

  // Boundary: labeled pixels 4-adjacent to a differently labeled pixel.
  // Each boundary pixel stamps a (2*width+1)^2 Chebyshev square.
  for (int y = 0; y < h; y++) {
    for (int x = 0; x < w; x++) {
      int32_t g = gt.at(x, y);
      if (g == LabelMap::kVoid) continue;
      bool boundary = false;
      if (x + 1 < w && gt.at(x + 1, y) != LabelMap::kVoid && gt.at(x + 1, y) != g) boundary = true;
      if (!boundary && x > 0 && gt.at(x - 1, y) != LabelMap::kVoid && gt.at(x - 1, y) != g) boundary = true;
      if (!boundary && y + 1 < h && gt.at(x, y + 1) != LabelMap::kVoid && gt.at(x, y + 1) != g) boundary = true;
      if (!boundary && y > 0 && gt.at(x, y - 1) != LabelMap::kVoid && gt.at(x, y - 1) != g) boundary = true;
      if (!boundary) continue;
      for (int by = std::max(0, y - width); by <= std::min(h - 1, y + width); by++)
        for (int bx = std::max(0, x - width); bx <= std::min(w - 1, x + width); bx++)
          in_band[static_cast<size_t>(by) * w + bx] = 1;
    }
  }

  TrimapResult r;
  for (int i = 0; i < w * h; i++) {
    if (!in_band[i] || gt.labels[i] == LabelMap::kVoid) continue;
    r.band_pixels++;
    if (pred.labels[i] != gt.labels[i]) r.errors++;
  }
  if (r.band_pixels == 0) throw std::invalid_argument("trimap_error: band is empty");
  r.error_percent = 100.0 * r.errors / r.band_pixels;
  return r;
}

IouResult voc_iou(const LabelMap& pred, const LabelMap& gt, int num_labels) {
  check_same_shape(pred, gt, "voc_iou");
  if (num_labels < 1) throw std::invalid_argument("voc_iou: need at least one label");
  gt.validate(num_labels);

  std::vector<long> inter(num_labels, 0), uni(num_labels, 0);
  for (size_t i = 0; i < gt.labels.size(); i++) {
    int32_t g = gt.labels[i];
    if (g == LabelMap::kVoid) continue;
    int32_t p = pred.labels[i];
    if (p == g) {
      inter[g]++;
      uni[g]++;
    } else {
      uni[g]++;
      if (p >= 0 && p < num_labels) uni[p]++;
    }
  }

  IouResult r;
  r.per_class.assign(num_labels, 0.0);
  r.has_union.assign(num_labels, 0);
  double sum = 0.0;
  int classes = 0;
  for (int c = 0; c < num_labels; c++) {
    if (uni[c] == 0) continue;
    r.has_union[c] = 1;
    r.per_class[c] = 100.0 * static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
    sum += r.per_class[c];
    classes++;
  }
  r.mean_iou = classes > 0 ? sum / classes : 0.0;
  return r;
}

}  // namespace latticecrf
