#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <utility>
#include <vector>

#include "latticecrf/metrics.hpp"

using namespace latticecrf;

namespace {

// 8x8 two-column-block map: labels 0 | 1 split at x = 4, two void pixels
// at (3,0) and (4,0).
LabelMap eight_gt() {
  LabelMap gt(8, 8, 0);
  for (int y = 0; y < 8; y++)
    for (int x = 4; x < 8; x++) gt.at(x, y) = 1;
  gt.at(3, 0) = LabelMap::kVoid;
  gt.at(4, 0) = LabelMap::kVoid;
  return gt;
}

// Prediction for eight_gt with flips at (3,2), (4,2), (4,3) inside the
// boundary band and one far flip at (0,0).
LabelMap eight_pred() {
  LabelMap pred = eight_gt();
  pred.at(3, 0) = 0;
  pred.at(4, 0) = 1;
  pred.at(3, 2) = 1;
  pred.at(4, 2) = 0;
  pred.at(4, 3) = 0;
  pred.at(0, 0) = 1;
  return pred;
}

// Set-based band enumeration, independent of the stamping in the library:
// boundary pixels by scanning 4-adjacent pairs, band by brute Chebyshev
// distance to every boundary pixel.
std::set<std::pair<int, int>> enumerate_band(const LabelMap& gt, int width) {
  std::vector<std::pair<int, int>> boundary;
  for (int y = 0; y < gt.height; y++)
    for (int x = 0; x < gt.width; x++) {
      if (gt.at(x, y) == LabelMap::kVoid) continue;
      const int dx[4] = {1, -1, 0, 0};
      const int dy[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; k++) {
        int nx = x + dx[k];
        int ny = y + dy[k];
        if (nx < 0 || ny < 0 || nx >= gt.width || ny >= gt.height) continue;
        int32_t other = gt.at(nx, ny);
        if (other != LabelMap::kVoid && other != gt.at(x, y)) {
          boundary.emplace_back(x, y);
          break;
        }
      }
    }
  std::set<std::pair<int, int>> band;
  for (int y = 0; y < gt.height; y++)
    for (int x = 0; x < gt.width; x++) {
      if (gt.at(x, y) == LabelMap::kVoid) continue;
      for (const auto& [bx, by] : boundary) {
        if (std::max(std::abs(x - bx), std::abs(y - by)) <= width) {
          band.emplace(x, y);
          break;
        }
      }
    }
  return band;
}

}  // namespace

TEST_CASE("global accuracy counts labeled pixels only") {
  LabelMap gt(2, 2, 0);
  gt.at(1, 1) = LabelMap::kVoid;
  LabelMap pred(2, 2, 0);
  pred.at(1, 0) = 1;

  // 2 of 3 labeled pixels correct.
  CHECK(global_accuracy(pred, gt) == doctest::Approx(200.0 / 3.0));
  CHECK(global_accuracy(gt, gt) == doctest::Approx(100.0));

  LabelMap allvoid(2, 2, LabelMap::kVoid);
  CHECK_THROWS_AS(global_accuracy(pred, allvoid), std::invalid_argument);
  LabelMap wrong(3, 2, 0);
  CHECK_THROWS_AS(global_accuracy(wrong, gt), std::invalid_argument);
}

TEST_CASE("average accuracy is the unweighted mean of per-class recall") {
  // Class 0 fully correct, class 1 half correct.
  LabelMap gt(4, 1, 0);
  gt.at(2, 0) = 1;
  gt.at(3, 0) = 1;
  LabelMap pred = gt;
  pred.at(3, 0) = 0;
  CHECK(average_accuracy(pred, gt, 2) == doctest::Approx(75.0));
  CHECK(average_accuracy(gt, gt, 2) == doctest::Approx(100.0));

  // Classes absent from the ground truth stay out of the mean.
  CHECK(average_accuracy(pred, gt, 5) == doctest::Approx(75.0));
}

TEST_CASE("dominant classes lift global accuracy but not the average") {
  LabelMap gt(8, 1, 0);
  gt.at(6, 0) = 1;
  gt.at(7, 0) = 1;
  LabelMap pred = gt;
  pred.at(6, 0) = 0;
  pred.at(7, 0) = 0;

  double global = global_accuracy(pred, gt);
  double average = average_accuracy(pred, gt, 2);
  CHECK(global == doctest::Approx(75.0));
  CHECK(average == doctest::Approx(50.0));
  CHECK(global > average);
}

TEST_CASE("trimap error on the 4x1 strip") {
  LabelMap gt(4, 1, 0);
  gt.at(2, 0) = 1;
  gt.at(3, 0) = 1;
  LabelMap pred = gt;
  pred.at(1, 0) = 1;

  TrimapResult r = trimap_error(pred, gt, 1);
  CHECK(r.band_pixels == 4);
  CHECK(r.errors == 1);
  CHECK(r.error_percent == doctest::Approx(25.0));

  TrimapResult self = trimap_error(gt, gt, 1);
  CHECK(self.errors == 0);
  CHECK(self.error_percent == doctest::Approx(0.0));
}

TEST_CASE("trimap error on the 8x8 block fixture") {
  LabelMap gt = eight_gt();
  LabelMap pred = eight_pred();

  // Boundary pixels sit at x in {3,4}, y in 1..7; the width-1 band is the
  // 4x8 block x in 2..5 minus the two void pixels, and the width-2 band the
  // 6x8 block x in 1..6 minus the same two.
  TrimapResult w1 = trimap_error(pred, gt, 1);
  CHECK(w1.band_pixels == 30);
  CHECK(w1.errors == 3);
  CHECK(w1.error_percent == doctest::Approx(10.0));

  TrimapResult w2 = trimap_error(pred, gt, 2);
  CHECK(w2.band_pixels == 46);
  CHECK(w2.errors == 3);
  CHECK(w2.error_percent == doctest::Approx(300.0 / 46.0));

  // The far flip at (0,0) counts toward global accuracy but no band.
  CHECK(global_accuracy(pred, gt) == doctest::Approx(100.0 * 58.0 / 62.0));

  for (int width : {1, 2, 3}) {
    auto band = enumerate_band(gt, width);
    TrimapResult r = trimap_error(pred, gt, width);
    CHECK(static_cast<int>(band.size()) == r.band_pixels);
    int errors = 0;
    for (const auto& [x, y] : band)
      if (pred.at(x, y) != gt.at(x, y)) errors++;
    CHECK(errors == r.errors);
    TrimapResult clean = trimap_error(gt, gt, width);
    CHECK(clean.error_percent == doctest::Approx(0.0));
  }
}

TEST_CASE("trimap bands are nested in the width") {
  LabelMap gt = eight_gt();
  LabelMap pred = eight_pred();
  int prev_band = 0;
  int prev_errors = 0;
  for (int width = 1; width <= 6; width++) {
    TrimapResult r = trimap_error(pred, gt, width);
    CHECK(r.band_pixels >= prev_band);
    CHECK(r.errors >= prev_errors);
    prev_band = r.band_pixels;
    prev_errors = r.errors;
  }
}

TEST_CASE("trimap rejects boundary-free ground truth") {
  LabelMap uniform(4, 4, 1);
  LabelMap pred(4, 4, 1);
  CHECK_THROWS_AS(trimap_error(pred, uniform, 1), std::invalid_argument);
  CHECK_THROWS_AS(trimap_error(pred, uniform, 0), std::invalid_argument);
}

TEST_CASE("voc iou per class with exclusions") {
  LabelMap gt(4, 2, 0);
  LabelMap pred(4, 2, 0);
  for (int x = 0; x < 4; x++) gt.at(x, 1) = 1;
  for (int x = 0; x < 4; x++) pred.at(x, 1) = 1;
  pred.at(3, 0) = 1;
  pred.at(3, 1) = 2;

  IouResult r = voc_iou(pred, gt, 3);
  CHECK(r.per_class[0] == doctest::Approx(75.0));
  CHECK(r.per_class[1] == doctest::Approx(60.0));
  CHECK(r.per_class[2] == doctest::Approx(0.0));
  CHECK(r.mean_iou == doctest::Approx(45.0));

  // An extra class with an empty union is excluded from the mean.
  IouResult wide = voc_iou(pred, gt, 4);
  CHECK(!wide.has_union[3]);
  CHECK(wide.mean_iou == doctest::Approx(45.0));

  IouResult self = voc_iou(gt, gt, 3);
  CHECK(self.per_class[0] == doctest::Approx(100.0));
  CHECK(self.per_class[1] == doctest::Approx(100.0));
  CHECK(self.mean_iou == doctest::Approx(100.0));
}

TEST_CASE("voc iou ignores pixels with void ground truth") {
  LabelMap gt(3, 1, 0);
  gt.at(2, 0) = LabelMap::kVoid;
  LabelMap pred(3, 1, 0);
  pred.at(2, 0) = 1;  // prediction over void must not create a union

  IouResult r = voc_iou(pred, gt, 2);
  CHECK(r.per_class[0] == doctest::Approx(100.0));
  CHECK(!r.has_union[1]);
  CHECK(r.mean_iou == doctest::Approx(100.0));
}

TEST_CASE("metrics are invariant under a joint relabeling") {
  LabelMap gt = eight_gt();
  LabelMap pred = eight_pred();
  const int32_t perm[2] = {1, 0};

  LabelMap pgt = gt;
  LabelMap ppred = pred;
  for (int i = 0; i < gt.num_pixels(); i++) {
    if (pgt.labels[i] != LabelMap::kVoid) pgt.labels[i] = perm[pgt.labels[i]];
    if (ppred.labels[i] != LabelMap::kVoid) ppred.labels[i] = perm[ppred.labels[i]];
  }

  CHECK(global_accuracy(ppred, pgt) == doctest::Approx(global_accuracy(pred, gt)));
  CHECK(average_accuracy(ppred, pgt, 2) == doctest::Approx(average_accuracy(pred, gt, 2)));
  CHECK(trimap_error(ppred, pgt, 1).error_percent ==
        doctest::Approx(trimap_error(pred, gt, 1).error_percent));
  CHECK(voc_iou(ppred, pgt, 2).mean_iou == doctest::Approx(voc_iou(pred, gt, 2).mean_iou));
}

TEST_CASE("label map validation") {
  LabelMap map(2, 2, 0);
  map.at(1, 1) = 3;
  CHECK_NOTHROW(map.validate());
  CHECK_NOTHROW(map.validate(4));
  CHECK_THROWS_AS(map.validate(3), std::invalid_argument);
  map.at(0, 0) = -2;
  CHECK_THROWS_AS(map.validate(), std::invalid_argument);
}
