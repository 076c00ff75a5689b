#pragma once

#include <string>
#include <vector>

#include "latticecrf/crf.hpp"

namespace latticecrf {

// Unary cost container, binary:
//   bytes 0..3   magic "DCU1"
//   bytes 4..15  width, height, num_labels as little-endian uint32
//   then width*height*num_labels little-endian float32 costs, pixel
//   row-major with the label index fastest.
// Loading validates the magic, dimensions, payload size, and finiteness.
UnaryField load_unary(const std::string& path);
void save_unary(const UnaryField& unary, const std::string& path);

// Compatibility matrix, text: first line num_labels, then num_labels rows
// of num_labels entries. Saved at full precision so a round trip is exact.
CompatibilityMatrix load_compatibility(const std::string& path);
void save_compatibility(const CompatibilityMatrix& c, const std::string& path);

struct ManifestEntry {
  std::string image;
  std::string unary;
  std::string ground_truth;
};

// Manifest: one "image unary ground_truth" triple per line, blank lines and
// '#' comments skipped. Relative paths resolve against the manifest's
// directory.
std::vector<ManifestEntry> load_manifest(const std::string& path);

}  // namespace latticecrf
