#pragma once

#include <array>
#include <string>
#include <vector>

#include "latticecrf/crf.hpp"
#include "latticecrf/metrics.hpp"

namespace latticecrf {

// Loads a binary PPM (P6, 8-bit) or a PNG (8/16-bit gray/RGB/RGBA, reduced
// to 8-bit RGB). The format is chosen by the file's magic bytes.
// Throws std::runtime_error on missing files or malformed content.
Image load_image(const std::string& path);

void save_ppm(const Image& image, const std::string& path);

// Class palette for rendering label maps. Index 255 is reserved for void.
struct Palette {
  std::vector<std::array<uint8_t, 3>> colors;
  std::vector<std::string> names;

  // Deterministic palette: colors from the bit-reversal colormap commonly
  // used for segmentation classes, names "class_<i>".
  static Palette standard(int num_labels);
};

// Writes an indexed 8-bit PNG (void pixels as index 255) plus a sidecar
// text file mapping each index to its class name. The sidecar lives next
// to the PNG with extension ".labels.txt".
// Throws std::invalid_argument when the palette is smaller than the
// largest label, std::runtime_error on IO failure.
void save_labelmap(const LabelMap& map, const Palette& palette, const std::string& png_path);

// Reads an indexed or 8-bit grayscale PNG as labels; index 255 maps to
// LabelMap::kVoid.
LabelMap load_labelmap(const std::string& png_path);

std::string labelmap_sidecar_path(const std::string& png_path);

}  // namespace latticecrf
