#include "latticecrf/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace latticecrf {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path);
  return f;
}

int ppm_next_token(FILE* f, char* buf, int cap) {
  int c;
  do {
    c = std::fgetc(f);
    if (c == '#')
      while (c != '\n' && c != EOF) c = std::fgetc(f);
  } while (c != EOF && std::isspace(c));
  if (c == EOF) return 0;
  int n = 0;
  while (c != EOF && !std::isspace(c) && n < cap - 1) {
    buf[n++] = static_cast<char>(c);
    c = std::fgetc(f);
  }
  buf[n] = '\0';
  return n;
}

Image load_ppm(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  char tok[32];
  if (!ppm_next_token(f.get(), tok, sizeof tok) || std::strcmp(tok, "P6") != 0)
    throw std::runtime_error(path + ": not a binary PPM (P6)");
  long vals[3];
  for (long& v : vals) {
    if (!ppm_next_token(f.get(), tok, sizeof tok))
      throw std::runtime_error(path + ": truncated PPM header");
    char* end = nullptr;
    v = std::strtol(tok, &end, 10);
    if (end == tok || *end != '\0') throw std::runtime_error(path + ": malformed PPM header");
  }
  if (vals[0] < 1 || vals[1] < 1) throw std::runtime_error(path + ": empty PPM image");
  if (vals[2] != 255) throw std::runtime_error(path + ": PPM maxval must be 255");

  Image img(static_cast<int>(vals[0]), static_cast<int>(vals[1]));
  size_t expect = img.pixels.size();
  if (std::fread(img.pixels.data(), 1, expect, f.get()) != expect)
    throw std::runtime_error(path + ": truncated PPM payload");
  return img;
}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

void png_begin_read(PngReader& r, FILE* f, const std::string& path) {
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f) != 8 || png_sig_cmp(sig, 0, 8))
    throw std::runtime_error(path + ": not a PNG file");
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) throw std::runtime_error("png_create_read_struct failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw std::runtime_error("png_create_info_struct failed");
  png_init_io(r.png, f);
  png_set_sig_bytes(r.png, 8);
}

}  // namespace

Image load_image(const std::string& path) {
  {
    FilePtr probe = open_file(path, "rb");
    unsigned char magic[2] = {0, 0};
    if (std::fread(magic, 1, 2, probe.get()) == 2 && magic[0] == 'P' && magic[1] == '6') {
      probe.reset();
      return load_ppm(path);
    }
  }

  FilePtr f = open_file(path, "rb");
  PngReader r;
  png_begin_read(r, f.get(), path);
  if (setjmp(png_jmpbuf(r.png))) throw std::runtime_error(path + ": PNG decode error");

  png_read_info(r.png, r.info);
  png_set_expand(r.png);            // palette -> rgb, gray<8 -> 8, tRNS -> alpha
  png_set_strip_16(r.png);
  png_set_strip_alpha(r.png);
  png_set_gray_to_rgb(r.png);
  png_read_update_info(r.png, r.info);

  png_uint_32 w = png_get_image_width(r.png, r.info);
  png_uint_32 h = png_get_image_height(r.png, r.info);
  if (w < 1 || h < 1) throw std::runtime_error(path + ": empty PNG image");
  if (png_get_channels(r.png, r.info) != 3 || png_get_bit_depth(r.png, r.info) != 8)
    throw std::runtime_error(path + ": unsupported PNG layout");

  Image img(static_cast<int>(w), static_cast<int>(h));
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; y++) rows[y] = img.pixels.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return img;
}

void save_ppm(const Image& image, const std::string& path) {
  if (image.width < 1 || image.height < 1) throw std::invalid_argument("save_ppm: empty image");
  FilePtr f = open_file(path, "wb");
  std::fprintf(f.get(), "P6\n%d %d\n255\n", image.width, image.height);
  if (std::fwrite(image.pixels.data(), 1, image.pixels.size(), f.get()) != image.pixels.size())
    throw std::runtime_error("cannot write " + path);
}

Palette Palette::standard(int num_labels) {
  if (num_labels < 1 || num_labels > 255)
    throw std::invalid_argument("Palette: label count must be in [1, 255]");
  Palette p;
  p.colors.resize(num_labels);
  p.names.resize(num_labels);
  for (int i = 0; i < num_labels; i++) {
    int id = i;
    uint8_t rgb[3] = {0, 0, 0};
    for (int shift = 7; shift >= 0 && id; shift--) {
      for (int c = 0; c < 3; c++) rgb[c] |= static_cast<uint8_t>(((id >> c) & 1) << shift);
      id >>= 3;
    }
    p.colors[i] = {rgb[0], rgb[1], rgb[2]};
    p.names[i] = "class_" + std::to_string(i);
  }
  return p;
}

std::string labelmap_sidecar_path(const std::string& png_path) {
  if (png_path.size() > 4 && png_path.compare(png_path.size() - 4, 4, ".png") == 0)
    return png_path.substr(0, png_path.size() - 4) + ".labels.txt";
  return png_path + ".labels.txt";
}

void save_labelmap(const LabelMap& map, const Palette& palette, const std::string& png_path) {
  map.validate();
  if (palette.colors.empty() || palette.colors.size() != palette.names.size())
    throw std::invalid_argument("save_labelmap: malformed palette");
  for (int32_t l : map.labels)
    if (l >= static_cast<int32_t>(palette.colors.size()))
      throw std::invalid_argument("save_labelmap: palette smaller than largest label");

  FilePtr f = open_file(png_path, "wb");
  PngWriter w;
  w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!w.png) throw std::runtime_error("png_create_write_struct failed");
  w.info = png_create_info_struct(w.png);
  if (!w.info) throw std::runtime_error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(w.png))) throw std::runtime_error(png_path + ": PNG encode error");

  png_init_io(w.png, f.get());
  png_set_IHDR(w.png, w.info, map.width, map.height, 8, PNG_COLOR_TYPE_PALETTE,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);

  png_color plte[256];
  std::memset(plte, 0, sizeof plte);
  for (size_t i = 0; i < palette.colors.size(); i++) {
    plte[i].red = palette.colors[i][0];
    plte[i].green = palette.colors[i][1];
    plte[i].blue = palette.colors[i][2];
  }
  plte[255] = {224, 224, 192};  // void
  png_set_PLTE(w.png, w.info, plte, 256);
  png_write_info(w.png, w.info);

  std::vector<png_byte> row(map.width);
  for (int y = 0; y < map.height; y++) {
    for (int x = 0; x < map.width; x++) {
      int32_t l = map.at(x, y);
      row[x] = l == LabelMap::kVoid ? 255 : static_cast<png_byte>(l);
    }
    png_write_row(w.png, row.data());
  }
  png_write_end(w.png, nullptr);

  std::ofstream side(labelmap_sidecar_path(png_path));
  if (!side) throw std::runtime_error("cannot write " + labelmap_sidecar_path(png_path));
  for (size_t i = 0; i < palette.names.size(); i++) side << i << " " << palette.names[i] << "\n";
  side << "255 void\n";
}

LabelMap load_labelmap(const std::string& png_path) {
  FilePtr f = open_file(png_path, "rb");
  PngReader r;
  png_begin_read(r, f.get(), png_path);
  if (setjmp(png_jmpbuf(r.png))) throw std::runtime_error(png_path + ": PNG decode error");

  png_read_info(r.png, r.info);
  int color = png_get_color_type(r.png, r.info);
  if (color != PNG_COLOR_TYPE_PALETTE && color != PNG_COLOR_TYPE_GRAY)
    throw std::runtime_error(png_path + ": label maps must be indexed or grayscale PNG");
  if (png_get_bit_depth(r.png, r.info) < 8) png_set_packing(r.png);
  if (png_get_bit_depth(r.png, r.info) == 16) png_set_strip_16(r.png);
  png_read_update_info(r.png, r.info);
  if (png_get_channels(r.png, r.info) != 1 || png_get_bit_depth(r.png, r.info) != 8)
    throw std::runtime_error(png_path + ": unsupported label-map layout");

  png_uint_32 w = png_get_image_width(r.png, r.info);
  png_uint_32 h = png_get_image_height(r.png, r.info);
  if (w < 1 || h < 1) throw std::runtime_error(png_path + ": empty label map");

  std::vector<png_byte> raw(static_cast<size_t>(w) * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; y++) rows[y] = raw.data() + static_cast<size_t>(y) * w;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);

  LabelMap map(static_cast<int>(w), static_cast<int>(h));
  for (size_t i = 0; i < raw.size(); i++)
    map.labels[i] = raw[i] == 255 ? LabelMap::kVoid : static_cast<int32_t>(raw[i]);
  return map;
}

}  // namespace latticecrf
