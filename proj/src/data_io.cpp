#include "latticecrf/data_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace latticecrf {

namespace {

constexpr char kUnaryMagic[4] = {'D', 'C', 'U', '1'};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 24));
}

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

UnaryField load_unary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (bytes.size() < 16 || std::memcmp(bytes.data(), kUnaryMagic, 4) != 0)
    throw std::runtime_error(path + ": bad unary container magic");
  uint64_t w = get_u32(&bytes[4]);
  uint64_t h = get_u32(&bytes[8]);
  uint64_t L = get_u32(&bytes[12]);
  if (w == 0 || h == 0 || L == 0) throw std::runtime_error(path + ": zero dimension in unary container");
  uint64_t count = w * h * L;
  if (count > (1ull << 31)) throw std::runtime_error(path + ": unary container too large");
  if (bytes.size() != 16 + 4 * count) throw std::runtime_error(path + ": truncated unary payload");

  UnaryField u(static_cast<int>(w), static_cast<int>(h), static_cast<int>(L));
  const uint8_t* p = bytes.data() + 16;
  for (uint64_t i = 0; i < count; i++, p += 4) {
    uint32_t raw = get_u32(p);
    float v;
    std::memcpy(&v, &raw, 4);
    if (!std::isfinite(v)) throw std::runtime_error(path + ": non-finite unary cost");
    u.costs.data()[i] = static_cast<double>(v);
  }
  return u;
}

void save_unary(const UnaryField& unary, const std::string& path) {
  unary.validate();
  for (size_t i = 0; i < unary.costs.size(); i++) {
    double v = unary.costs.data()[i];
    if (std::abs(v) > std::numeric_limits<float>::max())
      throw std::invalid_argument("save_unary: cost exceeds float32 range");
  }

  std::vector<uint8_t> bytes;
  bytes.reserve(16 + 4 * unary.costs.size());
  bytes.insert(bytes.end(), kUnaryMagic, kUnaryMagic + 4);
  put_u32(bytes, static_cast<uint32_t>(unary.width));
  put_u32(bytes, static_cast<uint32_t>(unary.height));
  put_u32(bytes, static_cast<uint32_t>(unary.num_labels));
  for (size_t i = 0; i < unary.costs.size(); i++) {
    float v = static_cast<float>(unary.costs.data()[i]);
    uint32_t raw;
    std::memcpy(&raw, &v, 4);
    put_u32(bytes, raw);
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("cannot write " + path);
}

CompatibilityMatrix load_compatibility(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  int L = 0;
  if (!(f >> L) || L < 1) throw std::runtime_error(path + ": bad compatibility header");
  CompatibilityMatrix c;
  c.mu = Matrix(L, L);
  for (int a = 0; a < L; a++)
    for (int b = 0; b < L; b++)
      if (!(f >> c.mu(a, b))) throw std::runtime_error(path + ": truncated compatibility matrix");
  c.validate();
  return c;
}

void save_compatibility(const CompatibilityMatrix& c, const std::string& path) {
  c.validate();
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  const int L = c.num_labels();
  f << L << "\n";
  f.precision(17);
  for (int a = 0; a < L; a++) {
    for (int b = 0; b < L; b++) f << c.mu(a, b) << (b + 1 < L ? " " : "\n");
  }
  if (!f) throw std::runtime_error("cannot write " + path);
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::filesystem::path base = std::filesystem::path(path).parent_path();

  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };

  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    lineno++;
    std::istringstream ss(line);
    std::string a, b, c, extra;
    if (!(ss >> a)) continue;
    if (a[0] == '#') continue;
    if (!(ss >> b >> c) || (ss >> extra))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected image, unary, and ground-truth paths");
    entries.push_back({resolve(a), resolve(b), resolve(c)});
  }
  if (entries.empty()) throw std::runtime_error(path + ": empty manifest");
  return entries;
}

}  // namespace latticecrf
