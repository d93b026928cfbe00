#pragma once

// Frozen visual feature extraction (raster -> dense vector) and the VVF1
// on-disk vector cache that lets training skip extraction entirely.
//
// VVF1 layout (little-endian):
//   "VVF1" | u32 dim | records...
//   record = u16 id_len | id_len bytes UTF-8 doc id | dim x f32

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vitor/common.hpp"
#include "vitor/image_io.hpp"

namespace vitor {

struct VisualVector {
  std::string doc_id;
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const VisualVector&) const = default;
};

struct ExtractorDescriptor {
  std::string name;
  std::size_t output_dim = 0;
  std::string version;
};

// A frozen feature extractor: maps an image to a fixed-size vector and is
// never trained.
class VisualExtractor {
 public:
  virtual ~VisualExtractor() = default;
  virtual ExtractorDescriptor descriptor() const = 0;
  virtual VisualVector extract(const std::string& doc_id, const RasterImage& img) const = 0;
};

inline constexpr std::size_t kExtractorInputSide = 224;
inline constexpr std::size_t kRawInputSize = 3 * kExtractorInputSide * kExtractorInputSide;

namespace detail {

struct Tap {
  std::size_t src;
  double weight;
};

// Box-filter resampling weights from `src` samples to `dst` samples. Output o
// covers source interval [o*src/dst, (o+1)*src/dst); overlaps are computed in
// integer units of 1/dst source pixels.
inline std::vector<std::vector<Tap>> area_weights(std::size_t src, std::size_t dst) {
  std::vector<std::vector<Tap>> out(dst);
  for (std::size_t o = 0; o < dst; ++o) {
    const std::size_t lo = o * src;
    const std::size_t hi = (o + 1) * src;
    for (std::size_t i = lo / dst; i * dst < hi && i < src; ++i) {
      const std::size_t a = std::max(lo, i * dst);
      const std::size_t b = std::min(hi, (i + 1) * dst);
      if (b > a) out[o].push_back({i, static_cast<double>(b - a) / static_cast<double>(src)});
    }
  }
  return out;
}

}  // namespace detail

// Luminance (0.299 R + 0.587 G + 0.114 B) resampled to side x side.
inline std::vector<double> luminance_resampled(const RasterImage& img, std::size_t side = kExtractorInputSide) {
  img.validate();
  std::vector<double> lum(img.width * img.height);
  for (std::size_t i = 0; i < lum.size(); ++i) {
    const std::uint8_t* p = &img.data[i * img.channels];
    lum[i] = img.channels == 1 ? p[0] : 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  const auto wx = detail::area_weights(img.width, side);
  const auto wy = detail::area_weights(img.height, side);
  std::vector<double> rows(img.height * side);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < side; ++x) {
      double acc = 0.0;
      for (const auto& t : wx[x]) acc += t.weight * lum[y * img.width + t.src];
      rows[y * side + x] = acc;
    }
  std::vector<double> out(side * side);
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) {
      double acc = 0.0;
      for (const auto& t : wy[y]) acc += t.weight * rows[t.src * side + x];
      out[y * side + x] = acc;
    }
  return out;
}

// Mean intensity in [0,1] of each cell of a grid x grid partition of the
// 224x224 luminance image, row-major.
inline VisualVector grid_extract(const RasterImage& img, std::size_t grid, std::string doc_id = {}) {
  if (grid < 1 || grid > kExtractorInputSide) throw Error("grid size must be in 1..224");
  const auto lum = luminance_resampled(img);
  const std::size_t side = kExtractorInputSide;
  VisualVector v{std::move(doc_id), std::vector<float>(grid * grid)};
  for (std::size_t cy = 0; cy < grid; ++cy) {
    const std::size_t y0 = cy * side / grid, y1 = (cy + 1) * side / grid;
    for (std::size_t cx = 0; cx < grid; ++cx) {
      const std::size_t x0 = cx * side / grid, x1 = (cx + 1) * side / grid;
      double acc = 0.0;
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) acc += lum[y * side + x];
      const double mean = acc / static_cast<double>((y1 - y0) * (x1 - x0));
      v.values[cy * grid + cx] = static_cast<float>(std::clamp(mean / 255.0, 0.0, 1.0));
    }
  }
  return v;
}

class GridExtractor final : public VisualExtractor {
 public:
  explicit GridExtractor(std::size_t grid) : grid_(grid) {
    if (grid < 1 || grid > kExtractorInputSide) throw Error("grid size must be in 1..224");
  }

  ExtractorDescriptor descriptor() const override { return {"grid-mean", grid_ * grid_, "1"}; }

  VisualVector extract(const std::string& doc_id, const RasterImage& img) const override {
    return grid_extract(img, grid_, doc_id);
  }

 private:
  std::size_t grid_;
};

// Percentage by which a dim-sized vector shrinks the 3x224x224 raw input.
inline double input_size_reduction(std::size_t dim) {
  if (dim < 1) throw Error("dimension must be positive");
  return 100.0 * (1.0 - static_cast<double>(dim) / static_cast<double>(kRawInputSize));
}

// ---- VVF1 ------------------------------------------------------------------

inline constexpr std::string_view kVectorMagic = "VVF1";

inline std::string encode_vectors(std::span<const VisualVector> vectors, std::optional<std::size_t> dim = {}) {
  std::size_t d = dim.value_or(vectors.empty() ? 0 : vectors.front().dim());
  std::string out(kVectorMagic);
  if (d > 0xffffffffu) throw Error("vector dimension too large");
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (const auto& v : vectors) {
    if (v.dim() != d)
      throw Error("dimension mismatch: " + v.doc_id + " has " + std::to_string(v.dim()) + ", expected " +
                  std::to_string(d));
    if (v.doc_id.empty() || v.doc_id.size() > 0xffff) throw Error("doc id length out of range");
    for (float x : v.values)
      if (!std::isfinite(x)) throw Error("non-finite value in vector " + v.doc_id);
    le::put<std::uint16_t>(out, static_cast<std::uint16_t>(v.doc_id.size()));
    out += v.doc_id;
    for (float x : v.values) le::put<float>(out, x);
  }
  return out;
}

struct VectorFile {
  std::size_t dim = 0;
  std::vector<VisualVector> vectors;
};

inline VectorFile decode_vectors(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != kVectorMagic) throw Error("not a vector file (bad magic)");
  le::Reader r(bytes.substr(4));
  std::uint32_t dim = 0;
  if (!r.get(dim)) throw Error("truncated vector file: missing header");
  VectorFile vf;
  vf.dim = dim;
  while (!r.done()) {
    std::uint16_t len = 0;
    std::string_view id;
    if (!r.get(len) || !r.get_bytes(len, id)) throw Error("truncated vector file: record header");
    VisualVector v{std::string(id), std::vector<float>(dim)};
    for (auto& x : v.values)
      if (!r.get(x)) throw Error("truncated vector file: record " + v.doc_id);
    vf.vectors.push_back(std::move(v));
  }
  return vf;
}

inline void save_vectors(std::span<const VisualVector> vectors, const std::filesystem::path& path,
                         std::optional<std::size_t> dim = {}) {
  write_file_atomic(path, encode_vectors(vectors, dim));
}

inline VectorFile load_vectors(const std::filesystem::path& path) { return decode_vectors(read_file(path)); }

// Debug mirror of a VVF1 file: `doc_id <TAB> v1 <TAB> v2 ...`.
inline std::string emit_vectors_tsv(std::span<const VisualVector> vectors) {
  std::string out;
  for (const auto& v : vectors) {
    out += v.doc_id;
    for (float x : v.values) {
      out += '\t';
      out += format_double(static_cast<double>(x));
    }
    out += '\n';
  }
  return out;
}

// Lookup table keyed by doc id.
class VectorStore {
 public:
  VectorStore() = default;
  explicit VectorStore(VectorFile file) : dim_(file.dim) {
    for (auto& v : file.vectors) {
      auto id = v.doc_id;
      by_id_.insert_or_assign(std::move(id), std::move(v));
    }
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return by_id_.size(); }

  const VisualVector* find(const std::string& doc_id) const {
    auto it = by_id_.find(doc_id);
    return it == by_id_.end() ? nullptr : &it->second;
  }

 private:
  std::size_t dim_ = 0;
  std::map<std::string, VisualVector> by_id_;
};

// ---- image lookup -----------------------------------------------------------

// `doc_id <TAB> path`; relative paths resolve against the manifest's directory.
inline std::map<std::string, std::filesystem::path> read_image_manifest(const std::filesystem::path& manifest) {
  std::map<std::string, std::filesystem::path> out;
  const auto lines = read_lines(manifest);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto cols = split(lines[i], '\t');
    if (cols.size() != 2) throw ParseError(manifest.string(), i + 1, "expected doc_id<TAB>path");
    std::filesystem::path p{std::string(trim(cols[1]))};
    if (p.is_relative()) p = manifest.parent_path() / p;
    out[std::string(trim(cols[0]))] = p;
  }
  return out;
}

// Finds `<dir>/<doc_id>.<ext>` for a supported raster extension.
inline std::optional<std::filesystem::path> find_image(const std::filesystem::path& dir, const std::string& doc_id) {
  for (const char* ext : {".png", ".ppm", ".pgm", ".pnm"}) {
    auto p = dir / (doc_id + ext);
    if (std::filesystem::exists(p)) return p;
  }
  return std::nullopt;
}

}  // namespace vitor
