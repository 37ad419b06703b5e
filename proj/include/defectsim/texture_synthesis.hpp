#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "defectsim/error.hpp"
#include "defectsim/hash.hpp"
#include "defectsim/image_io.hpp"
#include "defectsim/imaging.hpp"
#include "defectsim/parallel.hpp"

namespace defectsim {

struct PatchSource {
  int map_index = 0;
  int x = 0;
  int y = 0;

  bool operator==(const PatchSource&) const = default;
};

/// Square normal-map patches stored in encoded RGB form.
class PatchDictionary {
 public:
  PatchDictionary() = default;
  PatchDictionary(int patch_size, int stride) : patch_size_(patch_size), stride_(stride) {
    detail::require(patch_size >= 2, ErrorCode::InvalidArgument, "patch size must be at least 2");
    detail::require(stride >= 1, ErrorCode::InvalidArgument, "stride must be at least 1");
  }

  int patch_size() const { return patch_size_; }
  int stride() const { return stride_; }
  std::size_t size() const { return sources_.size(); }
  bool empty() const { return sources_.empty(); }
  std::size_t patch_bytes() const { return static_cast<std::size_t>(patch_size_) * patch_size_ * 3; }

  std::span<const std::uint8_t> patch(std::size_t i) const {
    return std::span<const std::uint8_t>(data_).subspan(i * patch_bytes(), patch_bytes());
  }
  const PatchSource& source(std::size_t i) const { return sources_[i]; }
  const std::vector<std::string>& source_names() const { return source_names_; }
  void set_source_names(std::vector<std::string> names) { source_names_ = std::move(names); }

  void add(std::span<const std::uint8_t> encoded, PatchSource src) {
    detail::require(encoded.size() == patch_bytes(), ErrorCode::DimensionMismatch, "patch has the wrong size");
    data_.insert(data_.end(), encoded.begin(), encoded.end());
    sources_.push_back(src);
  }

  bool operator==(const PatchDictionary&) const = default;

 private:
  int patch_size_ = 0;
  int stride_ = 1;
  std::vector<std::uint8_t> data_;
  std::vector<PatchSource> sources_;
  std::vector<std::string> source_names_;
};

/// Every fully-valid patch_size window at stride offsets of every map.
inline PatchDictionary build_dictionary(const std::vector<NormalMap>& maps, int patch_size, int stride) {
  detail::require(!maps.empty(), ErrorCode::EmptyInput, "no normal maps given");
  PatchDictionary dict(patch_size, stride);
  std::vector<std::uint8_t> buf(dict.patch_bytes());
  for (std::size_t m = 0; m < maps.size(); ++m) {
    const NormalMap& nm = maps[m];
    detail::require(nm.width() >= patch_size && nm.height() >= patch_size, ErrorCode::MapTooSmall,
                    "map " + std::to_string(m) + " is smaller than the patch size");
    const Rgb8Image enc = encode_normal_map(nm);
    for (int y = 0; y + patch_size <= nm.height(); y += stride)
      for (int x = 0; x + patch_size <= nm.width(); x += stride) {
        bool complete = true;
        for (int dy = 0; dy < patch_size && complete; ++dy)
          for (int dx = 0; dx < patch_size; ++dx)
            if (!nm.valid(x + dx, y + dy)) {
              complete = false;
              break;
            }
        if (!complete) continue;
        auto* out = buf.data();
        for (int dy = 0; dy < patch_size; ++dy) {
          const std::uint8_t* row = enc.pixel(x, y + dy);
          out = std::copy(row, row + 3 * patch_size, out);
        }
        dict.add(buf, {static_cast<int>(m), x, y});
      }
  }
  return dict;
}

struct PatchMatch {
  std::size_t index = 0;
  double distance = 0.0;

  bool operator==(const PatchMatch&) const = default;
};

namespace detail {

struct RawMatch {
  std::uint64_t ssd;
  std::size_t index;
  bool operator<(const RawMatch& o) const { return ssd != o.ssd ? ssd < o.ssd : index < o.index; }
};

// Exact top-k over [begin, end). Scanning in index order means a later patch
// at equal distance never displaces an earlier one, so a partial sum that
// reaches the current k-th distance can be abandoned.
inline std::vector<RawMatch> top_k_range(const PatchDictionary& dict, std::span<const std::uint32_t> offsets,
                                         std::span<const std::uint8_t> values, std::size_t k, std::size_t begin,
                                         std::size_t end) {
  std::vector<RawMatch> heap;  // max-heap on (ssd, index)
  heap.reserve(k + 1);
  constexpr std::size_t kCheckEvery = 48;
  for (std::size_t p = begin; p < end; ++p) {
    const std::uint8_t* patch = dict.patch(p).data();
    const bool full = heap.size() == k;
    const std::uint64_t bound = full ? heap.front().ssd : std::numeric_limits<std::uint64_t>::max();
    std::uint64_t ssd = 0;
    bool abandoned = false;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      const int d = static_cast<int>(patch[offsets[i]]) - static_cast<int>(values[i]);
      ssd += static_cast<std::uint64_t>(d * d);
      if (full && (i % kCheckEvery) == kCheckEvery - 1 && ssd >= bound) {
        abandoned = true;
        break;
      }
    }
    if (abandoned) continue;
    if (!full) {
      heap.push_back({ssd, p});
      std::push_heap(heap.begin(), heap.end());
    } else if (ssd < bound) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = {ssd, p};
      std::push_heap(heap.begin(), heap.end());
    }
  }
  return heap;
}

}  // namespace detail

/// The k dictionary patches closest to `query` over the pixels flagged in
/// `mask`. Distance is the mean, over valid pixels, of the summed squared
/// channel differences of the normalized (code / 255) encodings. Ties go to
/// the lower index. Exact: matches a plain linear scan.
inline std::vector<PatchMatch> nearest_patches(std::span<const std::uint8_t> query, std::span<const std::uint8_t> mask,
                                               const PatchDictionary& dict, std::size_t k) {
  detail::require(!dict.empty(), ErrorCode::EmptyDictionary, "dictionary is empty");
  const std::size_t pixels = static_cast<std::size_t>(dict.patch_size()) * dict.patch_size();
  detail::require(query.size() == pixels * 3 && mask.size() == pixels, ErrorCode::DimensionMismatch,
                  "query does not match the dictionary patch size");
  detail::require(k >= 1, ErrorCode::InvalidArgument, "k must be at least 1");

  std::vector<std::uint32_t> offsets;
  std::vector<std::uint8_t> values;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < pixels; ++i) {
    if (!mask[i]) continue;
    ++valid;
    for (std::size_t c = 0; c < 3; ++c) {
      offsets.push_back(static_cast<std::uint32_t>(3 * i + c));
      values.push_back(query[3 * i + c]);
    }
  }
  detail::require(valid > 0, ErrorCode::EmptyQueryMask, "query mask has no valid pixels");
  k = std::min(k, dict.size());

  const std::size_t workers = std::min<std::size_t>(max_threads(), std::max<std::size_t>(1, dict.size() / 256));
  std::vector<std::vector<detail::RawMatch>> partial(workers);
  const std::size_t chunk = (dict.size() + workers - 1) / workers;
  parallel_for(workers, [&](std::size_t w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(dict.size(), begin + chunk);
    if (begin < end) partial[w] = detail::top_k_range(dict, offsets, values, k, begin, end);
  });

  std::vector<detail::RawMatch> merged;
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  std::sort(merged.begin(), merged.end());
  merged.resize(std::min(k, merged.size()));

  const double norm = 255.0 * 255.0 * static_cast<double>(valid);
  std::vector<PatchMatch> out;
  out.reserve(merged.size());
  for (const auto& m : merged) out.push_back({m.index, static_cast<double>(m.ssd) / norm});
  return out;
}

struct SynthesisConfig {
  int target_width = 1024;
  int target_height = 1024;
  int overlap = 4;  // pixels shared by neighbouring fill windows
  int top_k = 3;
  std::uint64_t rng_seed = 0;

  void validate(const PatchDictionary& dict) const {
    detail::require(!dict.empty(), ErrorCode::EmptyDictionary, "dictionary is empty");
    detail::require(target_width > 0 && target_height > 0, ErrorCode::InvalidArgument, "target size must be positive");
    detail::require(overlap >= 1 && overlap < dict.patch_size(), ErrorCode::InvalidArgument,
                    "overlap must lie in [1, patch_size)");
    detail::require(top_k >= 1 && static_cast<std::size_t>(top_k) <= dict.size(), ErrorCode::InvalidArgument,
                    "top_k must lie in [1, dictionary size]");
  }
};

/// One fill step: the dictionary patch copied into the unfilled pixels of the
/// window whose top-left corner is (x, y).
struct PasteRecord {
  int x = 0;
  int y = 0;
  std::size_t patch = 0;
  double distance = 0.0;
  int filled_before = 0;
  int pixels_written = 0;

  bool operator==(const PasteRecord&) const = default;
};

struct SynthesisResult {
  NormalMap texture;
  std::vector<PasteRecord> log;
  int seed_x = 0;  // top-left of the seed in the output
  int seed_y = 0;
};

namespace detail {

/// Window origins along one axis: a lattice of step (patch - overlap)
/// anchored at the seed, clamped into [0, extent - patch].
inline std::vector<int> window_origins(int anchor, int extent, int patch, int step) {
  std::vector<int> out;
  int start = anchor;
  while (start > -patch) start -= step;
  for (int p = start; p < extent; p += step) {
    if (p + patch <= 0) continue;
    out.push_back(std::clamp(p, 0, extent - patch));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

/// Grows a texture outward from `seed` (centered in the target) by repeatedly
/// filling the frontier window with the most filled pixels (ties: smallest
/// row-major origin) from one of its top_k nearest dictionary patches.
/// Already-filled pixels are never overwritten and nothing is blended.
inline SynthesisResult synthesize(const NormalMap& seed, const PatchDictionary& dict, const SynthesisConfig& cfg) {
  cfg.validate(dict);
  const int ps = dict.patch_size();
  detail::require(seed.width() >= ps && seed.height() >= ps, ErrorCode::SeedTooSmall,
                  "seed is smaller than the patch size");
  detail::require(seed.width() <= cfg.target_width && seed.height() <= cfg.target_height,
                  ErrorCode::SeedLargerThanTarget, "seed is larger than the target");
  detail::require(seed.valid_count() > 0, ErrorCode::InvalidArgument, "seed has no valid pixels");

  const int w = cfg.target_width;
  const int h = cfg.target_height;
  const auto npix = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const int sx = (w - seed.width()) / 2;
  const int sy = (h - seed.height()) / 2;

  std::vector<std::uint8_t> canvas(npix * 3, 0);
  std::vector<std::uint8_t> filled(npix, 0);
  std::vector<Vec3> out_normals(npix, NormalMap::placeholder());
  std::vector<std::uint8_t> from_seed(npix, 0);
  for (int y = 0; y < seed.height(); ++y)
    for (int x = 0; x < seed.width(); ++x) {
      if (!seed.valid(x, y)) continue;
      const auto i = static_cast<std::size_t>(sy + y) * w + static_cast<std::size_t>(sx + x);
      const auto code = encode_normal(seed.at(x, y));
      std::copy(code.begin(), code.end(), canvas.begin() + static_cast<std::ptrdiff_t>(3 * i));
      filled[i] = 1;
      from_seed[i] = 1;
      out_normals[i] = seed.at(x, y).normalized();
    }

  const int step = ps - cfg.overlap;
  const std::vector<int> xs = detail::window_origins(sx, w, ps, step);
  const std::vector<int> ys = detail::window_origins(sy, h, ps, step);
  const int window_pixels = ps * ps;

  auto count_filled = [&](int x0, int y0) {
    int c = 0;
    for (int dy = 0; dy < ps; ++dy) {
      const std::uint8_t* row = filled.data() + static_cast<std::size_t>(y0 + dy) * w + x0;
      for (int dx = 0; dx < ps; ++dx) c += row[dx];
    }
    return c;
  };

  std::vector<int> counts(xs.size() * ys.size());
  for (std::size_t j = 0; j < ys.size(); ++j)
    for (std::size_t i = 0; i < xs.size(); ++i) counts[j * xs.size() + i] = count_filled(xs[i], ys[j]);

  Rng rng(cfg.rng_seed);
  SynthesisResult result;
  result.seed_x = sx;
  result.seed_y = sy;
  std::vector<std::uint8_t> query(dict.patch_bytes());
  std::vector<std::uint8_t> qmask(static_cast<std::size_t>(window_pixels));

  for (;;) {
    int best = -1;
    int best_count = 0;
    for (std::size_t idx = 0; idx < counts.size(); ++idx) {
      const int c = counts[idx];
      if (c > best_count && c < window_pixels) {
        best = static_cast<int>(idx);
        best_count = c;
      }
    }
    if (best < 0) break;

    const std::size_t bi = static_cast<std::size_t>(best) % xs.size();
    const std::size_t bj = static_cast<std::size_t>(best) / xs.size();
    const int x0 = xs[bi];
    const int y0 = ys[bj];

    for (int dy = 0; dy < ps; ++dy)
      for (int dx = 0; dx < ps; ++dx) {
        const auto src = static_cast<std::size_t>(y0 + dy) * w + static_cast<std::size_t>(x0 + dx);
        const auto dst = static_cast<std::size_t>(dy * ps + dx);
        qmask[dst] = filled[src];
        std::copy_n(canvas.begin() + static_cast<std::ptrdiff_t>(3 * src), 3,
                    query.begin() + static_cast<std::ptrdiff_t>(3 * dst));
      }
    const auto matches = nearest_patches(query, qmask, dict, static_cast<std::size_t>(cfg.top_k));
    const PatchMatch& chosen = matches[uniform_index(rng, matches.size())];
    const auto patch = dict.patch(chosen.index);

    int written = 0;
    for (int dy = 0; dy < ps; ++dy)
      for (int dx = 0; dx < ps; ++dx) {
        const auto dst = static_cast<std::size_t>(y0 + dy) * w + static_cast<std::size_t>(x0 + dx);
        if (filled[dst]) continue;
        const auto src = static_cast<std::size_t>(3 * (dy * ps + dx));
        std::copy_n(patch.begin() + static_cast<std::ptrdiff_t>(src), 3,
                    canvas.begin() + static_cast<std::ptrdiff_t>(3 * dst));
        filled[dst] = 1;
        ++written;
      }
    result.log.push_back({x0, y0, chosen.index, chosen.distance, best_count, written});

    // Refresh every window that overlaps the one just filled.
    for (std::size_t j = 0; j < ys.size(); ++j) {
      if (ys[j] + ps <= y0 || ys[j] >= y0 + ps) continue;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] + ps <= x0 || xs[i] >= x0 + ps) continue;
        counts[j * xs.size() + i] = count_filled(xs[i], ys[j]);
      }
    }
  }

  for (std::size_t i = 0; i < npix; ++i) {
    detail::require(filled[i] != 0, ErrorCode::InvalidArgument, "synthesis left unfilled pixels");
    if (!from_seed[i]) out_normals[i] = decode_normal(canvas[3 * i], canvas[3 * i + 1], canvas[3 * i + 2]);
  }
  result.texture = NormalMap(w, h, std::move(out_normals));
  return result;
}

// Persistence: <dir>/index.json plus one encoded RGB PNG per patch.

inline void save_dictionary(const PatchDictionary& dict, const fs::path& dir) {
  fs::create_directories(dir / "patches");
  nlohmann::json index = {{"patch_size", dict.patch_size()},
                          {"stride", dict.stride()},
                          {"count", dict.size()},
                          {"sources", dict.source_names()}};
  nlohmann::json patches = nlohmann::json::array();
  for (std::size_t i = 0; i < dict.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "patch_%06zu.png", i);
    Rgb8Image img(dict.patch_size(), dict.patch_size());
    const auto p = dict.patch(i);
    std::copy(p.begin(), p.end(), img.data.begin());
    save_rgb8(img, dir / "patches" / name);
    const auto& s = dict.source(i);
    patches.push_back({{"file", std::string("patches/") + name}, {"map", s.map_index}, {"x", s.x}, {"y", s.y}});
  }
  index["patches"] = std::move(patches);
  std::ofstream out(dir / "index.json");
  detail::require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + (dir / "index.json").string());
  out << index.dump(2) << '\n';
}

inline PatchDictionary load_dictionary(const fs::path& dir) {
  const fs::path index_path = dir / "index.json";
  detail::require(fs::exists(index_path), ErrorCode::FileNotFound, index_path.string());
  nlohmann::json index;
  try {
    std::ifstream in(index_path);
    index = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::UnsupportedFormat, index_path.string() + ": " + e.what());
  }
  PatchDictionary dict(index.at("patch_size").get<int>(), index.value("stride", 1));
  dict.set_source_names(index.value("sources", std::vector<std::string>{}));
  for (const auto& entry : index.at("patches")) {
    const Rgb8Image img = load_rgb8(dir / entry.at("file").get<std::string>());
    detail::require(img.width == dict.patch_size() && img.height == dict.patch_size(), ErrorCode::DimensionMismatch,
                    "patch raster has the wrong size");
    dict.add(img.data, {entry.value("map", 0), entry.value("x", 0), entry.value("y", 0)});
  }
  return dict;
}

inline nlohmann::json paste_log_json(const SynthesisResult& r, const SynthesisConfig& cfg, int patch_size) {
  nlohmann::json pastes = nlohmann::json::array();
  for (const auto& p : r.log)
    pastes.push_back({{"x", p.x},
                      {"y", p.y},
                      {"patch", p.patch},
                      {"distance", p.distance},
                      {"filled_before", p.filled_before},
                      {"pixels_written", p.pixels_written}});
  return {{"target_width", cfg.target_width},
          {"target_height", cfg.target_height},
          {"patch_size", patch_size},
          {"overlap", cfg.overlap},
          {"top_k", cfg.top_k},
          {"rng_seed", cfg.rng_seed},
          {"seed_x", r.seed_x},
          {"seed_y", r.seed_y},
          {"pastes", std::move(pastes)}};
}

}  // namespace defectsim
