#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "defectsim/imaging.hpp"
#include "defectsim/texture_synthesis.hpp"

namespace oracle {

/// Plain linear scan over every patch, sorted by (distance, index).
inline std::vector<defectsim::PatchMatch> brute_force_nearest(std::span<const std::uint8_t> query,
                                                              std::span<const std::uint8_t> mask,
                                                              const defectsim::PatchDictionary& dict, std::size_t k) {
  std::size_t valid = 0;
  for (auto m : mask) valid += m != 0;
  struct Entry {
    std::uint64_t ssd;
    std::size_t index;
  };
  std::vector<Entry> all;
  for (std::size_t p = 0; p < dict.size(); ++p) {
    const auto patch = dict.patch(p);
    std::uint64_t ssd = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      for (std::size_t c = 0; c < 3; ++c) {
        const long d = static_cast<long>(patch[3 * i + c]) - static_cast<long>(query[3 * i + c]);
        ssd += static_cast<std::uint64_t>(d * d);
      }
    }
    all.push_back({ssd, p});
  }
  std::stable_sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.ssd < b.ssd; });
  all.resize(std::min(k, all.size()));
  std::vector<defectsim::PatchMatch> out;
  for (const auto& e : all) out.push_back({e.index, static_cast<double>(e.ssd) / (255.0 * 255.0 * valid)});
  return out;
}

/// Rebuilds a synthesized texture from the seed, the dictionary and the paste
/// log alone. Returns an empty map if any log entry disagrees with the replay.
inline defectsim::NormalMap replay_paste_log(const defectsim::NormalMap& seed, const defectsim::PatchDictionary& dict,
                                             const defectsim::SynthesisResult& r, int width, int height) {
  using namespace defectsim;
  const int ps = dict.patch_size();
  const auto n = static_cast<std::size_t>(width) * height;
  std::vector<Vec3> normals(n, NormalMap::placeholder());
  std::vector<std::uint8_t> filled(n, 0);
  for (int y = 0; y < seed.height(); ++y)
    for (int x = 0; x < seed.width(); ++x)
      if (seed.valid(x, y)) {
        const auto i = static_cast<std::size_t>(r.seed_y + y) * width + (r.seed_x + x);
        normals[i] = seed.at(x, y).normalized();
        filled[i] = 1;
      }
  for (const auto& p : r.log) {
    const auto patch = dict.patch(p.patch);
    int filled_before = 0, written = 0;
    for (int dy = 0; dy < ps; ++dy)
      for (int dx = 0; dx < ps; ++dx) {
        const auto i = static_cast<std::size_t>(p.y + dy) * width + (p.x + dx);
        if (filled[i]) {
          ++filled_before;
          continue;
        }
        const auto* c = patch.data() + 3 * (dy * ps + dx);
        normals[i] = decode_normal(c[0], c[1], c[2]);
        filled[i] = 1;
        ++written;
      }
    if (filled_before != p.filled_before || written != p.pixels_written) return {};
  }
  for (auto f : filled)
    if (!f) return {};
  return NormalMap(width, height, std::move(normals));
}

}  // namespace oracle
