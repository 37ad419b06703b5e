#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "defectsim/imaging.hpp"

namespace defectsim {

/// Tight box around one 8-connected region of equal non-zero mask ID.
/// Corners are inclusive pixel coordinates.
struct BoundingBox {
  std::uint32_t defect_id = 0;
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  std::size_t area = 0;  // pixels in the region

  bool operator==(const BoundingBox&) const = default;
};

/// Components in row-major order of their first pixel.
inline std::vector<BoundingBox> mask_components(const MaskMap& mask) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<BoundingBox> out;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto start = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
      const std::uint32_t id = mask[start];
      if (id == 0 || seen[start]) continue;
      BoundingBox box{id, x, y, x, y, 0};
      seen[start] = 1;
      stack.assign(1, {x, y});
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        ++box.area;
        box.x0 = std::min(box.x0, cx);
        box.x1 = std::max(box.x1, cx);
        box.y0 = std::min(box.y0, cy);
        box.y1 = std::max(box.y1, cy);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx;
            const int ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const auto ni = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
            if (seen[ni] || mask[ni] != id) continue;
            seen[ni] = 1;
            stack.emplace_back(nx, ny);
          }
      }
      out.push_back(box);
    }
  return out;
}

inline void to_json(nlohmann::json& j, const BoundingBox& b) {
  j = {{"defect_id", b.defect_id}, {"bbox", {b.x0, b.y0, b.x1, b.y1}}, {"area", b.area}};
}

inline void from_json(const nlohmann::json& j, BoundingBox& b) {
  b.defect_id = j.at("defect_id").get<std::uint32_t>();
  const auto& bb = j.at("bbox");
  b.x0 = bb.at(0).get<int>();
  b.y0 = bb.at(1).get<int>();
  b.x1 = bb.at(2).get<int>();
  b.y1 = bb.at(3).get<int>();
  b.area = j.value("area", std::size_t{0});
}

}  // namespace defectsim
