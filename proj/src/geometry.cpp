#include "cage/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace cage {

float iou(const BoundingBox& a, const BoundingBox& b, IouMode mode) {
  const float ix1 = std::max(a.x1, b.x1);
  const float iy1 = std::max(a.y1, b.y1);
  const float ix2 = std::min(a.x2, b.x2);
  const float iy2 = std::min(a.y2, b.y2);
  const float inter = std::max(0.0f, ix2 - ix1) * std::max(0.0f, iy2 - iy1);
  const float denom = mode == IouMode::Union ? a.area() + b.area() - inter
                                             : std::min(a.area(), b.area());
  return denom > 0 ? inter / denom : 0.0f;
}

static bool score_order(const BoundingBox& a, const BoundingBox& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.x1 != b.x1) return a.x1 < b.x1;
  if (a.y1 != b.y1) return a.y1 < b.y1;
  if (a.x2 != b.x2) return a.x2 < b.x2;
  return a.y2 < b.y2;
}

std::vector<BoundingBox> nms(std::vector<BoundingBox> boxes, float threshold, IouMode mode) {
  std::sort(boxes.begin(), boxes.end(), score_order);
  std::vector<BoundingBox> kept;
  std::vector<bool> suppressed(boxes.size(), false);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (suppressed[i]) continue;
    kept.push_back(boxes[i]);
    for (std::size_t j = i + 1; j < boxes.size(); ++j)
      if (!suppressed[j] && iou(boxes[i], boxes[j], mode) > threshold) suppressed[j] = true;
  }
  return kept;
}

BoundingBox apply_bbox_regression(const BoundingBox& box, const std::array<float, 4>& offsets) {
  const float w = box.width();
  const float h = box.height();
  BoundingBox out = box;
  out.x1 = box.x1 + offsets[0] * w;
  out.y1 = box.y1 + offsets[1] * h;
  out.x2 = box.x2 + offsets[2] * w;
  out.y2 = box.y2 + offsets[3] * h;
  return out;
}

BoundingBox square_pad(const BoundingBox& box) {
  const float w = box.width();
  const float h = box.height();
  const float side = std::max(w, h);
  BoundingBox out = box;
  out.x1 = box.x1 + 0.5f * (w - side);
  out.x2 = out.x1 + side;
  out.y1 = box.y1 + 0.5f * (h - side);
  out.y2 = out.y1 + side;
  return out;
}

BoundingBox map_pnet_cell(int row, int col, float scale) {
  BoundingBox box;
  box.x1 = static_cast<float>(col) * 2 / scale;
  box.y1 = static_cast<float>(row) * 2 / scale;
  box.x2 = (static_cast<float>(col) * 2 + 12) / scale;
  box.y2 = (static_cast<float>(row) * 2 + 12) / scale;
  return box;
}

}  // namespace cage
