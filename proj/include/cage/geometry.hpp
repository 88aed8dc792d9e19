#pragma once

#include <array>
#include <optional>
#include <vector>

namespace cage {

struct BoundingBox {
  float x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  float score = 0;

  float width() const { return x2 - x1; }
  float height() const { return y2 - y1; }
  float area() const { return width() * height(); }
  bool degenerate() const { return x2 <= x1 || y2 <= y1; }
};

struct Point2f {
  float x = 0, y = 0;
};

/// Five facial points in original-image coordinates:
/// eyes, nose, mouth corners.
using Landmarks = std::array<Point2f, 5>;

enum class Stage { P, R, O };

struct Detection {
  BoundingBox box;
  std::optional<Landmarks> landmarks;  // present for O-stage detections only
  Stage stage = Stage::O;
};

enum class IouMode { Union, Min };

float iou(const BoundingBox& a, const BoundingBox& b, IouMode mode = IouMode::Union);

/// Greedy NMS: keep the highest-score box, drop every remaining box whose
/// overlap with it exceeds threshold, repeat. Ties in score are broken by
/// coordinates so the result does not depend on input order. Output is
/// sorted by descending score.
std::vector<BoundingBox> nms(std::vector<BoundingBox> boxes, float threshold, IouMode mode);

/// Offsets (dx1, dy1, dx2, dy2) are fractions of the box width/height.
/// The result may be degenerate (x2' <= x1'); callers drop such boxes.
BoundingBox apply_bbox_regression(const BoundingBox& box, const std::array<float, 4>& offsets);

/// Expands the shorter side about the center so width == height.
BoundingBox square_pad(const BoundingBox& box);

/// Maps a P-Net output cell (stride 2, window 12) back to original-image
/// coordinates for the pyramid level with the given scale.
BoundingBox map_pnet_cell(int row, int col, float scale);

}  // namespace cage
