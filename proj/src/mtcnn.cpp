#include "cage/mtcnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cage/image_ops.hpp"
#include "cage/nn_ops.hpp"

namespace cage {

std::vector<PyramidLevel> build_pyramid(const Tensorf& image, int min_face, float factor) {
  if (image.rank() != 3)
    throw ShapeError("build_pyramid expects an HWC image, got " + shape_string(image.shape()));
  if (min_face < 12) throw ValueError("min_face must be >= 12");
  if (!(factor > 0.0f && factor < 1.0f)) throw ValueError("pyramid factor must be in (0,1)");
  const int h = image.dim(0), w = image.dim(1);
  const double min_side = std::min(h, w);
  std::vector<PyramidLevel> levels;
  double scale = 12.0 / min_face;
  while (min_side * scale >= 12.0) {
    const int lh = static_cast<int>(std::lround(h * scale));
    const int lw = static_cast<int>(std::lround(w * scale));
    PyramidLevel level;
    level.scale = static_cast<float>(scale);
    level.image = (lh == h && lw == w) ? image : rescale_image(image, lh, lw);
    levels.push_back(std::move(level));
    scale *= factor;
  }
  return levels;
}

std::vector<BoundingBox> pnet_stage(const Tensorf& image, const PnetFn& net, float threshold,
                                    int min_face, float factor) {
  std::vector<BoundingBox> all;
  for (const PyramidLevel& level : build_pyramid(image, min_face, factor)) {
    const PnetOutput out = net(level.image);
    if (out.prob.rank() != 2 || out.reg.rank() != 3 || out.reg.dim(0) != out.prob.dim(0) ||
        out.reg.dim(1) != out.prob.dim(1) || out.reg.dim(2) != 4)
      throw ShapeError("pnet output shapes disagree: prob " + shape_string(out.prob.shape()) +
                       ", reg " + shape_string(out.reg.shape()));
    std::vector<BoundingBox> level_boxes;
    for (int r = 0; r < out.prob.dim(0); ++r) {
      for (int c = 0; c < out.prob.dim(1); ++c) {
        if (out.prob(r, c) <= threshold) continue;
        BoundingBox box = map_pnet_cell(r, c, level.scale);
        box.score = out.prob(r, c);
        box = apply_bbox_regression(
            box, {out.reg(r, c, 0), out.reg(r, c, 1), out.reg(r, c, 2), out.reg(r, c, 3)});
        if (!box.degenerate()) level_boxes.push_back(box);
      }
    }
    auto kept = nms(std::move(level_boxes), 0.5f, IouMode::Union);
    all.insert(all.end(), kept.begin(), kept.end());
  }
  return nms(std::move(all), 0.7f, IouMode::Union);
}

std::vector<BoundingBox> rnet_stage(const Tensorf& image, const std::vector<BoundingBox>& candidates,
                                    const RnetFn& net, float threshold) {
  std::vector<BoundingBox> scored;
  for (const BoundingBox& candidate : candidates) {
    const BoundingBox square = square_pad(candidate);
    const RnetOutput out = net(crop_box(image, square, 24));
    if (out.score <= threshold) continue;
    BoundingBox box = apply_bbox_regression(square, out.reg);
    box.score = out.score;
    if (!box.degenerate()) scored.push_back(box);
  }
  return nms(std::move(scored), 0.7f, IouMode::Union);
}

std::vector<Detection> onet_stage(const Tensorf& image, const std::vector<BoundingBox>& candidates,
                                  const OnetFn& net, float threshold) {
  std::vector<Detection> survivors;
  for (const BoundingBox& candidate : candidates) {
    const OnetOutput out = net(crop_box(image, candidate, 48));
    if (out.score <= threshold) continue;
    BoundingBox box = apply_bbox_regression(candidate, out.reg);
    box.score = out.score;
    if (box.degenerate()) continue;
    Detection det;
    det.box = box;
    det.stage = Stage::O;
    // landmarks are normalized within the refined box
    Landmarks pts;
    for (int p = 0; p < 5; ++p) {
      pts[static_cast<std::size_t>(p)].x = box.x1 + out.landmarks[2 * p] * box.width();
      pts[static_cast<std::size_t>(p)].y = box.y1 + out.landmarks[2 * p + 1] * box.height();
    }
    det.landmarks = pts;
    survivors.push_back(std::move(det));
  }
  // min-mode NMS over the refined boxes, carrying the detections along
  std::sort(survivors.begin(), survivors.end(), [](const Detection& a, const Detection& b) {
    if (a.box.score != b.box.score) return a.box.score > b.box.score;
    if (a.box.x1 != b.box.x1) return a.box.x1 < b.box.x1;
    if (a.box.y1 != b.box.y1) return a.box.y1 < b.box.y1;
    if (a.box.x2 != b.box.x2) return a.box.x2 < b.box.x2;
    return a.box.y2 < b.box.y2;
  });
  std::vector<Detection> detections;
  std::vector<bool> suppressed(survivors.size(), false);
  for (std::size_t i = 0; i < survivors.size(); ++i) {
    if (suppressed[i]) continue;
    detections.push_back(survivors[i]);
    for (std::size_t j = i + 1; j < survivors.size(); ++j)
      if (!suppressed[j] && iou(survivors[i].box, survivors[j].box, IouMode::Min) > 0.7f)
        suppressed[j] = true;
  }
  return detections;
}

Tensorf crop_box(const Tensorf& image, const BoundingBox& box, int out_size) {
  if (box.degenerate() || box.area() <= 0)
    throw ValueError("cannot crop a zero-area box");
  return resample_window(image, box.y1, box.x1, box.y2, box.x2, out_size, out_size);
}

Tensorf extract_face_chip(const Tensorf& image, const Detection& detection, int out_size) {
  return crop_box(image, square_pad(detection.box), out_size);
}

// ---------------------------------------------------------------------------
// Concrete cascade networks.
//
// P-Net is fully convolutional with a 12x12 receptive field at stride 2;
// R-Net and O-Net consume 24x24 and 48x48 chips. Layer shapes are fixed by
// expected_detector_shapes().
// ---------------------------------------------------------------------------

namespace {

const std::map<std::string, Shape> kDetectorShapes = {
    {"pnet.conv1.weight", {3, 3, 3, 10}},   {"pnet.conv1.bias", {10}},
    {"pnet.prelu1.slope", {10}},
    {"pnet.conv2.weight", {3, 3, 10, 16}},  {"pnet.conv2.bias", {16}},
    {"pnet.prelu2.slope", {16}},
    {"pnet.conv3.weight", {3, 3, 16, 32}},  {"pnet.conv3.bias", {32}},
    {"pnet.prelu3.slope", {32}},
    {"pnet.score.weight", {1, 1, 32, 2}},   {"pnet.score.bias", {2}},
    {"pnet.reg.weight", {1, 1, 32, 4}},     {"pnet.reg.bias", {4}},

    {"rnet.conv1.weight", {3, 3, 3, 28}},   {"rnet.conv1.bias", {28}},
    {"rnet.prelu1.slope", {28}},
    {"rnet.conv2.weight", {3, 3, 28, 48}},  {"rnet.conv2.bias", {48}},
    {"rnet.prelu2.slope", {48}},
    {"rnet.conv3.weight", {2, 2, 48, 64}},  {"rnet.conv3.bias", {64}},
    {"rnet.prelu3.slope", {64}},
    {"rnet.fc1.weight", {576, 128}},        {"rnet.fc1.bias", {128}},
    {"rnet.prelu4.slope", {128}},
    {"rnet.score.weight", {128, 2}},        {"rnet.score.bias", {2}},
    {"rnet.reg.weight", {128, 4}},          {"rnet.reg.bias", {4}},

    {"onet.conv1.weight", {3, 3, 3, 32}},   {"onet.conv1.bias", {32}},
    {"onet.prelu1.slope", {32}},
    {"onet.conv2.weight", {3, 3, 32, 64}},  {"onet.conv2.bias", {64}},
    {"onet.prelu2.slope", {64}},
    {"onet.conv3.weight", {3, 3, 64, 64}},  {"onet.conv3.bias", {64}},
    {"onet.prelu3.slope", {64}},
    {"onet.conv4.weight", {2, 2, 64, 128}}, {"onet.conv4.bias", {128}},
    {"onet.prelu4.slope", {128}},
    {"onet.fc1.weight", {1152, 256}},       {"onet.fc1.bias", {256}},
    {"onet.prelu5.slope", {256}},
    {"onet.score.weight", {256, 2}},        {"onet.score.bias", {2}},
    {"onet.reg.weight", {256, 4}},          {"onet.reg.bias", {4}},
    {"onet.landmark.weight", {256, 10}},    {"onet.landmark.bias", {10}},
};

Tensorf normalize_input(const Tensorf& image) {
  Tensorf out = image;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = (out[i] - 127.5f) / 128.0f;
  return out;
}

// stable two-way softmax on the face/background pair
float face_probability(float bg_logit, float face_logit) {
  const double m = std::max(bg_logit, face_logit);
  const double eb = std::exp(bg_logit - m);
  const double ef = std::exp(face_logit - m);
  return static_cast<float>(ef / (eb + ef));
}

}  // namespace

const std::map<std::string, Shape>& expected_detector_shapes() { return kDetectorShapes; }

MtcnnDetector::MtcnnDetector(std::map<std::string, Tensorf> weights, MtcnnConfig config)
    : weights_(std::move(weights)), config_(config) {
  for (const auto& [name, shape] : kDetectorShapes) {
    auto it = weights_.find(name);
    if (it == weights_.end())
      throw WeightFormatError(WeightFormatError::Kind::UnknownTensor,
                              "detector weights missing tensor " + name);
    if (it->second.shape() != shape)
      throw WeightFormatError(WeightFormatError::Kind::DimMismatch,
                              "detector tensor " + name + " has shape " +
                                  shape_string(it->second.shape()) + ", expected " +
                                  shape_string(shape));
  }
}

PnetFn MtcnnDetector::pnet() const {
  return [this](const Tensorf& level) {
    const auto& w = weights_;
    Tensorf x = normalize_input(level);
    x = prelu(conv2d(x, w.at("pnet.conv1.weight"), w.at("pnet.conv1.bias"), 1, 0),
              w.at("pnet.prelu1.slope"));
    x = maxpool2d(x, 2, 2);
    x = prelu(conv2d(x, w.at("pnet.conv2.weight"), w.at("pnet.conv2.bias"), 1, 0),
              w.at("pnet.prelu2.slope"));
    x = prelu(conv2d(x, w.at("pnet.conv3.weight"), w.at("pnet.conv3.bias"), 1, 0),
              w.at("pnet.prelu3.slope"));
    const Tensorf logits = conv2d(x, w.at("pnet.score.weight"), w.at("pnet.score.bias"), 1, 0);
    const Tensorf reg = conv2d(x, w.at("pnet.reg.weight"), w.at("pnet.reg.bias"), 1, 0);
    PnetOutput out;
    out.prob = Tensorf({logits.dim(0), logits.dim(1)});
    for (int r = 0; r < logits.dim(0); ++r)
      for (int c = 0; c < logits.dim(1); ++c)
        out.prob(r, c) = face_probability(logits(r, c, 0), logits(r, c, 1));
    out.reg = reg;
    return out;
  };
}

RnetFn MtcnnDetector::rnet() const {
  return [this](const Tensorf& chip) {
    const auto& w = weights_;
    if (chip.dim(0) != 24 || chip.dim(1) != 24)
      throw ShapeError("rnet expects a 24x24 chip, got " + shape_string(chip.shape()));
    Tensorf x = normalize_input(chip);
    x = prelu(conv2d(x, w.at("rnet.conv1.weight"), w.at("rnet.conv1.bias"), 1, 0),
              w.at("rnet.prelu1.slope"));
    x = maxpool2d(x, 2, 2);
    x = prelu(conv2d(x, w.at("rnet.conv2.weight"), w.at("rnet.conv2.bias"), 1, 0),
              w.at("rnet.prelu2.slope"));
    x = maxpool2d(x, 2, 2);
    x = prelu(conv2d(x, w.at("rnet.conv3.weight"), w.at("rnet.conv3.bias"), 1, 0),
              w.at("rnet.prelu3.slope"));
    Tensorf hidden = dense(flatten(x), w.at("rnet.fc1.weight"), w.at("rnet.fc1.bias"));
    for (std::int64_t i = 0; i < hidden.size(); ++i)
      if (hidden[i] < 0) hidden[i] *= w.at("rnet.prelu4.slope")[i];
    const Tensorf logits = dense(hidden, w.at("rnet.score.weight"), w.at("rnet.score.bias"));
    const Tensorf reg = dense(hidden, w.at("rnet.reg.weight"), w.at("rnet.reg.bias"));
    RnetOutput out;
    out.score = face_probability(logits[0], logits[1]);
    out.reg = {reg[0], reg[1], reg[2], reg[3]};
    return out;
  };
}

OnetFn MtcnnDetector::onet() const {
  return [this](const Tensorf& chip) {
    const auto& w = weights_;
    if (chip.dim(0) != 48 || chip.dim(1) != 48)
      throw ShapeError("onet expects a 48x48 chip, got " + shape_string(chip.shape()));
    Tensorf x = normalize_input(chip);
    x = prelu(conv2d(x, w.at("onet.conv1.weight"), w.at("onet.conv1.bias"), 1, 0),
              w.at("onet.prelu1.slope"));
    x = maxpool2d(x, 2, 2);
    x = prelu(conv2d(x, w.at("onet.conv2.weight"), w.at("onet.conv2.bias"), 1, 0),
              w.at("onet.prelu2.slope"));
    x = maxpool2d(x, 2, 2);
    x = prelu(conv2d(x, w.at("onet.conv3.weight"), w.at("onet.conv3.bias"), 1, 0),
              w.at("onet.prelu3.slope"));
    x = maxpool2d(x, 2, 2);
    x = prelu(conv2d(x, w.at("onet.conv4.weight"), w.at("onet.conv4.bias"), 1, 0),
              w.at("onet.prelu4.slope"));
    Tensorf hidden = dense(flatten(x), w.at("onet.fc1.weight"), w.at("onet.fc1.bias"));
    for (std::int64_t i = 0; i < hidden.size(); ++i)
      if (hidden[i] < 0) hidden[i] *= w.at("onet.prelu5.slope")[i];
    const Tensorf logits = dense(hidden, w.at("onet.score.weight"), w.at("onet.score.bias"));
    const Tensorf reg = dense(hidden, w.at("onet.reg.weight"), w.at("onet.reg.bias"));
    const Tensorf lm = dense(hidden, w.at("onet.landmark.weight"), w.at("onet.landmark.bias"));
    OnetOutput out;
    out.score = face_probability(logits[0], logits[1]);
    out.reg = {reg[0], reg[1], reg[2], reg[3]};
    for (int i = 0; i < 10; ++i) out.landmarks[static_cast<std::size_t>(i)] = lm[i];
    return out;
  };
}

std::vector<Detection> MtcnnDetector::detect(const Tensorf& image) const {
  const auto p = pnet_stage(image, pnet(), config_.threshold_p, config_.min_face, config_.factor);
  const auto r = rnet_stage(image, p, rnet(), config_.threshold_r);
  return onet_stage(image, r, onet(), config_.threshold_o);
}

std::string format_detection_line(const std::string& path, const Detection& det) {
  char buf[512];
  int n = std::snprintf(buf, sizeof buf, "%s %.2f %.2f %.2f %.2f %.6f", path.c_str(),
                        det.box.x1, det.box.y1, det.box.x2, det.box.y2, det.box.score);
  std::string line(buf, static_cast<std::size_t>(n));
  const Landmarks pts = det.landmarks.value_or(Landmarks{});
  for (const Point2f& pt : pts) {
    n = std::snprintf(buf, sizeof buf, " %.2f %.2f", pt.x, pt.y);
    line.append(buf, static_cast<std::size_t>(n));
  }
  return line;
}

void write_detection_log(const std::string& path,
                         const std::vector<std::pair<std::string, Detection>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& [img, det] : rows) out << format_detection_line(img, det) << '\n';
}

}  // namespace cage
