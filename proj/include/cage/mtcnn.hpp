#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cage/geometry.hpp"
#include "cage/tensor.hpp"

namespace cage {

struct PyramidLevel {
  float scale = 1.0f;          // level coords * 1/scale = original coords
  Tensorf image;               // min side always >= 12
};

/// First scale is 12/min_face, each following one is multiplied by factor,
/// and generation stops once the scaled min side would drop below 12.
/// An image smaller than min_face yields an empty pyramid.
std::vector<PyramidLevel> build_pyramid(const Tensorf& image, int min_face, float factor);

// Stage networks are injected as callables so the cascade logic is
// testable with stubs and independent of any particular weight set.

struct PnetOutput {
  Tensorf prob;  // [Hc,Wc] face probability per output cell
  Tensorf reg;   // [Hc,Wc,4] box regression offsets
};
using PnetFn = std::function<PnetOutput(const Tensorf& level_image)>;

struct RnetOutput {
  float score = 0;
  std::array<float, 4> reg{};
};
using RnetFn = std::function<RnetOutput(const Tensorf& chip24)>;

struct OnetOutput {
  float score = 0;
  std::array<float, 4> reg{};
  std::array<float, 10> landmarks{};  // (x,y) pairs, normalized 0..1 within the box
};
using OnetFn = std::function<OnetOutput(const Tensorf& chip48)>;

std::vector<BoundingBox> pnet_stage(const Tensorf& image, const PnetFn& net, float threshold,
                                    int min_face, float factor);
std::vector<BoundingBox> rnet_stage(const Tensorf& image, const std::vector<BoundingBox>& candidates,
                                    const RnetFn& net, float threshold);
std::vector<Detection> onet_stage(const Tensorf& image, const std::vector<BoundingBox>& candidates,
                                  const OnetFn& net, float threshold);

/// Crops the box region (zero fill outside the image) and bilinearly
/// resamples it to out_size x out_size.
Tensorf crop_box(const Tensorf& image, const BoundingBox& box, int out_size);

/// Square-pads the detection box, then crops and resamples as crop_box.
Tensorf extract_face_chip(const Tensorf& image, const Detection& detection, int out_size);

struct MtcnnConfig {
  float threshold_p = 0.6f;
  float threshold_r = 0.7f;
  float threshold_o = 0.7f;
  float factor = 0.709f;
  int min_face = 20;
};

/// The three cascade networks backed by a loaded weight store. Tensor keys
/// are "pnet.*", "rnet.*", "onet.*"; see expected_detector_shapes().
class MtcnnDetector {
 public:
  MtcnnDetector(std::map<std::string, Tensorf> weights, MtcnnConfig config);

  std::vector<Detection> detect(const Tensorf& image) const;

  PnetFn pnet() const;
  RnetFn rnet() const;
  OnetFn onet() const;
  const MtcnnConfig& config() const { return config_; }

 private:
  std::map<std::string, Tensorf> weights_;
  MtcnnConfig config_;
};

/// Name -> shape contract for detector weight files.
const std::map<std::string, Shape>& expected_detector_shapes();

/// Detection log: `path x1 y1 x2 y2 score lx1 ly1 ... lx5 ly5`, one face
/// per line.
std::string format_detection_line(const std::string& path, const Detection& det);
void write_detection_log(const std::string& path,
                         const std::vector<std::pair<std::string, Detection>>& rows);

}  // namespace cage
