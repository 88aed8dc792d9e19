#include "cage/image_ops.hpp"

#include <cmath>

namespace cage {

namespace {

void require_hwc(const Tensorf& image, const char* op) {
  if (image.rank() != 3)
    throw ShapeError(std::string(op) + " expects a rank-3 HWC image, got " +
                     shape_string(image.shape()));
}

enum class Border { Zero, Clamp };

float sample_bilinear(const Tensorf& img, double y, double x, int c, Border border) {
  const int h = img.dim(0), w = img.dim(1);
  if (border == Border::Clamp) {
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  }
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0;
  const double fx = x - x0;
  auto read = [&](int yy, int xx) -> double {
    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
    return img(yy, xx, c);
  };
  const double top = read(y0, x0) * (1 - fx) + read(y0, x0 + 1) * fx;
  const double bot = read(y0 + 1, x0) * (1 - fx) + read(y0 + 1, x0 + 1) * fx;
  return static_cast<float>(top * (1 - fy) + bot * fy);
}

}  // namespace

Tensorf resample_window(const Tensorf& image, double y1, double x1, double y2, double x2,
                        int out_h, int out_w) {
  require_hwc(image, "resample_window");
  if (out_h < 1 || out_w < 1) throw ValueError("resample_window output must be at least 1x1");
  if (y2 <= y1 || x2 <= x1) throw ValueError("resample_window source window has zero area");
  const int c = image.dim(2);
  const double sy = (y2 - y1) / out_h;
  const double sx = (x2 - x1) / out_w;
  Tensorf out({out_h, out_w, c});
  for (int r = 0; r < out_h; ++r) {
    const double src_y = y1 + (r + 0.5) * sy - 0.5;
    for (int col = 0; col < out_w; ++col) {
      const double src_x = x1 + (col + 0.5) * sx - 0.5;
      for (int ch = 0; ch < c; ++ch)
        out(r, col, ch) = sample_bilinear(image, src_y, src_x, ch, Border::Zero);
    }
  }
  return out;
}

Tensorf rescale_image(const Tensorf& image, int out_h, int out_w) {
  require_hwc(image, "rescale_image");
  return resample_window(image, 0, 0, image.dim(0), image.dim(1), out_h, out_w);
}

Tensorf crop_window(const Tensorf& image, int row0, int col0, int out_h, int out_w) {
  require_hwc(image, "crop_window");
  if (row0 < 0 || col0 < 0 || row0 + out_h > image.dim(0) || col0 + out_w > image.dim(1))
    throw ShapeError("crop_window " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                     " at (" + std::to_string(row0) + "," + std::to_string(col0) +
                     ") exceeds image " + shape_string(image.shape()));
  const int c = image.dim(2);
  Tensorf out({out_h, out_w, c});
  for (int r = 0; r < out_h; ++r)
    for (int col = 0; col < out_w; ++col)
      for (int ch = 0; ch < c; ++ch) out(r, col, ch) = image(row0 + r, col0 + col, ch);
  return out;
}

Tensorf random_crop(const Tensorf& image, int size, Rng& rng) {
  require_hwc(image, "random_crop");
  if (size > image.dim(0) || size > image.dim(1))
    throw ShapeError("random_crop size " + std::to_string(size) + " exceeds image " +
                     shape_string(image.shape()));
  const int row0 = rng.uniform_int(0, image.dim(0) - size);
  const int col0 = rng.uniform_int(0, image.dim(1) - size);
  return crop_window(image, row0, col0, size, size);
}

Tensorf center_crop(const Tensorf& image, int size) {
  require_hwc(image, "center_crop");
  if (size > image.dim(0) || size > image.dim(1))
    throw ShapeError("center_crop size " + std::to_string(size) + " exceeds image " +
                     shape_string(image.shape()));
  return crop_window(image, (image.dim(0) - size) / 2, (image.dim(1) - size) / 2, size, size);
}

Tensorf horizontal_flip(const Tensorf& image) {
  require_hwc(image, "horizontal_flip");
  const int h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensorf out(image.shape());
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w; ++col)
      for (int ch = 0; ch < c; ++ch) out(r, col, ch) = image(r, w - 1 - col, ch);
  return out;
}

Tensorf random_horizontal_flip(const Tensorf& image, double p, Rng& rng) {
  return rng.bernoulli(p) ? horizontal_flip(image) : image;
}

Tensorf rotate(const Tensorf& image, double angle_degrees) {
  require_hwc(image, "rotate");
  const int h = image.dim(0), w = image.dim(1), c = image.dim(2);
  const double rad = angle_degrees * M_PI / 180.0;
  const double cos_a = std::cos(rad), sin_a = std::sin(rad);
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
  Tensorf out(image.shape());
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) {
      // inverse mapping: rotate the destination point back into the source
      const double dy = r - cy, dx = col - cx;
      const double src_y = cy + cos_a * dy - sin_a * dx;
      const double src_x = cx + sin_a * dy + cos_a * dx;
      for (int ch = 0; ch < c; ++ch)
        out(r, col, ch) = sample_bilinear(image, src_y, src_x, ch, Border::Clamp);
    }
  }
  return out;
}

Tensorf random_rotate(const Tensorf& image, double max_abs_degrees, Rng& rng) {
  return rotate(image, rng.uniform(-max_abs_degrees, max_abs_degrees));
}

}  // namespace cage
