#pragma once

#include "cage/geometry.hpp"
#include "cage/rng.hpp"
#include "cage/tensor.hpp"

namespace cage {

/// Bilinear resample of an axis-aligned source window [y1,y2)x[x1,x2) to
/// out_h x out_w, pixel-center aligned. Samples outside the image read 0.
/// An integer window at its own size is an exact pixel copy.
Tensorf resample_window(const Tensorf& image, double y1, double x1, double y2, double x2,
                        int out_h, int out_w);

/// Whole-image bilinear rescale; defaults to the 256x256 network input.
Tensorf rescale_image(const Tensorf& image, int out_h = 256, int out_w = 256);

/// Exact sub-window copy.
Tensorf crop_window(const Tensorf& image, int row0, int col0, int out_h, int out_w);

/// Crop at offsets drawn uniformly from {0..H-size} x {0..W-size}.
Tensorf random_crop(const Tensorf& image, int size, Rng& rng);
Tensorf center_crop(const Tensorf& image, int size);

Tensorf horizontal_flip(const Tensorf& image);
Tensorf random_horizontal_flip(const Tensorf& image, double p, Rng& rng);

/// Rotation about the image center, bilinear sampling, edge-replicated fill.
Tensorf rotate(const Tensorf& image, double angle_degrees);
Tensorf random_rotate(const Tensorf& image, double max_abs_degrees, Rng& rng);

}  // namespace cage
