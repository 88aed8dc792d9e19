#pragma once

#include <string>

#include "cage/tensor.hpp"

namespace cage {

/// Images are HWC float tensors with RGB values in [0, 255].
/// Dispatches on file extension: .ppm, .png, .jpg/.jpeg.
Tensorf load_image(const std::string& path);

bool image_extension_supported(const std::string& path);

Tensorf load_ppm(const std::string& path);
void save_ppm(const std::string& path, const Tensorf& image);

Tensorf load_png(const std::string& path);
void save_png(const std::string& path, const Tensorf& image);

Tensorf load_jpeg(const std::string& path);
void save_jpeg(const std::string& path, const Tensorf& image, int quality = 95);

}  // namespace cage
