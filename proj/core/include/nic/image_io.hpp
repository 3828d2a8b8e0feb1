#pragma once

#include <string>

#include "nic/tensor.hpp"

namespace nic {

// Binary PPM (P6, 8-bit). Pixels are rescaled to [0,1] on load and rounded
// back to bytes on save.
Tensor read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Tensor& image);

// Crop the longer axis to a centered square.
Tensor center_crop_square(const Tensor& image);
// Bilinear resample (half-pixel-center convention).
Tensor resize_bilinear(const Tensor& image, int out_h, int out_w);

}  // namespace nic
