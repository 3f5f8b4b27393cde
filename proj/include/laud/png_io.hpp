#pragma once

#include <filesystem>

#include "laud/tensor.hpp"

namespace laud {

/// Decode an 8-bit PNG into a (1,3,H,W) tensor with values in [0,1].
/// Grayscale and paletted images are expanded to RGB; alpha is dropped.
Tensor read_png(const std::filesystem::path& path);

/// Encode a (1,3,H,W) [0,1] tensor as an 8-bit RGB PNG (values rounded
/// and clamped), or a (1,1,H,W) tensor as 8-bit grayscale.
void write_png(const std::filesystem::path& path, const Tensor& img01);

}  // namespace laud
