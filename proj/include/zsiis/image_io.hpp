#pragma once

#include <filesystem>
#include <random>
#include <vector>

#include "zsiis/tensor.hpp"

namespace zsiis {

/// Decodes a PNG as 8-bit RGB mapped to [0,1] by /255. Grayscale is
/// replicated to three channels; alpha is dropped. Throws DataError.
ImageTensor read_png(const std::filesystem::path& path);

/// Clamps to [0,1], rounds to 8 bits and writes an RGB (or gray, for one
/// channel) PNG. Throws DataError on I/O failure.
void write_png(const std::filesystem::path& path, const ImageTensor& img);

/// Clamp to [0,1] and round to the nearest of the 256 8-bit levels.
ImageTensor quantize8(const ImageTensor& img);

struct LoadedImage {
  std::filesystem::path path;
  ImageTensor image;
};

/// Every decodable *.png in `dir` (non-recursive), sorted by file name.
/// Undecodable files are skipped with a warning on stderr. Throws DataError
/// when the directory is missing or nothing decodes.
std::vector<LoadedImage> load_images(const std::filesystem::path& dir);

/// Crop offsets drawn uniformly from [0, dim - size], row first.
ImageTensor random_crop(const ImageTensor& img, int size, std::mt19937_64& rng);

/// Crop starting at floor((dim - size) / 2).
ImageTensor center_crop(const ImageTensor& img, int size);

/// Crop of `size` x `size` at (top, left). Throws DimensionError when it does
/// not fit.
ImageTensor crop(const ImageTensor& img, int top, int left, int size);

}  // namespace zsiis
