#include "zsiis/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>

namespace zsiis {
namespace fs = std::filesystem;

ImageTensor read_png(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw DataError("cannot decode " + path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DataError("cannot decode " + path.string() + ": " + image.message);
  }
  const int h = static_cast<int>(image.height), w = static_cast<int>(image.width);
  ImageTensor out(3, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        out(c, y, x) = static_cast<float>(
                           buffer[(static_cast<std::size_t>(y) * w + x) * 3 + c]) /
                       255.0f;
  return out;
}

void write_png(const fs::path& path, const ImageTensor& img) {
  if (img.channels() != 1 && img.channels() != 3)
    throw DimensionError("write_png: expected 1 or 3 channels, got " +
                         to_string(img.shape()));
  const int c = img.channels(), h = img.height(), w = img.width();
  std::vector<png_byte> buffer(static_cast<std::size_t>(c) * h * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) {
        const float v = std::clamp(img(ch, y, x), 0.0f, 1.0f);
        buffer[(static_cast<std::size_t>(y) * w + x) * c + ch] =
            static_cast<png_byte>(std::lround(v * 255.0f));
      }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0,
                               nullptr))
    throw DataError("cannot write " + path.string() + ": " + image.message);
}

ImageTensor quantize8(const ImageTensor& img) {
  ImageTensor out(img.shape());
  for (std::size_t i = 0; i < img.size(); ++i)
    out[i] = static_cast<float>(
                 std::lround(std::clamp(img[i], 0.0f, 1.0f) * 255.0f)) /
             255.0f;
  return out;
}

std::vector<LoadedImage> load_images(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec))
    throw DataError("dataset directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png") files.push_back(entry.path());
  }
  if (ec) throw DataError("cannot list " + dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());

  std::vector<LoadedImage> images;
  for (const auto& f : files) {
    try {
      images.push_back({f, read_png(f)});
    } catch (const DataError& e) {
      std::cerr << "warning: skipped file (" << e.what() << ")" << '\n';
    }
  }
  if (images.empty())
    throw DataError("no decodable PNG images in " + dir.string());
  return images;
}

ImageTensor crop(const ImageTensor& img, int top, int left, int size) {
  if (size <= 0 || top < 0 || left < 0 || top + size > img.height() ||
      left + size > img.width())
    throw DimensionError("crop of " + std::to_string(size) + " at (" +
                         std::to_string(top) + "," + std::to_string(left) +
                         ") does not fit image " + to_string(img.shape()));
  ImageTensor out(img.channels(), size, size);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) out(c, y, x) = img(c, top + y, left + x);
  return out;
}

ImageTensor random_crop(const ImageTensor& img, int size, std::mt19937_64& rng) {
  if (size > img.height() || size > img.width())
    throw DimensionError("crop size " + std::to_string(size) +
                         " exceeds image " + to_string(img.shape()));
  std::uniform_int_distribution<int> dy(0, img.height() - size);
  std::uniform_int_distribution<int> dx(0, img.width() - size);
  const int top = dy(rng);
  const int left = dx(rng);
  return crop(img, top, left, size);
}

ImageTensor center_crop(const ImageTensor& img, int size) {
  if (size > img.height() || size > img.width())
    throw DimensionError("crop size " + std::to_string(size) +
                         " exceeds image " + to_string(img.shape()));
  return crop(img, (img.height() - size) / 2, (img.width() - size) / 2, size);
}

}  // namespace zsiis
