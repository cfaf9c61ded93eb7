#include "zsiis/synth.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "zsiis/image_io.hpp"

namespace zsiis::synth {

namespace {

using Color = std::array<float, 3>;

Color random_color(std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  return {u(rng), u(rng), u(rng)};
}

float smoothstep(float edge, float x) {
  const float t = std::clamp(0.5f - x / edge, 0.0f, 1.0f);
  return t * t * (3.0f - 2.0f * t);
}

}  // namespace

ImageTensor scene(int height, int width, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImageTensor img(3, height, width);
  const float scale = static_cast<float>(std::max(height, width));

  const Color a = random_color(rng), b = random_color(rng);
  const float angle = u(rng) * 2.0f * std::numbers::pi_v<float>;
  const float gx = std::cos(angle), gy = std::sin(angle);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const float t = std::clamp(
          0.5f + (gx * (x - width / 2.0f) + gy * (y - height / 2.0f)) / scale,
          0.0f, 1.0f);
      for (int c = 0; c < 3; ++c) img(c, y, x) = a[c] * (1 - t) + b[c] * t;
    }

  const int shapes = 3 + static_cast<int>(u(rng) * 6);
  for (int s = 0; s < shapes; ++s) {
    const Color col = random_color(rng);
    const float cx = u(rng) * width, cy = u(rng) * height;
    const float rx = (0.08f + 0.3f * u(rng)) * scale;
    const float ry = (0.08f + 0.3f * u(rng)) * scale;
    const bool ellipse = u(rng) < 0.5f;
    const float soft = 1.0f + 2.0f * u(rng);
    const float opacity = 0.6f + 0.4f * u(rng);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const float dx = (x - cx) / rx, dy = (y - cy) / ry;
        // Signed distance-like value in pixels, negative inside.
        const float d = ellipse
                            ? (std::sqrt(dx * dx + dy * dy) - 1.0f) * std::min(rx, ry)
                            : std::max(std::abs(x - cx) - rx, std::abs(y - cy) - ry);
        const float w = opacity * smoothstep(soft, d);
        if (w <= 0.0f) continue;
        for (int c = 0; c < 3; ++c) img(c, y, x) = img(c, y, x) * (1 - w) + col[c] * w;
      }
  }

  if (u(rng) < 0.5f) {
    const float freq = (2.0f + 10.0f * u(rng)) * 2.0f * std::numbers::pi_v<float> / scale;
    const float theta = u(rng) * std::numbers::pi_v<float>;
    const float amp = 0.03f + 0.07f * u(rng);
    const float fx = std::cos(theta) * freq, fy = std::sin(theta) * freq;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const float v = amp * std::sin(fx * x + fy * y);
        for (int c = 0; c < 3; ++c) img(c, y, x) += v;
      }
  }

  std::normal_distribution<float> noise(0.0f, 0.005f + 0.015f * u(rng));
  for (float& v : img.values()) v += noise(rng);
  return quantize8(img);
}

void write_scenes(const std::filesystem::path& dir, int count, int height,
                  int width, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(seed);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%05d.png", i);
    write_png(dir / name, scene(height, width, rng));
  }
}

}  // namespace zsiis::synth
