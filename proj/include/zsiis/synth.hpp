#pragma once

#include <filesystem>
#include <random>

#include "zsiis/tensor.hpp"

namespace zsiis::synth {

/// Procedural RGB scene: a two-colour gradient background, a handful of
/// soft-edged ellipses and rectangles, an optional sinusoidal texture and
/// mild sensor noise. Quantized to 8 bits.
ImageTensor scene(int height, int width, std::mt19937_64& rng);

/// Writes `count` scenes as 00000.png, 00001.png, ... into `dir`.
void write_scenes(const std::filesystem::path& dir, int count, int height,
                  int width, std::uint64_t seed);

}  // namespace zsiis::synth
