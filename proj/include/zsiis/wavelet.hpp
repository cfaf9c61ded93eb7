#pragma once

#include "zsiis/tensor.hpp"

namespace zsiis {

/// Single-level orthonormal 2-D Haar analysis.
///
/// For every 2x2 block [[a, b], [c, d]] of every channel:
///   LL = ( a + b + c + d) / 2
///   HL = (-a + b - c + d) / 2
///   LH = (-a - b + c + d) / 2
///   HH = ( a - b - c + d) / 2
/// Output channel layout is band-major: [0,C) LL, [C,2C) HL, [2C,3C) LH,
/// [3C,4C) HH. Throws DimensionError on odd height or width.
template <typename T>
BasicSubbands<T> dwt(const BasicImage<T>& img);

/// Inverse of dwt (its transpose). No clamping. Throws DimensionError when
/// the channel count is not divisible by 4.
template <typename T>
BasicImage<T> iwt(const BasicSubbands<T>& sub);

/// The LL block of a subband tensor as a C x H/2 x W/2 array.
template <typename T>
BasicImage<T> extract_ll(const BasicSubbands<T>& sub);

}  // namespace zsiis
