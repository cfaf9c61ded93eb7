#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>

#include "support.hpp"
#include "zsiis/wavelet.hpp"

using namespace zsiis;
using zsiis::testing::random_image;
using zsiis::testing::random_subbands;

namespace {

// Explicit 4x4 orthonormal Haar analysis matrix acting on (a, b, c, d) =
// (top-left, top-right, bottom-left, bottom-right); rows LL, HL, LH, HH.
std::array<double, 4> haar_matrix_apply(const std::array<double, 4>& px) {
  constexpr double m[4][4] = {{0.5, 0.5, 0.5, 0.5},
                              {-0.5, 0.5, -0.5, 0.5},
                              {-0.5, -0.5, 0.5, 0.5},
                              {0.5, -0.5, -0.5, 0.5}};
  std::array<double, 4> out{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out[r] += m[r][c] * px[c];
  return out;
}

template <typename T, typename Tag>
double sum_squares(const Planar<T, Tag>& x) {
  double s = 0.0;
  for (T v : x.values()) s += static_cast<double>(v) * v;
  return s;
}

}  // namespace

TEST_CASE("dwt of a constant image puts 2v in LL only") {
  ImageTensor img(1, 2, 2, 0.3f);
  SubbandTensor sub = dwt(img);
  CHECK(sub.shape() == Shape{4, 1, 1});
  CHECK(sub[0] == doctest::Approx(0.6));
  CHECK(sub[1] == 0.0f);
  CHECK(sub[2] == 0.0f);
  CHECK(sub[3] == 0.0f);
}

TEST_CASE("dwt of the [[1,2],[3,4]] block matches the Haar matrix") {
  const auto expected = haar_matrix_apply({1, 2, 3, 4});
  CHECK(expected[0] == doctest::Approx(5.0));
  CHECK(expected[1] == doctest::Approx(1.0));
  CHECK(expected[2] == doctest::Approx(2.0));
  CHECK(expected[3] == doctest::Approx(0.0));

  ImageTensor img(Shape{1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  SubbandTensor sub = dwt(img);
  for (int b = 0; b < 4; ++b) CHECK(sub[b] == doctest::Approx(expected[b]));
  ImageTensor ll = extract_ll(sub);
  CHECK(ll.shape() == Shape{1, 1, 1});
  CHECK(ll[0] == doctest::Approx(5.0));
}

TEST_CASE("dwt matches the Haar matrix on every block and channel") {
  std::mt19937_64 rng(11);
  const auto img = random_image<double>(3, 6, 8, rng);
  const auto sub = dwt(img);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 4; ++x) {
        const auto e = haar_matrix_apply({img(c, 2 * y, 2 * x),
                                          img(c, 2 * y, 2 * x + 1),
                                          img(c, 2 * y + 1, 2 * x),
                                          img(c, 2 * y + 1, 2 * x + 1)});
        for (int b = 0; b < 4; ++b)
          CHECK(sub(b * 3 + c, y, x) == doctest::Approx(e[b]).epsilon(1e-14));
      }
}

TEST_CASE("dwt rejects odd dimensions") {
  CHECK_THROWS_AS(dwt(ImageTensor(1, 3, 4)), DimensionError);
  CHECK_THROWS_AS(dwt(ImageTensor(2, 4, 5)), DimensionError);
}

TEST_CASE("iwt inverts the constant example and maps zero to zero") {
  SubbandTensor sub(4, 1, 1);
  sub[0] = 1.4f;
  ImageTensor img = iwt(sub);
  CHECK(img.shape() == Shape{1, 2, 2});
  for (float v : img.values()) CHECK(v == doctest::Approx(0.7));

  ImageTensor zero = iwt(SubbandTensor(12, 3, 5));
  CHECK(zero.shape() == Shape{3, 6, 10});
  CHECK(max_abs(zero) == 0.0);
}

TEST_CASE("iwt rejects channel counts not divisible by 4") {
  CHECK_THROWS_AS(iwt(SubbandTensor(6, 2, 2)), DimensionError);
  CHECK_THROWS_AS(extract_ll(SubbandTensor(5, 2, 2)), DimensionError);
}

TEST_CASE("round trips in both directions") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto img = random_image(3, 2 * (1 + trial % 5), 2 * (1 + trial % 7), rng);
    CHECK(max_abs_diff(iwt(dwt(img)), img) <= 1e-5);
    const auto sub = random_subbands(8, 1 + trial % 4, 1 + trial % 3, rng);
    CHECK(max_abs_diff(dwt(iwt(sub)), sub) <= 1e-5);
    const auto img64 = img.cast<double>();
    CHECK(max_abs_diff(iwt(dwt(img64)), img64) <= 1e-12);
  }
}

TEST_CASE("energy is preserved and the transform is linear") {
  std::mt19937_64 rng(5);
  const auto x = random_image<double>(3, 16, 12, rng);
  const auto y = random_image<double>(3, 16, 12, rng);
  const double ex = sum_squares(x);
  CHECK(std::abs(sum_squares(dwt(x)) - ex) <= 1e-12 * ex);

  const double a = 0.7, b = -1.9;
  BasicImage<double> mix(x.shape());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x[i] + b * y[i];
  const auto dm = dwt(mix), dx = dwt(x), dy = dwt(y);
  for (std::size_t i = 0; i < dm.size(); ++i)
    CHECK(dm[i] == doctest::Approx(a * dx[i] + b * dy[i]).epsilon(1e-12));
}

TEST_CASE("extract_ll has half-resolution shape and the 2v constant") {
  ImageTensor img(3, 8, 6, 0.25f);
  ImageTensor ll = extract_ll(dwt(img));
  CHECK(ll.shape() == Shape{3, 4, 3});
  for (float v : ll.values()) CHECK(v == doctest::Approx(0.5));
}
