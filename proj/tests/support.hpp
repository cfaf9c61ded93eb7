// Shared generators for the unit and acceptance suites.
#pragma once

#include <cmath>
#include <random>

#include "zsiis/inn.hpp"
#include "zsiis/tensor.hpp"

namespace zsiis::testing {

template <typename T = float>
BasicImage<T> random_image(int c, int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BasicImage<T> img(c, h, w);
  for (T& v : img.values()) v = static_cast<T>(u(rng));
  return img;
}

template <typename T = float>
BasicSubbands<T> random_subbands(int c, int h, int w, std::mt19937_64& rng,
                                 double stddev = 1.0) {
  std::normal_distribution<double> n(0.0, stddev);
  BasicSubbands<T> s(c, h, w);
  for (T& v : s.values()) v = static_cast<T>(n(rng));
  return s;
}

/// Fresh model whose zero final layers are replaced by small random values,
/// so that every subnet is active.
inline InnModel<float> random_model(const ModelConfig& cfg,
                                    std::mt19937_64& rng,
                                    double final_std = 0.02) {
  InnModel<float> model = init_model(cfg, rng);
  std::normal_distribution<double> n(0.0, final_std);
  for (auto& block : model.blocks) {
    for (auto* net : {&block.psi, &block.rho, &block.eta}) {
      auto& last = net->layers.back();
      for (float& w : last.weight) w = static_cast<float>(n(rng));
      for (float& b : last.bias) b = static_cast<float>(n(rng));
    }
  }
  return model;
}

/// max|a-b| / max(max|b|, 1e-12)
template <typename T, typename Tag>
double relative_error(const Planar<T, Tag>& a, const Planar<T, Tag>& b) {
  return max_abs_diff(a, b) / std::max(max_abs(b), 1e-12);
}

}  // namespace zsiis::testing
