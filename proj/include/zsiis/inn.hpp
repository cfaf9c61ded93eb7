#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zsiis/model_config.hpp"
#include "zsiis/tensor.hpp"

namespace zsiis {

/// 2-D convolution, weight layout [out][in][ky][kx], zero "same" padding.
template <typename T>
struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  std::vector<T> weight;
  std::vector<T> bias;
};

/// Densely connected conv block: layer j sees the block input concatenated
/// with every earlier layer output. Hidden layers use leaky ReLU (0.2); the
/// last layer is linear and maps back to the input channel count.
template <typename T>
struct SubnetParams {
  std::vector<ConvLayer<T>> layers;

  int io_channels() const {
    return layers.empty() ? 0 : layers.front().in_channels;
  }
};

template <typename T>
struct CouplingBlock {
  SubnetParams<T> psi;
  SubnetParams<T> rho;
  SubnetParams<T> eta;
};

template <typename T>
struct InnModel {
  ModelConfig config;
  std::vector<CouplingBlock<T>> blocks;

  /// Visits every parameter tensor in a fixed order with a stable name,
  /// e.g. "blocks.3.rho.2.weight".
  template <typename F>
  void for_each_param(F&& fn) {
    visit(*this, fn);
  }
  template <typename F>
  void for_each_param(F&& fn) const {
    visit(*this, fn);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_param([&](const std::string&, std::span<const T> p) {
      n += p.size();
    });
    return n;
  }

  /// Same architecture, every parameter zero. Used for gradients and
  /// optimizer moments.
  InnModel zeros_like() const;

  template <typename U>
  InnModel<U> cast() const;

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& fn);
};

/// Throws DimensionError unless `model` has the architecture `config` implies.
template <typename T>
void validate_model(const InnModel<T>& model);

/// Hidden layers drawn N(0, gain^2 / fan_in) with the leaky-ReLU gain;
/// biases zero; every subnet's final layer exactly zero. A fresh model is
/// therefore the identity on the cover branch.
InnModel<float> init_model(const ModelConfig& config, std::mt19937_64& rng);

template <typename T>
T alpha(T x, double clamp_k);

/// Elementwise clamp_k * sigmoid(x).
template <typename T>
std::vector<T> alpha(std::span<const T> x, double clamp_k);

// Activation records kept by forward passes that will be differentiated.

template <typename T>
struct SubnetTrace {
  int height = 0;
  int width = 0;
  /// Input followed by every hidden activation, channel-stacked.
  std::vector<T> features;
};

template <typename T>
struct BlockTrace {
  SubnetTrace<T> psi, rho, eta;
  /// Forward: the incoming secret branch. Inverse: z_next - eta(main).
  BasicSubbands<T> carried;
  /// rho output.
  BasicSubbands<T> rho_out;
  /// exp(+alpha) forward, exp(-alpha) inverse.
  BasicSubbands<T> scale;
};

template <typename T>
struct InnTrace {
  std::vector<BlockTrace<T>> blocks;
};

template <typename T>
using BranchPair = std::pair<BasicSubbands<T>, BasicSubbands<T>>;

template <typename T>
BasicSubbands<T> subnet_forward(const SubnetParams<T>& params,
                                const BasicSubbands<T>& x,
                                SubnetTrace<T>* trace = nullptr);

/// Accumulates parameter gradients into `grad` and returns dL/dx.
template <typename T>
BasicSubbands<T> subnet_backward(const SubnetParams<T>& params,
                                 const SubnetTrace<T>& trace,
                                 const BasicSubbands<T>& d_out,
                                 SubnetParams<T>& grad);

/// cover' = cover + psi(secret)
/// secret' = secret * exp(alpha(rho(cover'))) + eta(cover')
template <typename T>
BranchPair<T> block_forward(const CouplingBlock<T>& block, double clamp_k,
                            const BasicSubbands<T>& cover_b,
                            const BasicSubbands<T>& secret_b,
                            BlockTrace<T>* trace = nullptr);

/// z = (z_next - eta(main_next)) * exp(-alpha(rho(main_next)))
/// main = main_next - psi(z)
/// Returns (main, z).
template <typename T>
BranchPair<T> block_inverse(const CouplingBlock<T>& block, double clamp_k,
                            const BasicSubbands<T>& main_b_next,
                            const BasicSubbands<T>& z_next,
                            BlockTrace<T>* trace = nullptr);

/// Gradients of block_forward. Returns (d_cover_b, d_secret_b).
template <typename T>
BranchPair<T> block_forward_backward(const CouplingBlock<T>& block,
                                     double clamp_k, const BlockTrace<T>& trace,
                                     const BasicSubbands<T>& d_cover_out,
                                     const BasicSubbands<T>& d_secret_out,
                                     CouplingBlock<T>& grad);

/// Gradients of block_inverse. Returns (d_main_b_next, d_z_next).
template <typename T>
BranchPair<T> block_inverse_backward(const CouplingBlock<T>& block,
                                     double clamp_k, const BlockTrace<T>& trace,
                                     const BasicSubbands<T>& d_main_out,
                                     const BasicSubbands<T>& d_z_out,
                                     CouplingBlock<T>& grad);

/// Concealing pass through blocks 1..K. Returns (unused_latent, stego_sub).
template <typename T>
BranchPair<T> inn_forward(const InnModel<T>& model,
                          const BasicSubbands<T>& secret_sub,
                          const BasicSubbands<T>& cover_sub,
                          InnTrace<T>* trace = nullptr);

/// Revealing pass through blocks K..1. Returns (recovered_sub, unused).
template <typename T>
BranchPair<T> inn_inverse(const InnModel<T>& model,
                          const BasicSubbands<T>& z_sub,
                          const BasicSubbands<T>& main_sub,
                          InnTrace<T>* trace = nullptr);

/// Returns (d_secret_sub, d_cover_sub).
template <typename T>
BranchPair<T> inn_forward_backward(const InnModel<T>& model,
                                   const InnTrace<T>& trace,
                                   const BasicSubbands<T>& d_unused,
                                   const BasicSubbands<T>& d_stego,
                                   InnModel<T>& grad);

/// Returns (d_z_sub, d_main_sub).
template <typename T>
BranchPair<T> inn_inverse_backward(const InnModel<T>& model,
                                   const InnTrace<T>& trace,
                                   const BasicSubbands<T>& d_recovered,
                                   const BasicSubbands<T>& d_unused,
                                   InnModel<T>& grad);

// ---------------------------------------------------------------------------

template <typename T>
template <typename Self, typename F>
void InnModel<T>::visit(Self& self, F& fn) {
  for (std::size_t b = 0; b < self.blocks.size(); ++b) {
    auto& block = self.blocks[b];
    const std::string prefix = "blocks." + std::to_string(b) + ".";
    auto subnet = [&](auto& net, const char* name) {
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        const std::string p = prefix + name + "." + std::to_string(l) + ".";
        fn(p + "weight", std::span(layer.weight));
        fn(p + "bias", std::span(layer.bias));
      }
    };
    subnet(block.psi, "psi");
    subnet(block.rho, "rho");
    subnet(block.eta, "eta");
  }
}

template <typename T>
InnModel<T> InnModel<T>::zeros_like() const {
  InnModel out = *this;
  out.for_each_param([](const std::string&, std::span<T> p) {
    std::fill(p.begin(), p.end(), T{0});
  });
  return out;
}

template <typename T>
template <typename U>
InnModel<U> InnModel<T>::cast() const {
  InnModel<U> out;
  out.config = config;
  auto cast_net = [](const SubnetParams<T>& in) {
    SubnetParams<U> net;
    for (const auto& l : in.layers)
      net.layers.push_back(
          ConvLayer<U>{l.in_channels, l.out_channels, l.kernel,
                       std::vector<U>(l.weight.begin(), l.weight.end()),
                       std::vector<U>(l.bias.begin(), l.bias.end())});
    return net;
  };
  for (const auto& b : blocks)
    out.blocks.push_back({cast_net(b.psi), cast_net(b.rho), cast_net(b.eta)});
  return out;
}

}  // namespace zsiis
