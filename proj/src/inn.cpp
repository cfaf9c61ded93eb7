#include "zsiis/inn.hpp"

#include <Eigen/Core>
#include <cmath>

namespace zsiis {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

constexpr double kLeakySlope = 0.2;

// Rows are indexed (c, ky, kx), columns (y, x). Writes channels*k*k rows.
template <typename T>
void im2col(const T* src, int channels, int h, int w, int k, T* cols) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    const T* plane = src + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        const int dx = kx - pad;
        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          T* row = dst + static_cast<std::size_t>(y) * w;
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h || x0 >= x1) {
            std::fill(row, row + w, T{0});
            continue;
          }
          const T* srow = plane + static_cast<std::size_t>(sy) * w;
          std::fill(row, row + x0, T{0});
          std::copy(srow + x0 + dx, srow + x1 + dx, row + x0);
          std::fill(row + x1, row + w, T{0});
        }
      }
    }
  }
}

// Adjoint of im2col: scatters columns back and accumulates into dst.
template <typename T>
void col2im_add(const T* cols, int channels, int h, int w, int k, T* dst) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    T* plane = dst + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src =
            cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        const int dx = kx - pad;
        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          const T* row = src + static_cast<std::size_t>(y) * w;
          T* drow = plane + static_cast<std::size_t>(sy) * w;
          for (int x = x0; x < x1; ++x) drow[x + dx] += row[x];
        }
      }
    }
  }
}

// Per-thread scratch reused across calls; im2col buffers are the largest
// allocations in a training step.
template <typename T>
std::vector<T>& scratch(int slot, std::size_t size) {
  thread_local std::vector<T> buffers[2];
  std::vector<T>& b = buffers[slot];
  if (b.size() < size) b.resize(size);
  return b;
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void require_branch(const BasicSubbands<T>& x, int channels, const char* what) {
  if (x.channels() != channels)
    throw DimensionError(std::string(what) + ": expected " +
                         std::to_string(channels) + " channels, got " +
                         to_string(x.shape()));
}

template <typename T>
void add_into(BasicSubbands<T>& acc, const BasicSubbands<T>& x) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

ConvLayer<float> make_layer(int in, int out, int k) {
  const std::size_t n = static_cast<std::size_t>(out) * in * k * k;
  return ConvLayer<float>{in, out, k, std::vector<float>(n, 0.0f),
                          std::vector<float>(out, 0.0f)};
}

SubnetParams<float> init_subnet(const ModelConfig& cfg, std::mt19937_64& rng) {
  SubnetParams<float> net;
  const int k = cfg.kernel;
  const double gain2 = 2.0 / (1.0 + kLeakySlope * kLeakySlope);
  int in = cfg.channels_per_branch;
  for (int j = 0; j < cfg.num_subnet_layers; ++j) {
    const bool last = j + 1 == cfg.num_subnet_layers;
    const int out = last ? cfg.channels_per_branch : cfg.growth;
    ConvLayer<float> layer = make_layer(in, out, k);
    if (!last) {
      std::normal_distribution<double> normal(
          0.0, std::sqrt(gain2 / static_cast<double>(in * k * k)));
      for (float& w : layer.weight) w = static_cast<float>(normal(rng));
    }
    net.layers.push_back(std::move(layer));
    in += out;
  }
  return net;
}

}  // namespace

template <typename T>
void validate_model(const InnModel<T>& model) {
  const ModelConfig& cfg = model.config;
  cfg.validate();
  if (static_cast<int>(model.blocks.size()) != cfg.num_blocks)
    throw DimensionError("model has " + std::to_string(model.blocks.size()) +
                         " blocks, config says " +
                         std::to_string(cfg.num_blocks));
  auto check = [&](const SubnetParams<T>& net) {
    if (static_cast<int>(net.layers.size()) != cfg.num_subnet_layers)
      throw DimensionError("subnet depth does not match config");
    int in = cfg.channels_per_branch;
    for (int j = 0; j < cfg.num_subnet_layers; ++j) {
      const auto& l = net.layers[j];
      const int out = j + 1 == cfg.num_subnet_layers ? cfg.channels_per_branch
                                                     : cfg.growth;
      const std::size_t n = static_cast<std::size_t>(out) * in * cfg.kernel *
                            cfg.kernel;
      if (l.in_channels != in || l.out_channels != out ||
          l.kernel != cfg.kernel || l.weight.size() != n ||
          l.bias.size() != static_cast<std::size_t>(out))
        throw DimensionError("subnet layer " + std::to_string(j) +
                             " does not match the dense wiring of the config");
      in += out;
    }
  };
  for (const auto& b : model.blocks) {
    check(b.psi);
    check(b.rho);
    check(b.eta);
  }
}

InnModel<float> init_model(const ModelConfig& config, std::mt19937_64& rng) {
  config.validate();
  InnModel<float> model;
  model.config = config;
  for (int b = 0; b < config.num_blocks; ++b) {
    CouplingBlock<float> block;
    block.psi = init_subnet(config, rng);
    block.rho = init_subnet(config, rng);
    block.eta = init_subnet(config, rng);
    model.blocks.push_back(std::move(block));
  }
  return model;
}

template <typename T>
T alpha(T x, double clamp_k) {
  return static_cast<T>(clamp_k) * sigmoid(x);
}

template <typename T>
std::vector<T> alpha(std::span<const T> x, double clamp_k) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = alpha(x[i], clamp_k);
  return out;
}

template <typename T>
BasicSubbands<T> subnet_forward(const SubnetParams<T>& params,
                                const BasicSubbands<T>& x,
                                SubnetTrace<T>* trace) {
  if (params.layers.empty()) throw DimensionError("subnet has no layers");
  require_branch(x, params.io_channels(), "subnet_forward");
  const int h = x.height(), w = x.width();
  const int k = params.layers.front().kernel;
  const int kk = k * k;
  const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
  const int last_in = params.layers.back().in_channels;

  std::vector<T> features(static_cast<std::size_t>(last_in) * hw);
  std::copy(x.values().begin(), x.values().end(), features.begin());
  std::vector<T>& cols = scratch<T>(0, static_cast<std::size_t>(last_in) * kk * hw);
  im2col(x.data(), x.channels(), h, w, k, cols.data());

  BasicSubbands<T> out(x.channels(), h, w);
  int in = x.channels();
  for (std::size_t j = 0; j < params.layers.size(); ++j) {
    const ConvLayer<T>& layer = params.layers[j];
    if (layer.in_channels != in)
      throw DimensionError("subnet layer input does not match dense wiring");
    const bool last = j + 1 == params.layers.size();
    ConstMatMap<T> weight(layer.weight.data(), layer.out_channels,
                          static_cast<Eigen::Index>(in) * kk);
    ConstMatMap<T> col(cols.data(), static_cast<Eigen::Index>(in) * kk, hw);
    T* dst = last ? out.data() : features.data() + in * hw;
    MatMap<T> y(dst, layer.out_channels, hw);
    y.noalias() = weight * col;
    for (int o = 0; o < layer.out_channels; ++o) y.row(o).array() += layer.bias[o];
    if (!last) {
      const T slope = static_cast<T>(kLeakySlope);
      y = y.unaryExpr([slope](T v) { return v > T(0) ? v : v * slope; });
      im2col(dst, layer.out_channels, h, w, k,
             cols.data() + static_cast<std::size_t>(in) * kk * hw);
      in += layer.out_channels;
    }
  }
  if (trace) {
    trace->height = h;
    trace->width = w;
    trace->features = std::move(features);
  }
  return out;
}

template <typename T>
BasicSubbands<T> subnet_backward(const SubnetParams<T>& params,
                                 const SubnetTrace<T>& trace,
                                 const BasicSubbands<T>& d_out,
                                 SubnetParams<T>& grad) {
  const int h = trace.height, w = trace.width;
  const int k = params.layers.front().kernel;
  const int kk = k * k;
  const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
  const int io = params.io_channels();
  const int total = params.layers.back().in_channels;
  if (d_out.channels() != io || d_out.height() != h || d_out.width() != w)
    throw DimensionError("subnet_backward: gradient shape mismatch");

  const std::size_t col_size = static_cast<std::size_t>(total) * kk * hw;
  std::vector<T>& cols = scratch<T>(0, col_size);
  im2col(trace.features.data(), total, h, w, k, cols.data());
  std::vector<T>& dcols = scratch<T>(1, col_size);
  std::fill(dcols.begin(), dcols.begin() + static_cast<std::ptrdiff_t>(col_size), T{0});

  // Gradient w.r.t. the current layer's pre-activation output.
  RowMat<T> dy = ConstMatMap<T>(d_out.data(), io, hw);
  for (int j = static_cast<int>(params.layers.size()) - 1; j >= 0; --j) {
    const ConvLayer<T>& layer = params.layers[j];
    ConvLayer<T>& g = grad.layers[j];
    const Eigen::Index rows = static_cast<Eigen::Index>(layer.in_channels) * kk;
    ConstMatMap<T> col(cols.data(), rows, hw);
    ConstMatMap<T> weight(layer.weight.data(), layer.out_channels, rows);
    MatMap<T>(g.weight.data(), layer.out_channels, rows).noalias() +=
        dy * col.transpose();
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(g.bias.data(),
                                                    layer.out_channels) +=
        dy.rowwise().sum();
    MatMap<T>(dcols.data(), rows, hw).noalias() += weight.transpose() * dy;
    if (j == 0) break;

    // Output of layer j-1 is consumed only by layers >= j, so its column
    // gradient is complete.
    const ConvLayer<T>& prev = params.layers[j - 1];
    const int first = prev.in_channels;
    const int n = prev.out_channels;
    RowMat<T> dfeat = RowMat<T>::Zero(n, hw);
    col2im_add(dcols.data() + static_cast<std::size_t>(first) * kk * hw, n, h,
               w, k, dfeat.data());
    ConstMatMap<T> act(trace.features.data() + first * hw, n, hw);
    const T slope = static_cast<T>(kLeakySlope);
    dy = dfeat.binaryExpr(act, [slope](T d, T a) { return a > T(0) ? d : d * slope; });
  }
  BasicSubbands<T> dx(io, h, w);
  col2im_add(dcols.data(), io, h, w, k, dx.data());
  return dx;
}

template <typename T>
BranchPair<T> block_forward(const CouplingBlock<T>& block, double clamp_k,
                            const BasicSubbands<T>& cover_b,
                            const BasicSubbands<T>& secret_b,
                            BlockTrace<T>* trace) {
  require_same_shape(cover_b, secret_b, "block_forward");
  require_branch(cover_b, block.psi.io_channels(), "block_forward");
  BasicSubbands<T> cover_next =
      subnet_forward(block.psi, secret_b, trace ? &trace->psi : nullptr);
  add_into(cover_next, cover_b);
  BasicSubbands<T> r =
      subnet_forward(block.rho, cover_next, trace ? &trace->rho : nullptr);
  BasicSubbands<T> secret_next =
      subnet_forward(block.eta, cover_next, trace ? &trace->eta : nullptr);
  BasicSubbands<T> scale(r.shape());
  for (std::size_t i = 0; i < r.size(); ++i) {
    scale[i] = std::exp(alpha(r[i], clamp_k));
    secret_next[i] += secret_b[i] * scale[i];
  }
  if (trace) {
    trace->carried = secret_b;
    trace->rho_out = std::move(r);
    trace->scale = std::move(scale);
  }
  return {std::move(cover_next), std::move(secret_next)};
}

template <typename T>
BranchPair<T> block_inverse(const CouplingBlock<T>& block, double clamp_k,
                            const BasicSubbands<T>& main_b_next,
                            const BasicSubbands<T>& z_next,
                            BlockTrace<T>* trace) {
  require_same_shape(main_b_next, z_next, "block_inverse");
  require_branch(main_b_next, block.psi.io_channels(), "block_inverse");
  BasicSubbands<T> r =
      subnet_forward(block.rho, main_b_next, trace ? &trace->rho : nullptr);
  BasicSubbands<T> shifted =
      subnet_forward(block.eta, main_b_next, trace ? &trace->eta : nullptr);
  BasicSubbands<T> scale(r.shape());
  BasicSubbands<T> z(r.shape());
  for (std::size_t i = 0; i < r.size(); ++i) {
    shifted[i] = z_next[i] - shifted[i];
    scale[i] = std::exp(-alpha(r[i], clamp_k));
    z[i] = shifted[i] * scale[i];
  }
  BasicSubbands<T> main_b =
      subnet_forward(block.psi, z, trace ? &trace->psi : nullptr);
  for (std::size_t i = 0; i < main_b.size(); ++i)
    main_b[i] = main_b_next[i] - main_b[i];
  if (trace) {
    trace->carried = std::move(shifted);
    trace->rho_out = std::move(r);
    trace->scale = std::move(scale);
  }
  return {std::move(main_b), std::move(z)};
}

template <typename T>
BranchPair<T> block_forward_backward(const CouplingBlock<T>& block,
                                     double clamp_k, const BlockTrace<T>& trace,
                                     const BasicSubbands<T>& d_cover_out,
                                     const BasicSubbands<T>& d_secret_out,
                                     CouplingBlock<T>& grad) {
  const std::size_t n = d_secret_out.size();
  const T k = static_cast<T>(clamp_k);
  BasicSubbands<T> d_secret(d_secret_out.shape());
  BasicSubbands<T> d_r(d_secret_out.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T g = d_secret_out[i];
    d_secret[i] = g * trace.scale[i];
    const T s = sigmoid(trace.rho_out[i]);
    d_r[i] = g * trace.carried[i] * trace.scale[i] * k * s * (T(1) - s);
  }
  BasicSubbands<T> d_cover = d_cover_out;
  add_into(d_cover, subnet_backward(block.rho, trace.rho, d_r, grad.rho));
  add_into(d_cover,
           subnet_backward(block.eta, trace.eta, d_secret_out, grad.eta));
  add_into(d_secret, subnet_backward(block.psi, trace.psi, d_cover, grad.psi));
  return {std::move(d_cover), std::move(d_secret)};
}

template <typename T>
BranchPair<T> block_inverse_backward(const CouplingBlock<T>& block,
                                     double clamp_k, const BlockTrace<T>& trace,
                                     const BasicSubbands<T>& d_main_out,
                                     const BasicSubbands<T>& d_z_out,
                                     CouplingBlock<T>& grad) {
  const std::size_t n = d_z_out.size();
  const T k = static_cast<T>(clamp_k);
  BasicSubbands<T> neg_main(d_main_out.shape());
  for (std::size_t i = 0; i < n; ++i) neg_main[i] = -d_main_out[i];
  BasicSubbands<T> d_z = d_z_out;
  add_into(d_z, subnet_backward(block.psi, trace.psi, neg_main, grad.psi));

  BasicSubbands<T> d_z_next(d_z.shape());
  BasicSubbands<T> neg_d_shift(d_z.shape());
  BasicSubbands<T> d_r(d_z.shape());
  for (std::size_t i = 0; i < n; ++i) {
    d_z_next[i] = d_z[i] * trace.scale[i];
    neg_d_shift[i] = -d_z_next[i];
    const T s = sigmoid(trace.rho_out[i]);
    d_r[i] = -d_z[i] * trace.carried[i] * trace.scale[i] * k * s * (T(1) - s);
  }
  BasicSubbands<T> d_main = d_main_out;
  add_into(d_main, subnet_backward(block.eta, trace.eta, neg_d_shift, grad.eta));
  add_into(d_main, subnet_backward(block.rho, trace.rho, d_r, grad.rho));
  return {std::move(d_main), std::move(d_z_next)};
}

template <typename T>
BranchPair<T> inn_forward(const InnModel<T>& model,
                          const BasicSubbands<T>& secret_sub,
                          const BasicSubbands<T>& cover_sub,
                          InnTrace<T>* trace) {
  require_branch(secret_sub, model.config.channels_per_branch, "inn_forward");
  require_same_shape(secret_sub, cover_sub, "inn_forward");
  if (static_cast<int>(model.blocks.size()) != model.config.num_blocks)
    throw DimensionError("inn_forward: block count does not match config");
  if (trace) trace->blocks.assign(model.blocks.size(), {});
  BasicSubbands<T> cover = cover_sub;
  BasicSubbands<T> secret = secret_sub;
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    auto [c, s] = block_forward(model.blocks[b], model.config.clamp_k, cover,
                                secret, trace ? &trace->blocks[b] : nullptr);
    cover = std::move(c);
    secret = std::move(s);
  }
  return {std::move(secret), std::move(cover)};
}

template <typename T>
BranchPair<T> inn_inverse(const InnModel<T>& model,
                          const BasicSubbands<T>& z_sub,
                          const BasicSubbands<T>& main_sub,
                          InnTrace<T>* trace) {
  require_branch(z_sub, model.config.channels_per_branch, "inn_inverse");
  require_same_shape(z_sub, main_sub, "inn_inverse");
  if (static_cast<int>(model.blocks.size()) != model.config.num_blocks)
    throw DimensionError("inn_inverse: block count does not match config");
  if (trace) trace->blocks.assign(model.blocks.size(), {});
  BasicSubbands<T> main = main_sub;
  BasicSubbands<T> z = z_sub;
  for (std::size_t b = model.blocks.size(); b-- > 0;) {
    auto [m, zz] = block_inverse(model.blocks[b], model.config.clamp_k, main,
                                 z, trace ? &trace->blocks[b] : nullptr);
    main = std::move(m);
    z = std::move(zz);
  }
  return {std::move(z), std::move(main)};
}

template <typename T>
BranchPair<T> inn_forward_backward(const InnModel<T>& model,
                                   const InnTrace<T>& trace,
                                   const BasicSubbands<T>& d_unused,
                                   const BasicSubbands<T>& d_stego,
                                   InnModel<T>& grad) {
  BasicSubbands<T> d_cover = d_stego;
  BasicSubbands<T> d_secret = d_unused;
  for (std::size_t b = model.blocks.size(); b-- > 0;) {
    auto [dc, ds] = block_forward_backward(model.blocks[b], model.config.clamp_k,
                                           trace.blocks[b], d_cover, d_secret,
                                           grad.blocks[b]);
    d_cover = std::move(dc);
    d_secret = std::move(ds);
  }
  return {std::move(d_secret), std::move(d_cover)};
}

template <typename T>
BranchPair<T> inn_inverse_backward(const InnModel<T>& model,
                                   const InnTrace<T>& trace,
                                   const BasicSubbands<T>& d_recovered,
                                   const BasicSubbands<T>& d_unused,
                                   InnModel<T>& grad) {
  BasicSubbands<T> d_main = d_unused;
  BasicSubbands<T> d_z = d_recovered;
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    auto [dm, dz] = block_inverse_backward(model.blocks[b], model.config.clamp_k,
                                           trace.blocks[b], d_main, d_z,
                                           grad.blocks[b]);
    d_main = std::move(dm);
    d_z = std::move(dz);
  }
  return {std::move(d_z), std::move(d_main)};
}

#define ZSIIS_INSTANTIATE_INN(T)                                               \
  template void validate_model(const InnModel<T>&);                            \
  template T alpha(T, double);                                                 \
  template std::vector<T> alpha(std::span<const T>, double);                   \
  template BasicSubbands<T> subnet_forward(const SubnetParams<T>&,             \
                                           const BasicSubbands<T>&,            \
                                           SubnetTrace<T>*);                   \
  template BasicSubbands<T> subnet_backward(                                   \
      const SubnetParams<T>&, const SubnetTrace<T>&, const BasicSubbands<T>&,  \
      SubnetParams<T>&);                                                       \
  template BranchPair<T> block_forward(const CouplingBlock<T>&, double,        \
                                       const BasicSubbands<T>&,                \
                                       const BasicSubbands<T>&, BlockTrace<T>*); \
  template BranchPair<T> block_inverse(const CouplingBlock<T>&, double,        \
                                       const BasicSubbands<T>&,                \
                                       const BasicSubbands<T>&, BlockTrace<T>*); \
  template BranchPair<T> block_forward_backward(                               \
      const CouplingBlock<T>&, double, const BlockTrace<T>&,                   \
      const BasicSubbands<T>&, const BasicSubbands<T>&, CouplingBlock<T>&);    \
  template BranchPair<T> block_inverse_backward(                               \
      const CouplingBlock<T>&, double, const BlockTrace<T>&,                   \
      const BasicSubbands<T>&, const BasicSubbands<T>&, CouplingBlock<T>&);    \
  template BranchPair<T> inn_forward(const InnModel<T>&,                       \
                                     const BasicSubbands<T>&,                  \
                                     const BasicSubbands<T>&, InnTrace<T>*);   \
  template BranchPair<T> inn_inverse(const InnModel<T>&,                       \
                                     const BasicSubbands<T>&,                  \
                                     const BasicSubbands<T>&, InnTrace<T>*);   \
  template BranchPair<T> inn_forward_backward(                                 \
      const InnModel<T>&, const InnTrace<T>&, const BasicSubbands<T>&,         \
      const BasicSubbands<T>&, InnModel<T>&);                                  \
  template BranchPair<T> inn_inverse_backward(                                 \
      const InnModel<T>&, const InnTrace<T>&, const BasicSubbands<T>&,         \
      const BasicSubbands<T>&, InnModel<T>&);

ZSIIS_INSTANTIATE_INN(float)
ZSIIS_INSTANTIATE_INN(double)

}  // namespace zsiis
