#include "zsiis/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace zsiis {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kMagicSize = sizeof(kCheckpointMagic) - 1;
constexpr int kFormatVersion = 1;

struct TensorRef {
  std::string name;
  std::vector<std::int64_t> shape;
  std::span<float> values;
};

template <typename Model>
void collect(Model& model, const std::string& prefix,
             std::vector<TensorRef>& out) {
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    auto& block = model.blocks[b];
    const std::pair<const char*, SubnetParams<float>*> nets[] = {
        {"psi", &block.psi}, {"rho", &block.rho}, {"eta", &block.eta}};
    for (auto [net_name, net] : nets) {
      for (std::size_t l = 0; l < net->layers.size(); ++l) {
        auto& layer = net->layers[l];
        const std::string base = prefix + "blocks." + std::to_string(b) + "." +
                                 net_name + "." + std::to_string(l) + ".";
        out.push_back({base + "weight",
                       {layer.out_channels, layer.in_channels, layer.kernel,
                        layer.kernel},
                       std::span(layer.weight)});
        out.push_back({base + "bias", {layer.out_channels}, std::span(layer.bias)});
      }
    }
  }
}

std::vector<TensorRef> tensors_of(Checkpoint& ckpt) {
  std::vector<TensorRef> refs;
  collect(ckpt.model, "model.", refs);
  collect(ckpt.optimizer.first_moment, "adam.m.", refs);
  collect(ckpt.optimizer.second_moment, "adam.v.", refs);
  return refs;
}

void append_le_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_le_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void append_le_f32(std::string& out, std::span<const float> values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * 4);
  char* dst = out.data() + start;
  for (float v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) *dst++ = static_cast<char>((bits >> (8 * i)) & 0xff);
  }
}

void read_le_f32(const char* src, std::span<float> values) {
  for (float& v : values) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(src[i])) << (8 * i);
    v = std::bit_cast<float>(bits);
    src += 4;
  }
}

// 64-bit entries are narrowed to the in-memory 32-bit parameters.
void read_le_f64(const char* src, std::span<float> values) {
  for (float& v : values) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(src[i])) << (8 * i);
    v = static_cast<float>(std::bit_cast<double>(bits));
    src += 8;
  }
}

InnModel<float> zero_model(const ModelConfig& cfg) {
  InnModel<float> model;
  model.config = cfg;
  auto net = [&] {
    SubnetParams<float> s;
    int in = cfg.channels_per_branch;
    for (int j = 0; j < cfg.num_subnet_layers; ++j) {
      const int out = j + 1 == cfg.num_subnet_layers ? cfg.channels_per_branch
                                                     : cfg.growth;
      s.layers.push_back(ConvLayer<float>{
          in, out, cfg.kernel,
          std::vector<float>(static_cast<std::size_t>(out) * in * cfg.kernel *
                             cfg.kernel),
          std::vector<float>(out)});
      in += out;
    }
    return s;
  };
  for (int b = 0; b < cfg.num_blocks; ++b)
    model.blocks.push_back({net(), net(), net()});
  return model;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  validate_model(ckpt.model);
  Checkpoint copy = ckpt;  // tensors_of needs mutable spans
  if (copy.optimizer.first_moment.blocks.empty())
    copy.optimizer = AdamState::for_model(copy.model);

  json entries = json::array();
  std::string blob;
  for (const auto& t : tensors_of(copy)) {
    const std::uint64_t offset = blob.size();
    append_le_f32(blob, t.values);
    entries.push_back({{"name", t.name},
                       {"dtype", "f32"},
                       {"shape", t.shape},
                       {"offset", offset},
                       {"nbytes", blob.size() - offset}});
  }
  const json manifest{{"format", "zsiis-checkpoint"},
                      {"version", kFormatVersion},
                      {"model_config", copy.model.config},
                      {"config", copy.config},
                      {"epoch", copy.epoch},
                      {"optimizer_step", copy.optimizer.step},
                      {"rng_state", copy.rng_state},
                      {"entries", std::move(entries)}};
  const std::string text = manifest.dump();

  std::string header(kCheckpointMagic, kMagicSize);
  append_le_u64(header, text.size());

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path,
                           const std::optional<ModelConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  const std::string where = " in " + path.string();

  if (bytes.size() < kMagicSize + 8 ||
      bytes.compare(0, kMagicSize, kCheckpointMagic) != 0)
    throw FormatError("bad checkpoint magic" + where);
  const std::uint64_t manifest_len = read_le_u64(bytes.data() + kMagicSize);
  const std::size_t manifest_start = kMagicSize + 8;
  if (manifest_len > bytes.size() - manifest_start)
    throw FormatError("truncated checkpoint manifest" + where);

  json manifest;
  try {
    manifest = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(manifest_start),
                           bytes.begin() + static_cast<std::ptrdiff_t>(manifest_start + manifest_len));
  } catch (const json::exception& e) {
    throw FormatError("unparseable checkpoint manifest" + where + ": " + e.what());
  }

  Checkpoint ckpt;
  try {
    if (manifest.at("format") != "zsiis-checkpoint" ||
        manifest.at("version") != kFormatVersion)
      throw FormatError("unsupported checkpoint format" + where);
    ModelConfig cfg = manifest.at("model_config").get<ModelConfig>();
    cfg.validate();
    if (expected && *expected != cfg)
      throw FormatError("checkpoint model config does not match the requested one" + where);
    ckpt.model = zero_model(cfg);
    ckpt.optimizer = AdamState::for_model(ckpt.model);
    ckpt.optimizer.step = manifest.at("optimizer_step").get<std::int64_t>();
    ckpt.config = manifest.at("config");
    ckpt.epoch = manifest.at("epoch").get<int>();
    ckpt.rng_state = manifest.at("rng_state").get<std::string>();

    std::map<std::string, json> by_name;
    for (const auto& e : manifest.at("entries"))
      if (!by_name.emplace(e.at("name").get<std::string>(), e).second)
        throw FormatError("duplicate checkpoint entry " + e.at("name").get<std::string>() + where);

    const char* blob = bytes.data() + manifest_start + manifest_len;
    const std::size_t blob_size = bytes.size() - manifest_start - manifest_len;
    const auto refs = tensors_of(ckpt);
    if (by_name.size() != refs.size())
      throw FormatError("checkpoint has " + std::to_string(by_name.size()) +
                        " tensors, model config implies " +
                        std::to_string(refs.size()) + where);
    for (const auto& t : refs) {
      auto it = by_name.find(t.name);
      if (it == by_name.end()) throw FormatError("missing tensor " + t.name + where);
      const json& e = it->second;
      const std::string dtype = e.at("dtype").get<std::string>();
      if (dtype != "f32" && dtype != "f64")
        throw FormatError("tensor " + t.name + " has unsupported dtype " + dtype + where);
      if (e.at("shape").get<std::vector<std::int64_t>>() != t.shape)
        throw FormatError("tensor " + t.name + " has the wrong shape" + where);
      const auto offset = e.at("offset").get<std::uint64_t>();
      const auto nbytes = e.at("nbytes").get<std::uint64_t>();
      const std::size_t width = dtype == "f32" ? 4 : 8;
      if (nbytes != t.values.size() * width)
        throw FormatError("tensor " + t.name + " has the wrong byte count" + where);
      if (offset > blob_size || nbytes > blob_size - offset)
        throw FormatError("truncated checkpoint: tensor " + t.name + where);
      if (width == 4)
        read_le_f32(blob + offset, t.values);
      else
        read_le_f64(blob + offset, t.values);
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed checkpoint manifest" + where + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError("invalid model config" + where + ": " + e.what());
  }
  return ckpt;
}

}  // namespace zsiis
