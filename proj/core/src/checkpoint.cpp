#include "nimp/checkpoint.hpp"

#include "nimp/error.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace nimp {
namespace {

constexpr std::array<char, 6> kMagic = {'N', 'I', 'M', 'L', 'P', '1'};
constexpr std::uint32_t kMaxLayers = 1024;
constexpr std::uint32_t kMaxWidth = 1u << 24;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename Dense>
void put_doubles(std::ostream& out, const Dense& m) {
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

void get(std::istream& in, void* dst, std::size_t bytes) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
  if (in.gcount() != static_cast<std::streamsize>(bytes)) throw FormatError("checkpoint is truncated");
}

std::uint8_t get_u8(std::istream& in) {
  std::uint8_t v;
  get(in, &v, 1);
  return v;
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v;
  get(in, &v, sizeof v);
  return v;
}

template <typename Dense>
void get_doubles(std::istream& in, Dense& m) {
  get(in, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

}  // namespace

void write_checkpoint(std::ostream& out, const MlpModel& model) {
  model.validate();
  out.write(kMagic.data(), kMagic.size());
  put_u8(out, static_cast<std::uint8_t>(model.activation));
  put_u32(out, static_cast<std::uint32_t>(model.layer_sizes.size()));
  for (const auto size : model.layer_sizes) put_u32(out, static_cast<std::uint32_t>(size));
  const bool bn = model.has_batch_norm();
  put_u8(out, bn ? 1 : 0);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    put_doubles(out, layer.weights);
    put_doubles(out, layer.bias);
    if (bn && l + 1 < model.layers.size()) {
      if (!layer.batch_norm) throw ShapeError("batch norm must be present on every hidden layer");
      put_doubles(out, layer.batch_norm->gamma);
      put_doubles(out, layer.batch_norm->beta);
      put_doubles(out, layer.batch_norm->running_mean);
      put_doubles(out, layer.batch_norm->running_var);
    }
  }
  if (!out) throw Error("failed to write checkpoint");
}

MlpModel read_checkpoint(std::istream& in) {
  std::array<char, 6> magic{};
  get(in, magic.data(), magic.size());
  if (magic != kMagic) throw FormatError("not a NIMLP1 checkpoint");
  const auto activation = get_u8(in);
  if (activation > static_cast<std::uint8_t>(Activation::linear))
    throw FormatError("unknown activation code " + std::to_string(activation));

  MlpModel model;
  model.activation = static_cast<Activation>(activation);
  const auto count = get_u32(in);
  if (count < 2 || count > kMaxLayers) throw FormatError("implausible layer count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto size = get_u32(in);
    if (size == 0 || size > kMaxWidth) throw FormatError("implausible layer size");
    model.layer_sizes.push_back(size);
  }
  const auto flag = get_u8(in);
  if (flag > 1) throw FormatError("bad batch-norm flag");

  for (std::size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(model.layer_sizes[l]);
    const auto fan_out = static_cast<Eigen::Index>(model.layer_sizes[l + 1]);
    DenseLayer layer;
    layer.weights.resize(fan_in, fan_out);
    layer.bias.resize(fan_out);
    get_doubles(in, layer.weights);
    get_doubles(in, layer.bias);
    if (flag && l + 2 < model.layer_sizes.size()) {
      BatchNorm bn{Vector(fan_out), Vector(fan_out), Vector(fan_out), Vector(fan_out)};
      get_doubles(in, bn.gamma);
      get_doubles(in, bn.beta);
      get_doubles(in, bn.running_mean);
      get_doubles(in, bn.running_var);
      layer.batch_norm = std::move(bn);
    }
    model.layers.push_back(std::move(layer));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint");
  model.validate();
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const MlpModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_checkpoint(out, model);
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace nimp
