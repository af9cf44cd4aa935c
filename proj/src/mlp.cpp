#include "condgen/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "condgen/errors.hpp"
#include "condgen/rng.hpp"

#include "binary_io.hpp"

namespace condgen {

int MlpArch::fan_in(int layer) const {
  return layer == 0 ? input_dim : hidden_widths[layer - 1];
}

int MlpArch::fan_out(int layer) const {
  return layer == layer_count() - 1 ? output_dim : hidden_widths[layer];
}

std::size_t MlpArch::param_count() const {
  std::size_t n = 0;
  for (int l = 0; l < layer_count(); ++l) {
    n += static_cast<std::size_t>(fan_in(l) + 1) * static_cast<std::size_t>(fan_out(l));
  }
  return n;
}

void MlpArch::validate() const {
  if (input_dim <= 0) throw std::invalid_argument("MlpArch: input_dim must be positive");
  if (output_dim <= 0) throw std::invalid_argument("MlpArch: output_dim must be positive");
  for (int w : hidden_widths) {
    if (w <= 0) throw std::invalid_argument("MlpArch: hidden widths must be positive");
  }
}

MlpArch default_arch(int input_dim, int hidden_width, int hidden_layers) {
  MlpArch arch;
  arch.input_dim = input_dim;
  arch.hidden_widths.assign(static_cast<std::size_t>(hidden_layers), hidden_width);
  arch.output_dim = 1;
  arch.validate();
  return arch;
}

std::size_t MlpNet::param_offset(int layer) const {
  std::size_t off = 0;
  for (int l = 0; l < layer; ++l) {
    off += static_cast<std::size_t>(arch.fan_in(l) + 1) *
           static_cast<std::size_t>(arch.fan_out(l));
  }
  return off;
}

MlpNet make_net(const MlpArch& arch, std::uint64_t seed) {
  arch.validate();
  MlpNet net;
  net.arch = arch;
  net.params.assign(arch.param_count(), 0.0);
  Rng rng(seed);
  std::size_t off = 0;
  for (int l = 0; l < arch.layer_count(); ++l) {
    const int in = arch.fan_in(l);
    const int out = arch.fan_out(l);
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    for (int k = 0; k < in * out; ++k) {
      net.params[off + static_cast<std::size_t>(k)] = rng.uniform(-limit, limit);
    }
    off += static_cast<std::size_t>((in + 1) * out);  // biases stay zero
  }
  return net;
}

void MlpScratch::prepare(const MlpArch& arch) {
  const std::size_t layers = static_cast<std::size_t>(arch.layer_count());
  acts.resize(layers);
  deltas.resize(layers);
  for (int l = 0; l < arch.layer_count(); ++l) {
    acts[static_cast<std::size_t>(l)].resize(static_cast<std::size_t>(arch.fan_out(l)));
    deltas[static_cast<std::size_t>(l)].resize(static_cast<std::size_t>(arch.fan_out(l)));
  }
}

namespace {

void check_shapes(const MlpNet& net, std::span<const double> input) {
  if (static_cast<int>(input.size()) != net.arch.input_dim) {
    throw std::invalid_argument("mlp: input length " + std::to_string(input.size()) +
                                " does not match input_dim " +
                                std::to_string(net.arch.input_dim));
  }
  if (net.params.size() != net.arch.param_count()) {
    throw std::invalid_argument("mlp: params length does not match architecture");
  }
  if (net.arch.output_dim != 1) {
    throw std::invalid_argument("mlp: scalar forward requires output_dim == 1");
  }
}

// Runs the forward pass filling scratch.acts; returns the scalar output.
double forward_pass(const MlpNet& net, std::span<const double> input, MlpScratch& scratch) {
  const MlpArch& arch = net.arch;
  const double* p = net.params.data();
  std::size_t off = 0;
  const double* src = input.data();
  int src_n = arch.input_dim;
  for (int l = 0; l < arch.layer_count(); ++l) {
    const int out_n = arch.fan_out(l);
    const bool last = (l == arch.layer_count() - 1);
    const double* w = p + off;
    const double* b = w + static_cast<std::size_t>(src_n) * static_cast<std::size_t>(out_n);
    double* dst = scratch.acts[static_cast<std::size_t>(l)].data();
    for (int o = 0; o < out_n; ++o) {
      const double* row = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(src_n);
      double s = b[o];
      for (int i = 0; i < src_n; ++i) s += row[i] * src[i];
      dst[o] = last ? s : (s > 0.0 ? s : 0.0);
    }
    off += static_cast<std::size_t>((src_n + 1)) * static_cast<std::size_t>(out_n);
    src = dst;
    src_n = out_n;
  }
  return scratch.acts.back()[0];
}

}  // namespace

double forward(const MlpNet& net, std::span<const double> input, MlpScratch& scratch) {
  check_shapes(net, input);
  scratch.prepare(net.arch);
  return forward_pass(net, input, scratch);
}

double forward(const MlpNet& net, std::span<const double> input) {
  MlpScratch scratch;
  return forward(net, input, scratch);
}

double backward_into(const MlpNet& net, std::span<const double> input, double upstream,
                     MlpScratch& scratch, std::span<double> param_grad,
                     std::span<double> input_grad) {
  check_shapes(net, input);
  if (!param_grad.empty() && param_grad.size() != net.params.size()) {
    throw std::invalid_argument("mlp backward: param_grad length mismatch");
  }
  if (!input_grad.empty() && input_grad.size() != input.size()) {
    throw std::invalid_argument("mlp backward: input_grad length mismatch");
  }
  scratch.prepare(net.arch);
  const double value = forward_pass(net, input, scratch);

  const MlpArch& arch = net.arch;
  const int layers = arch.layer_count();
  scratch.deltas[static_cast<std::size_t>(layers - 1)][0] = upstream;

  const bool want_params = !param_grad.empty();
  for (int l = layers - 1; l >= 0; --l) {
    const int in_n = arch.fan_in(l);
    const int out_n = arch.fan_out(l);
    const std::size_t off = net.param_offset(l);
    const double* w = net.params.data() + off;
    const double* below =
        l == 0 ? input.data() : scratch.acts[static_cast<std::size_t>(l - 1)].data();
    double* delta = scratch.deltas[static_cast<std::size_t>(l)].data();
    double* wg = want_params ? param_grad.data() + off : nullptr;
    double* bg = want_params
                     ? wg + static_cast<std::size_t>(in_n) * static_cast<std::size_t>(out_n)
                     : nullptr;
    double* delta_below =
        l == 0 ? (input_grad.empty() ? nullptr : input_grad.data())
               : scratch.deltas[static_cast<std::size_t>(l - 1)].data();

    if (delta_below != nullptr && l > 0) {
      std::fill(delta_below, delta_below + in_n, 0.0);
    }
    for (int o = 0; o < out_n; ++o) {
      const double d = delta[o];
      if (want_params) bg[o] += d;
      const double* row = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(in_n);
      if (d != 0.0) {
        if (want_params) {
          double* grow = wg + static_cast<std::size_t>(o) * static_cast<std::size_t>(in_n);
          for (int i = 0; i < in_n; ++i) grow[i] += d * below[i];
        }
        if (delta_below != nullptr) {
          for (int i = 0; i < in_n; ++i) delta_below[i] += d * row[i];
        }
      }
    }
    // Gate the incoming delta by the ReLU mask of the layer below (its
    // activation is zero exactly where the unit was clamped; derivative at
    // the kink is defined as 0).
    if (l > 0 && delta_below != nullptr) {
      const double* act_below = scratch.acts[static_cast<std::size_t>(l - 1)].data();
      for (int i = 0; i < in_n; ++i) {
        if (act_below[i] <= 0.0) delta_below[i] = 0.0;
      }
    }
  }
  return value;
}

MlpGradients backward(const MlpNet& net, std::span<const double> input, double upstream) {
  MlpGradients g;
  g.params.assign(net.params.size(), 0.0);
  g.input.assign(input.size(), 0.0);
  MlpScratch scratch;
  backward_into(net, input, upstream, scratch, g.params, g.input);
  return g;
}

// --- checkpoint io ---------------------------------------------------------
//
// Layout (little-endian throughout, see docs/checkpoint_format.md):
//   magic   8 bytes  "CGNMLP\0\0"
//   u32     version (1)
//   u32     input_dim
//   u32     hidden layer count H
//   u32*H   hidden widths
//   u32     output_dim
//   u64     param_count
//   f64*N   params (IEEE-754, layer-major weights-then-biases order)

namespace {

using namespace condgen::io;

constexpr char kNetMagic[8] = {'C', 'G', 'N', 'M', 'L', 'P', '\0', '\0'};
constexpr std::uint32_t kNetVersion = 1;

}  // namespace

void write_net(std::ostream& os, const MlpNet& net) {
  net.arch.validate();
  if (net.params.size() != net.arch.param_count()) {
    throw std::invalid_argument("write_net: params length does not match architecture");
  }
  os.write(kNetMagic, sizeof(kNetMagic));
  put_u32(os, kNetVersion);
  put_u32(os, static_cast<std::uint32_t>(net.arch.input_dim));
  put_u32(os, static_cast<std::uint32_t>(net.arch.hidden_widths.size()));
  for (int w : net.arch.hidden_widths) put_u32(os, static_cast<std::uint32_t>(w));
  put_u32(os, static_cast<std::uint32_t>(net.arch.output_dim));
  put_u64(os, net.params.size());
  for (double p : net.params) put_f64(os, p);
}

MlpNet read_net(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kNetMagic, sizeof(magic)) != 0) {
    throw LoadError("checkpoint: bad network magic");
  }
  const std::uint32_t version = get_u32(is);
  if (version != kNetVersion) {
    throw LoadError("checkpoint: unsupported network version " + std::to_string(version));
  }
  MlpNet net;
  net.arch.input_dim = static_cast<int>(get_u32(is));
  const std::uint32_t hidden = get_u32(is);
  net.arch.hidden_widths.resize(hidden);
  for (std::uint32_t i = 0; i < hidden; ++i) {
    net.arch.hidden_widths[i] = static_cast<int>(get_u32(is));
  }
  net.arch.output_dim = static_cast<int>(get_u32(is));
  net.arch.validate();
  const std::uint64_t count = get_u64(is);
  if (count != net.arch.param_count()) {
    throw LoadError("checkpoint: parameter count does not match architecture");
  }
  net.params.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) net.params[i] = get_f64(is);
  return net;
}

void save_net(const MlpNet& net, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError("cannot open for write: " + path.string());
  write_net(os, net);
  if (!os) throw LoadError("write failed: " + path.string());
}

MlpNet load_net(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open: " + path.string());
  return read_net(is);
}

}  // namespace condgen
