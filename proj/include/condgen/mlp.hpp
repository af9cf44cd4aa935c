#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace condgen {

// Dense feed-forward architecture: ReLU on hidden layers, identity output.
// Default shape is 7 fully connected layers (6 hidden + 1 output).
struct MlpArch {
  int input_dim = 2;
  std::vector<int> hidden_widths = {64, 64, 64, 64, 64, 64};
  int output_dim = 1;

  int layer_count() const { return static_cast<int>(hidden_widths.size()) + 1; }
  int fan_in(int layer) const;
  int fan_out(int layer) const;
  std::size_t param_count() const;  // sum over layers of (fan_in + 1) * fan_out
  void validate() const;            // throws std::invalid_argument

  bool operator==(const MlpArch&) const = default;
};

MlpArch default_arch(int input_dim, int hidden_width = 64, int hidden_layers = 6);

// Parameter container. Flat layout, layer-major: for each layer, all weights
// (row-major, [out][in]) followed by the biases. That order is the one the
// checkpoint format stores (see docs/checkpoint_format.md).
struct MlpNet {
  MlpArch arch;
  std::vector<double> params;

  std::size_t param_offset(int layer) const;  // offset of layer's weight block
};

// He-uniform fan-in initialization (weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
// biases zero), reproducible from the seed.
MlpNet make_net(const MlpArch& arch, std::uint64_t seed);

// Reusable per-layer activation/delta buffers so hot loops do not allocate.
class MlpScratch {
 public:
  void prepare(const MlpArch& arch);
  std::vector<std::vector<double>> acts;    // acts[l] = output of layer l
  std::vector<std::vector<double>> deltas;  // backprop buffers, same shapes
};

// Evaluates the network at `input`. Pure; safe to call concurrently on a
// shared net with distinct scratch objects.
double forward(const MlpNet& net, std::span<const double> input, MlpScratch& scratch);
double forward(const MlpNet& net, std::span<const double> input);

// Exact reverse-mode derivatives of upstream * forward(net, input).
// Recomputes the forward pass internally, then accumulates
// `upstream * d(output)/d(params)` into param_grad and
// `upstream * d(output)/d(input)` into input_grad. Either span may be empty
// to skip that side; nonempty spans must match the corresponding sizes and
// are accumulated into (callers own zeroing). ReLU derivative at exactly 0
// is taken as 0. Returns the forward value.
double backward_into(const MlpNet& net, std::span<const double> input, double upstream,
                     MlpScratch& scratch, std::span<double> param_grad,
                     std::span<double> input_grad);

struct MlpGradients {
  std::vector<double> params;
  std::vector<double> input;
};
MlpGradients backward(const MlpNet& net, std::span<const double> input, double upstream);

// Checkpoint container, versioned; byte layout in docs/checkpoint_format.md.
void write_net(std::ostream& os, const MlpNet& net);
MlpNet read_net(std::istream& is);
void save_net(const MlpNet& net, const std::filesystem::path& path);
MlpNet load_net(const std::filesystem::path& path);

}  // namespace condgen
