#ifndef CAIN_TCN_HPP_
#define CAIN_TCN_HPP_

#include <cstdint>
#include <vector>

#include "cain/tensor.hpp"

namespace cain {

// One temporal convolution layer. Filter sizes are odd (2*cl + 1 around a
// center item); padding is symmetric (fs - 1) / 2 so a stride-1 layer
// preserves sequence length and every center item keeps its own
// representation. Strided layers use the same padding with end-anchored
// window placement (see Graph::conv1d), giving ceil(T / stride) outputs.
struct TcnLayerConfig {
  std::int64_t filter_size = 3;
  std::int64_t stride = 1;
  std::int64_t in_dim = 0;
  std::int64_t out_dim = 0;

  std::int64_t padding() const { return (filter_size - 1) / 2; }
  std::int64_t context_length() const { return (filter_size - 1) / 2; }
  void validate(int layer_index) const;
};

// Ordered stack of convolution layers with derived per-layer context
// lengths and output lengths. Layer 1 must have stride 1.
struct TcnStack {
  std::vector<TcnLayerConfig> layers;

  void validate() const;

  // Per-side context length of each layer's output with respect to the
  // original input. Layer 1: (fs1 - 1) / 2; afterwards
  // cl[n+1] = cl[n] + ((fs[n+1] - 1) / 2) * jump[n], where jump[n] is the
  // product of the strides of layers 1..n. With all strides 1 this is the
  // usual filter-width accumulation (total width grows by fs - 1 per layer).
  std::vector<std::int64_t> receptive_field() const;

  // Output length of every layer for an input of length n.
  std::vector<std::int64_t> output_lengths(std::int64_t n) const;

  // Exact closed interval of input indices that influence output row `row`
  // of layer `layer` (0-based), for an input of length n. Computed by
  // composing the window placement of each layer, clipped to valid indices.
  std::pair<std::int64_t, std::int64_t> receptive_interval(int layer, std::int64_t row,
                                                           std::int64_t n) const;
};

// Single TCN layer forward: centered windowed product with zero padding on
// both ends. For stride 1 the output length equals the input length.
Tensor tcn_forward(Graph& g, const Tensor& seq, const TcnLayerConfig& cfg,
                   const Tensor& filter, const Tensor& bias);

// Runs the whole stack and returns every layer's output (all of them feed
// attention). Checks that the dimension chain matches before any compute.
std::vector<Tensor> stack_forward(Graph& g, const Tensor& seq, const TcnStack& stack,
                                  const std::vector<Tensor>& filters,
                                  const std::vector<Tensor>& biases);

}  // namespace cain

#endif  // CAIN_TCN_HPP_
