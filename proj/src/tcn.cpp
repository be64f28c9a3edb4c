#include "cain/tcn.hpp"

#include <algorithm>

#include "cain/errors.hpp"

namespace cain {

void TcnLayerConfig::validate(int layer_index) const {
  if (filter_size <= 0 || filter_size % 2 == 0) {
    throw ConfigError("tcn layer " + std::to_string(layer_index + 1) +
                      ": filter size must be odd and positive, got " +
                      std::to_string(filter_size));
  }
  if (stride <= 0) {
    throw ConfigError("tcn layer " + std::to_string(layer_index + 1) +
                      ": stride must be positive, got " + std::to_string(stride));
  }
  if (layer_index == 0 && stride != 1) {
    throw ConfigError("tcn layer 1 must have stride 1, got " + std::to_string(stride));
  }
  if (in_dim <= 0 || out_dim <= 0) {
    throw ConfigError("tcn layer " + std::to_string(layer_index + 1) +
                      ": dims must be positive, got in=" + std::to_string(in_dim) +
                      " out=" + std::to_string(out_dim));
  }
}

void TcnStack::validate() const {
  if (layers.empty()) throw ConfigError("tcn stack has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].validate(static_cast<int>(i));
    if (i > 0 && layers[i].in_dim != layers[i - 1].out_dim) {
      throw ConfigError("tcn stack dimension chain broken at layer " + std::to_string(i + 1) +
                        ": in=" + std::to_string(layers[i].in_dim) +
                        " but previous out=" + std::to_string(layers[i - 1].out_dim));
    }
  }
}

std::vector<std::int64_t> TcnStack::receptive_field() const {
  validate();
  std::vector<std::int64_t> cl;
  cl.reserve(layers.size());
  std::int64_t jump = 1;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::int64_t half = (layers[i].filter_size - 1) / 2;
    if (i == 0) {
      cl.push_back(half);
    } else {
      jump *= layers[i - 1].stride;
      cl.push_back(cl.back() + half * jump);
    }
  }
  return cl;
}

std::vector<std::int64_t> TcnStack::output_lengths(std::int64_t n) const {
  validate();
  std::vector<std::int64_t> lens;
  lens.reserve(layers.size());
  std::int64_t t = n;
  for (const TcnLayerConfig& layer : layers) {
    t = (t + layer.stride - 1) / layer.stride;  // ceil(t / stride)
    lens.push_back(t);
  }
  return lens;
}

std::pair<std::int64_t, std::int64_t> TcnStack::receptive_interval(int layer, std::int64_t row,
                                                                   std::int64_t n) const {
  validate();
  if (layer < 0 || layer >= static_cast<int>(layers.size())) {
    throw ConfigError("receptive_interval: layer index out of range");
  }
  const std::vector<std::int64_t> lens = output_lengths(n);
  if (row < 0 || row >= lens[static_cast<std::size_t>(layer)]) {
    throw ConfigError("receptive_interval: row out of range");
  }
  // Walk back from the requested layer, expanding [lo, hi] in each lower
  // layer's coordinates using the same end-anchored placement as conv1d.
  std::int64_t lo = row, hi = row;
  for (int l = layer; l >= 0; --l) {
    const TcnLayerConfig& cfg = layers[static_cast<std::size_t>(l)];
    const std::int64_t t_in = l == 0 ? n : lens[static_cast<std::size_t>(l - 1)];
    const std::int64_t pad = cfg.padding();
    const std::int64_t span = t_in + 2 * pad - cfg.filter_size;
    const std::int64_t anchor = span % cfg.stride;
    const std::int64_t start_lo = anchor + lo * cfg.stride - pad;
    const std::int64_t start_hi = anchor + hi * cfg.stride - pad;
    lo = std::max<std::int64_t>(0, start_lo);
    hi = std::min<std::int64_t>(t_in - 1, start_hi + cfg.filter_size - 1);
  }
  return {lo, hi};
}

Tensor tcn_forward(Graph& g, const Tensor& seq, const TcnLayerConfig& cfg, const Tensor& filter,
                   const Tensor& bias) {
  if (seq.rank() != 2 || seq.dim(0) == 0) {
    throw ConfigError("tcn_forward needs a non-empty [T, Din] sequence, got " +
                      shape_str(seq.shape()));
  }
  if (filter.rank() != 3 || filter.dim(0) != cfg.filter_size || filter.dim(1) != cfg.in_dim ||
      filter.dim(2) != cfg.out_dim) {
    throw ConfigError("tcn_forward filter " + shape_str(filter.shape()) +
                      " does not match layer config [fs=" + std::to_string(cfg.filter_size) +
                      ", in=" + std::to_string(cfg.in_dim) + ", out=" + std::to_string(cfg.out_dim) +
                      "]");
  }
  return g.conv1d(seq, filter, bias, cfg.stride, cfg.padding());
}

std::vector<Tensor> stack_forward(Graph& g, const Tensor& seq, const TcnStack& stack,
                                  const std::vector<Tensor>& filters,
                                  const std::vector<Tensor>& biases) {
  stack.validate();
  if (seq.rank() != 2 || seq.dim(1) != stack.layers[0].in_dim) {
    throw ConfigError("stack_forward input " + shape_str(seq.shape()) +
                      " does not match layer 1 in-dim " +
                      std::to_string(stack.layers[0].in_dim));
  }
  if (filters.size() != stack.layers.size() || biases.size() != stack.layers.size()) {
    throw ConfigError("stack_forward needs one filter and bias per layer");
  }
  std::vector<Tensor> outputs;
  outputs.reserve(stack.layers.size());
  Tensor cur = seq;
  for (std::size_t i = 0; i < stack.layers.size(); ++i) {
    cur = tcn_forward(g, cur, stack.layers[i], filters[i], biases[i]);
    outputs.push_back(cur);
  }
  return outputs;
}

}  // namespace cain
