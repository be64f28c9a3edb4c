#include "cain/peg.hpp"

#include <array>

#include "cain/errors.hpp"

namespace cain {

PegAggregation peg_aggregation_from(const std::string& name) {
  if (name == "replace") return PegAggregation::kReplace;
  if (name == "sum") return PegAggregation::kSum;
  if (name == "concat") return PegAggregation::kConcat;
  throw ConfigError("unknown peg aggregation mode: " + name +
                    " (expected replace, sum or concat)");
}

std::string to_string(PegAggregation mode) {
  switch (mode) {
    case PegAggregation::kReplace: return "replace";
    case PegAggregation::kSum: return "sum";
    case PegAggregation::kConcat: return "concat";
  }
  return "?";
}

PegLayerNet::PegLayerNet(std::int64_t d_profile, std::int64_t hidden,
                         const TcnLayerConfig& target, const std::string& name)
    : filter_size(target.filter_size), in_dim(target.in_dim), out_dim(target.out_dim) {
  if (d_profile <= 0 || hidden <= 0) {
    throw ConfigError("peg net " + name + " needs positive profile and hidden dims");
  }
  w1 = Tensor::zeros({d_profile, hidden});
  w1.set_label(name + ".w1");
  b1 = Tensor::zeros({hidden});
  b1.set_label(name + ".b1");
  w2 = Tensor::zeros({hidden, output_size()});
  w2.set_label(name + ".w2");
  b2 = Tensor::zeros({output_size()});
  b2.set_label(name + ".b2");
}

GeneratedFilter generate_filters(Graph& g, const Tensor& profile, const PegLayerNet& net) {
  if (profile.rank() != 1 || profile.dim(0) != net.w1.dim(0)) {
    throw ShapeError("peg profile " + shape_str(profile.shape()) +
                     " does not match hypernetwork input dim " + std::to_string(net.w1.dim(0)));
  }
  Tensor row = g.reshape(profile, {1, profile.dim(0)});
  Tensor hidden = g.relu(g.add(g.matmul(row, net.w1), net.b1));        // [1, hidden]
  Tensor flat = g.add(g.matmul(hidden, net.w2), net.b2);               // [1, fs*in*out + out]
  const std::int64_t filter_elems = net.filter_size * net.in_dim * net.out_dim;
  Tensor col = g.reshape(flat, {net.output_size(), 1});
  GeneratedFilter out;
  out.filter = g.reshape(g.slice_rows(col, 0, filter_elems),
                         {net.filter_size, net.in_dim, net.out_dim});
  out.bias = g.reshape(g.slice_rows(col, filter_elems, net.output_size()), {net.out_dim});
  return out;
}

Tensor personalized_conv(Graph& g, const Tensor& seq, const TcnLayerConfig& cfg,
                         const Tensor& profile, const PegLayerNet& net, PegAggregation mode,
                         const Tensor& shared_filter, const Tensor& shared_bias) {
  if (net.filter_size != cfg.filter_size || net.in_dim != cfg.in_dim ||
      net.out_dim != cfg.out_dim) {
    throw ConfigError("peg net target shape does not match tcn layer config");
  }
  GeneratedFilter gen = generate_filters(g, profile, net);
  Tensor personal = tcn_forward(g, seq, cfg, gen.filter, gen.bias);
  if (mode == PegAggregation::kReplace) return personal;
  if (!shared_filter.defined() || !shared_bias.defined()) {
    throw ConfigError("peg mode " + to_string(mode) + " needs shared filters");
  }
  Tensor shared = tcn_forward(g, seq, cfg, shared_filter, shared_bias);
  if (mode == PegAggregation::kSum) return g.add(shared, personal);
  const std::array<Tensor, 2> parts{shared, personal};
  return g.concat(parts, 1);
}

}  // namespace cain
