#ifndef CAIN_PEG_HPP_
#define CAIN_PEG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "cain/tcn.hpp"
#include "cain/tensor.hpp"

namespace cain {

// How the personalized convolution combines with the shared one.
//   replace: only the generated filters run (the default).
//   sum:     elementwise sum of the shared-filter and generated-filter outputs.
//   concat:  feature-axis concatenation; doubles the effective out-dim.
enum class PegAggregation { kReplace, kSum, kConcat };

PegAggregation peg_aggregation_from(const std::string& name);
std::string to_string(PegAggregation mode);

// Two-layer hypernetwork that maps a user profile representation to the
// convolution filter and bias of one TCN layer. The second layer starts at
// zero with the filter slice of its bias drawn at filter scale, so every
// user begins from the same sane shared filter and personalization grows
// from the gradient into w2.
struct PegLayerNet {
  Tensor w1;  // [d_profile, hidden]
  Tensor b1;  // [hidden]
  Tensor w2;  // [hidden, fs*in*out + out]
  Tensor b2;  // [fs*in*out + out]
  std::int64_t filter_size = 0;
  std::int64_t in_dim = 0;
  std::int64_t out_dim = 0;

  PegLayerNet() = default;
  PegLayerNet(std::int64_t d_profile, std::int64_t hidden, const TcnLayerConfig& target,
              const std::string& name);

  std::int64_t output_size() const { return filter_size * in_dim * out_dim + out_dim; }
};

struct GeneratedFilter {
  Tensor filter;  // [fs, in, out]
  Tensor bias;    // [out]
};

// profile -> ReLU(profile x W1 + b1) -> x W2 + b2 -> reshape into filter and
// bias. Deterministic in the profile; gradients reach both the net and the
// profile's upstream embeddings.
GeneratedFilter generate_filters(Graph& g, const Tensor& profile, const PegLayerNet& net);

// One personalized TCN layer. Mode replace ignores the shared filter pair;
// sum and concat run both convolutions and merge the outputs.
Tensor personalized_conv(Graph& g, const Tensor& seq, const TcnLayerConfig& cfg,
                         const Tensor& profile, const PegLayerNet& net, PegAggregation mode,
                         const Tensor& shared_filter, const Tensor& shared_bias);

}  // namespace cain

#endif  // CAIN_PEG_HPP_
