#ifndef CAIN_ATTENTION_HPP_
#define CAIN_ATTENTION_HPP_

#include <cstdint>
#include <vector>

#include "cain/tensor.hpp"

namespace cain {

// Target-attention projections for one layer. Each layer owns an
// independent set.
struct AuxAttnParams {
  Tensor w_query;  // [d_query, d]
  Tensor w_key;    // [d_seq, d]
  Tensor w_value;  // [d_seq, d]
  std::int64_t inner_dim = 0;

  AuxAttnParams() = default;
  AuxAttnParams(std::int64_t d_query, std::int64_t d_seq, std::int64_t d,
                const std::string& name);
};

// Two-stage attention for the lifelong (layer-1) sequence: a linear-score
// retrieval stage picks the top-K rows, then exact target attention runs on
// the selected rows. Both stages read the same representations, and the
// retrieval stage reuses the exact-stage query/key projections, so the rows
// it keeps are exactly the rows the exact stage would weight highest and
// the projections train through the second stage.
struct MajorAttnParams {
  AuxAttnParams exact;
  std::int64_t top_k = 32;
};

struct AttnResult {
  Tensor interest;               // [d]
  std::vector<double> weights;   // one per input row; masked rows hold 0
  std::vector<std::int64_t> selected;  // rows attended (major attention only)
};

// Scaled-dot-product target attention over the last `valid` rows of seq.
// Scores are (q W_Q)(r W_K)^T / sqrt(d); with normalize=true (the default
// everywhere) they pass through a softmax before the weighted sum of
// W_V-projected rows, otherwise the raw scores weight the sum directly.
// valid == 0 returns a zero vector so empty sequences flow through.
AttnResult auxiliary_attention(Graph& g, const Tensor& query, const Tensor& seq,
                               const AuxAttnParams& params, std::int64_t valid,
                               bool normalize = true);

// Retrieval stage scores every valid row without recording gradients, keeps
// the top-K (ties broken toward lower indices, K clamped to the valid
// count), then runs auxiliary_attention on the kept rows. K <= 0 is a
// config error.
AttnResult major_attention(Graph& g, const Tensor& query, const Tensor& seq,
                           const MajorAttnParams& params, std::int64_t valid,
                           bool normalize = true);

// Indices of the k largest scores, ties broken toward the lower index,
// returned in ascending index order.
std::vector<std::int64_t> select_top_k(const std::vector<double>& scores, std::int64_t k);

}  // namespace cain

#endif  // CAIN_ATTENTION_HPP_
