#ifndef CAIN_EMBEDDINGS_HPP_
#define CAIN_EMBEDDINGS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "cain/tensor.hpp"

namespace cain {

// Id-to-vector lookup table. Rows live in a single parameter tensor so the
// optimizer and checkpointer see one entry per table; gradients scatter
// additively into only the looked-up rows.
struct EmbeddingTable {
  std::string name;
  std::int64_t vocab = 0;
  std::int64_t dim = 0;
  Tensor weights;  // [vocab, dim]

  EmbeddingTable() = default;
  EmbeddingTable(std::string name, std::int64_t vocab, std::int64_t dim);

  // Row gather; ids are validated against the vocab and the error names the
  // table and the offending id.
  Tensor lookup(Graph& g, const std::vector<std::int64_t>& ids) const;
  Tensor lookup_one(Graph& g, std::int64_t id) const;
};

// Log-scale bucket index for a non-negative quantity (watch time in seconds
// or a behavioural count). Buckets: 0, (0,1], (1,4], (4,16], ... powers of
// four, capped at num_buckets - 1.
std::int64_t log_bucket(double value, std::int64_t num_buckets);

constexpr std::int64_t kWatchTimeBuckets = 8;
constexpr std::int64_t kStatBuckets = 8;

}  // namespace cain

#endif  // CAIN_EMBEDDINGS_HPP_
