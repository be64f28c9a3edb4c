#include "cain/embeddings.hpp"

#include "cain/errors.hpp"

namespace cain {

EmbeddingTable::EmbeddingTable(std::string name_, std::int64_t vocab_, std::int64_t dim_)
    : name(std::move(name_)), vocab(vocab_), dim(dim_) {
  if (vocab <= 0 || dim <= 0) {
    throw ConfigError("embedding table " + name + " needs positive vocab and dim, got vocab=" +
                      std::to_string(vocab) + " dim=" + std::to_string(dim));
  }
  weights = Tensor::zeros({vocab, dim});
  weights.set_label("embed." + name);
}

Tensor EmbeddingTable::lookup(Graph& g, const std::vector<std::int64_t>& ids) const {
  for (std::int64_t id : ids) {
    if (id < 0 || id >= vocab) {
      throw IndexError("embedding table " + name + ": id " + std::to_string(id) +
                       " out of range [0," + std::to_string(vocab) + ")");
    }
  }
  return g.lookup(weights, ids);
}

Tensor EmbeddingTable::lookup_one(Graph& g, std::int64_t id) const {
  return lookup(g, std::vector<std::int64_t>{id});
}

std::int64_t log_bucket(double value, std::int64_t num_buckets) {
  if (!(value > 0.0)) return 0;
  std::int64_t b = 1;
  double threshold = 1.0;
  while (b < num_buckets - 1 && value > threshold) {
    threshold *= 4.0;
    ++b;
  }
  return value > threshold ? num_buckets - 1 : b;
}

}  // namespace cain
