#include "cain/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cain/errors.hpp"

namespace cain {

AuxAttnParams::AuxAttnParams(std::int64_t d_query, std::int64_t d_seq, std::int64_t d,
                             const std::string& name)
    : inner_dim(d) {
  if (d_query <= 0 || d_seq <= 0 || d <= 0) {
    throw ConfigError("attention " + name + " needs positive dims");
  }
  w_query = Tensor::zeros({d_query, d});
  w_query.set_label(name + ".wq");
  w_key = Tensor::zeros({d_seq, d});
  w_key.set_label(name + ".wk");
  w_value = Tensor::zeros({d_seq, d});
  w_value.set_label(name + ".wv");
}

AttnResult auxiliary_attention(Graph& g, const Tensor& query, const Tensor& seq,
                               const AuxAttnParams& params, std::int64_t valid,
                               bool normalize) {
  if (seq.rank() != 2) {
    throw ShapeError("attention sequence must be rank-2, got " + shape_str(seq.shape()));
  }
  const std::int64_t rows = seq.dim(0);
  if (valid < 0 || valid > rows) {
    throw ConfigError("attention validity " + std::to_string(valid) + " out of range for " +
                      shape_str(seq.shape()));
  }
  AttnResult result;
  result.weights.assign(static_cast<std::size_t>(rows), 0.0);
  if (valid == 0) {
    result.interest = Tensor::zeros({params.inner_dim});
    return result;
  }
  Tensor active = valid == rows ? seq : g.slice_rows(seq, rows - valid, rows);
  Tensor q_row = query.rank() == 1 ? g.reshape(query, {1, query.dim(0)}) : query;
  Tensor q = g.matmul(q_row, params.w_query);                       // [1, d]
  Tensor keys = g.matmul(active, params.w_key);                     // [valid, d]
  Tensor scores = g.matmul_nt(q, keys);                             // [1, valid]
  Tensor scaled = g.scale(scores, 1.0 / std::sqrt(static_cast<double>(params.inner_dim)));
  Tensor flat = g.reshape(scaled, {valid});
  Tensor weights = normalize ? g.softmax(flat) : flat;
  Tensor values = g.matmul(active, params.w_value);                 // [valid, d]
  Tensor pooled = g.matmul(g.reshape(weights, {1, valid}), values); // [1, d]
  result.interest = g.reshape(pooled, {params.inner_dim});
  const auto& wv = weights.values();
  for (std::int64_t i = 0; i < valid; ++i) {
    result.weights[static_cast<std::size_t>(rows - valid + i)] = wv[static_cast<std::size_t>(i)];
  }
  return result;
}

std::vector<std::int64_t> select_top_k(const std::vector<double>& scores, std::int64_t k) {
  if (k <= 0) throw ConfigError("top-k budget must be positive, got " + std::to_string(k));
  std::vector<std::int64_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)]) {
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  std::vector<std::int64_t> selected(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
  std::sort(selected.begin(), selected.end());
  return selected;
}

AttnResult major_attention(Graph& g, const Tensor& query, const Tensor& seq,
                           const MajorAttnParams& params, std::int64_t valid,
                           bool normalize) {
  if (params.top_k <= 0) {
    throw ConfigError("major attention top_k must be positive, got " +
                      std::to_string(params.top_k));
  }
  const std::int64_t rows = seq.dim(0);
  if (valid < 0 || valid > rows) {
    throw ConfigError("attention validity " + std::to_string(valid) + " out of range for " +
                      shape_str(seq.shape()));
  }
  if (valid == 0) {
    AttnResult result;
    result.weights.assign(static_cast<std::size_t>(rows), 0.0);
    result.interest = Tensor::zeros({params.exact.inner_dim});
    return result;
  }
  const std::int64_t offset = rows - valid;
  if (valid <= params.top_k) {
    AttnResult result = auxiliary_attention(g, query, seq, params.exact, valid, normalize);
    result.selected.resize(static_cast<std::size_t>(valid));
    std::iota(result.selected.begin(), result.selected.end(), offset);
    return result;
  }
  // Retrieval scores are plain values; gradient reaches the projections
  // through the exact stage on the selected rows.
  const std::int64_t d = params.exact.inner_dim;
  const std::int64_t d_query = params.exact.w_query.dim(0);
  const std::int64_t d_seq = params.exact.w_key.dim(0);
  std::vector<double> q(static_cast<std::size_t>(d), 0.0);
  const auto& qv = query.values();
  const auto& wq = params.exact.w_query.values();
  for (std::int64_t i = 0; i < d_query; ++i) {
    const double x = qv[static_cast<std::size_t>(i)];
    if (x == 0.0) continue;
    for (std::int64_t j = 0; j < d; ++j) {
      q[static_cast<std::size_t>(j)] += x * wq[static_cast<std::size_t>(i * d + j)];
    }
  }
  const auto& sv = seq.values();
  const auto& wk = params.exact.w_key.values();
  std::vector<double> scores(static_cast<std::size_t>(valid), 0.0);
  for (std::int64_t t = 0; t < valid; ++t) {
    const double* row = sv.data() + (offset + t) * d_seq;
    double s = 0.0;
    for (std::int64_t i = 0; i < d_seq; ++i) {
      const double x = row[i];
      if (x == 0.0) continue;
      const double* wrow = wk.data() + i * d;
      double acc = 0.0;
      for (std::int64_t j = 0; j < d; ++j) acc += x * wrow[j] * q[static_cast<std::size_t>(j)];
      s += acc;
    }
    scores[static_cast<std::size_t>(t)] = s;
  }
  std::vector<std::int64_t> picked = select_top_k(scores, params.top_k);
  std::vector<std::int64_t> absolute(picked.size());
  for (std::size_t i = 0; i < picked.size(); ++i) absolute[i] = picked[i] + offset;

  Tensor gathered = g.gather_rows(seq, absolute);
  AttnResult inner = auxiliary_attention(g, query, gathered, params.exact,
                                         static_cast<std::int64_t>(absolute.size()), normalize);
  AttnResult result;
  result.interest = inner.interest;
  result.selected = absolute;
  result.weights.assign(static_cast<std::size_t>(rows), 0.0);
  for (std::size_t i = 0; i < absolute.size(); ++i) {
    result.weights[static_cast<std::size_t>(absolute[i])] = inner.weights[i];
  }
  return result;
}

}  // namespace cain
