#include "cain/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "cain/errors.hpp"
#include "cain/tensor.hpp"

namespace cain {

double auc(const std::vector<EvalRecord>& records) {
  std::int64_t positives = 0;
  for (const EvalRecord& r : records) {
    if (!std::isfinite(r.score)) throw MetricError("auc: non-finite score");
    if (r.label != 0 && r.label != 1) throw MetricError("auc: label must be 0 or 1");
    positives += r.label;
  }
  const std::int64_t negatives = static_cast<std::int64_t>(records.size()) - positives;
  if (positives == 0 || negatives == 0) {
    throw MetricError("auc undefined: need both classes, got " + std::to_string(positives) +
                      " positives and " + std::to_string(negatives) + " negatives");
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].score < records[b].score;
  });
  // Average ranks over tie groups, then Mann-Whitney U from the positive
  // rank sum.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && records[order[j]].score == records[order[i]].score) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      if (records[order[k]].label == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double u = rank_sum_pos - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

double gauc(const std::vector<EvalRecord>& records) {
  std::map<std::int64_t, std::vector<EvalRecord>> by_user;
  for (const EvalRecord& r : records) by_user[r.user].push_back(r);
  double weighted = 0.0;
  double weight = 0.0;
  for (const auto& [user, recs] : by_user) {
    std::int64_t pos = 0;
    for (const EvalRecord& r : recs) pos += r.label;
    if (pos == 0 || pos == static_cast<std::int64_t>(recs.size())) continue;
    const double w = static_cast<double>(recs.size());
    weighted += w * auc(recs);
    weight += w;
  }
  if (weight == 0.0) {
    throw MetricError("gauc undefined: no user has both positive and negative records");
  }
  return weighted / weight;
}

double logloss(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw MetricError("logloss of an empty record set");
  double total = 0.0;
  for (const EvalRecord& r : records) {
    const double p = std::min(1.0 - Graph::kProbClamp, std::max(Graph::kProbClamp, r.score));
    total -= r.label == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(records.size());
}

MetricsReport evaluate_records(const std::vector<EvalRecord>& records) {
  MetricsReport rep;
  rep.auc = auc(records);
  rep.gauc = gauc(records);
  rep.logloss = logloss(records);
  rep.count = static_cast<std::int64_t>(records.size());
  return rep;
}

std::string MetricsReport::line() const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << "auc=" << auc << " gauc=" << gauc << " logloss=" << logloss
     << " n=" << count;
  return os.str();
}

std::string MetricsReport::table() const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "  metric   value\n";
  os << "  auc      " << auc << "\n";
  os << "  gauc     " << gauc << "\n";
  os << "  logloss  " << logloss << "\n";
  os << "  records  " << count << "\n";
  return os.str();
}

}  // namespace cain
