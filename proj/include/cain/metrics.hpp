#ifndef CAIN_METRICS_HPP_
#define CAIN_METRICS_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace cain {

struct EvalRecord {
  std::int64_t user = 0;
  double score = 0.0;
  int label = 0;
};

// Probability that a random positive outranks a random negative, ties at
// 0.5. Rank-sum implementation, O(n log n). Requires at least one positive
// and one negative record.
double auc(const std::vector<EvalRecord>& records);

// Impression-weighted mean of per-user AUCs over users that have both a
// positive and a negative record; single-class users are excluded from both
// numerator and denominator. Requires at least one eligible user.
double gauc(const std::vector<EvalRecord>& records);

// Mean negative log likelihood with the same probability clamp as the
// training loss.
double logloss(const std::vector<EvalRecord>& records);

struct MetricsReport {
  double auc = 0.0;
  double gauc = 0.0;
  double logloss = 0.0;
  std::int64_t count = 0;

  // Single-line machine-readable record: `auc=... gauc=... logloss=... n=...`.
  std::string line() const;
  // Small human-readable table.
  std::string table() const;
};

MetricsReport evaluate_records(const std::vector<EvalRecord>& records);

}  // namespace cain

#endif  // CAIN_METRICS_HPP_
