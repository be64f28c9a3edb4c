#ifndef CAIN_DATA_HPP_
#define CAIN_DATA_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cain {

// One event in a behavior sequence.
struct BehaviorItem {
  std::int64_t item = 0;
  std::int64_t category = 0;
  std::int64_t author = 0;
  double watch_time = 0.0;  // seconds; candidates leave it at 0
};

struct UserProfile {
  std::int64_t age_bucket = 0;
  std::int64_t gender = 0;
  std::int64_t location = 0;
  std::int64_t education = 0;
  std::int64_t items_presented = 0;
  std::int64_t items_clicked = 0;
  std::vector<std::int64_t> top_authors;  // most interacted, size <= kTopAuthors
};

struct Sample {
  std::int64_t user = 0;
  UserProfile profile;
  std::vector<BehaviorItem> lifelong;       // temporally ordered, oldest first
  std::vector<std::int64_t> short_indices;  // suffix indices into lifelong
  BehaviorItem candidate;
  int label = 0;
};

struct VocabInfo {
  std::int64_t users = 0;
  std::int64_t items = 0;
  std::int64_t categories = 0;
  std::int64_t authors = 0;
};

// Hidden generative state for one sample; carried only in memory so the
// Bayes oracle can score with the true rule. Never serialized.
struct SampleTruth {
  bool affinity_positive = false;
  // -1 when the candidate's category never occurs in the lifelong window.
  std::int64_t pivot_index = -1;
  bool pivot_is_trigger = false;   // blocking trigger (major kind when two kinds exist)
  bool pivot_collapsed = false;    // the pivot's own watch time was collapsed
  bool condition = false;          // the full label rule before noise
};

struct Dataset {
  VocabInfo vocab;
  std::vector<Sample> samples;
  std::vector<SampleTruth> truth;  // empty unless produced by the generator

  bool has_truth() const { return truth.size() == samples.size() && !samples.empty(); }
};

constexpr std::int64_t kAgeBuckets = 8;
constexpr std::int64_t kGenders = 2;
constexpr std::int64_t kLocations = 8;
constexpr std::int64_t kEducations = 4;
constexpr std::int64_t kTopAuthors = 3;

struct GeneratorConfig {
  std::int64_t users = 500;
  std::int64_t items = 2000;
  std::int64_t categories = 20;
  std::int64_t authors = 100;
  std::int64_t seq_len = 64;           // max lifelong length per sample
  std::int64_t samples_per_user = 10;
  std::int64_t short_len = 8;
  double label_noise = 0.1;            // epsilon in [0, 0.5)
  double trigger_drop = 0.5;           // probability a session carries a trigger
  std::uint64_t seed = 1;
  // Adds a second, longer-range planted signal: triggers come in a minor
  // kind (short watch-time collapse, harmless) and a major kind (long
  // collapse, blocks the label); the two are separable only beyond the
  // short context window.
  bool second_signal = false;
  // Splits users into two groups (carried in the gender field) with
  // opposite trigger polarity in the label rule.
  bool group_rule = false;

  void validate() const;
};

// Deterministic synthetic dataset with a planted context signal: a trigger
// item is followed by a collapse of subsequent watch times inside its
// session, and the label depends on whether the most recent item sharing
// the candidate's category was such a trigger. A trigger's own fields are
// indistinguishable from a normal item's; only the collapse after it tells.
Dataset generate_synthetic(const GeneratorConfig& cfg);

enum class OracleMode { kPointWise, kContext };

// AUC of the true conditional label probability over the generated set.
// Context mode scores with the exact label rule; point-wise mode scores
// with the best predictor over features visible without neighbors (affinity
// sign, pivot presence and the pivot's own watch-time state, plus the user
// group when the rule is group-dependent). Requires generator truth.
double bayes_oracle(const Dataset& dataset, OracleMode mode);

// Newline-delimited text format with a versioned header. Round-trip
// lossless, including watch-time doubles. Loading validates every id
// against the header vocab and reports the line and field of any problem.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// Splits each user's samples in order: the last `test_fraction` go to the
// test set.
std::pair<Dataset, Dataset> split_temporal(const Dataset& dataset, double test_fraction);

struct Batch {
  std::vector<const Sample*> samples;
  std::int64_t max_len = 0;  // sequences are right-aligned and padded to this
};

// Deterministic epoch shuffling and batching. Sequences inside a batch are
// padded to the longest one; padded positions sit before the valid suffix
// and contribute nothing downstream.
class BatchIterator {
 public:
  BatchIterator(const Dataset& dataset, std::int64_t batch_size, std::uint64_t seed);

  void start_epoch(std::int64_t epoch);
  bool next(Batch& out);
  std::int64_t batches_per_epoch() const;

 private:
  const Dataset& dataset_;
  std::int64_t batch_size_;
  std::uint64_t seed_;
  std::vector<std::int64_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace cain

#endif  // CAIN_DATA_HPP_
