#include "cain/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cain/errors.hpp"
#include "cain/metrics.hpp"
#include "cain/rng.hpp"

namespace cain {

namespace {

constexpr std::int64_t kSampleGap = 4;
constexpr double kCollapseCeiling = 1.0;  // collapsed watch times fall below this

struct StreamItem {
  BehaviorItem item;
  bool trigger = false;   // causes the collapse that follows it
  bool major = true;      // blocking kind (always true without the second signal)
  bool collapsed = false;
};

std::int64_t category_pool(std::int64_t category, std::int64_t items, std::int64_t categories) {
  // Item ids are partitioned by residue: item i belongs to category i % C.
  return (items - 1 - category) / categories + 1;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (users <= 0 || items <= 0 || categories <= 0 || authors <= 0) {
    throw ConfigError("generator: vocab sizes must be positive");
  }
  if (items < 2 || categories < 2 || authors < 2) {
    throw ConfigError("generator: vocab sizes must be at least 2");
  }
  if (categories > items) {
    throw ConfigError("generator: more categories (" + std::to_string(categories) +
                      ") than items (" + std::to_string(items) + ")");
  }
  if (seq_len < 8) throw ConfigError("generator: seq_len must be at least 8");
  if (samples_per_user <= 0) throw ConfigError("generator: samples_per_user must be positive");
  if (short_len <= 0 || short_len > 20) {
    throw ConfigError("generator: short_len must be in [1, 20]");
  }
  if (!(label_noise >= 0.0 && label_noise < 0.5)) {
    throw ConfigError("generator: label_noise must be in [0, 0.5), got " +
                      std::to_string(label_noise));
  }
  if (!(trigger_drop >= 0.0 && trigger_drop <= 1.0)) {
    throw ConfigError("generator: trigger_drop must be in [0, 1]");
  }
}

Dataset generate_synthetic(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Dataset ds;
  ds.vocab = VocabInfo{cfg.users, cfg.items, cfg.categories, cfg.authors};
  ds.samples.reserve(static_cast<std::size_t>(cfg.users * cfg.samples_per_user));
  ds.truth.reserve(ds.samples.capacity());

  const std::int64_t needed =
      cfg.seq_len + (cfg.samples_per_user - 1) * kSampleGap + kSampleGap;

  for (std::int64_t u = 0; u < cfg.users; ++u) {
    UserProfile base_profile;
    base_profile.age_bucket = rng.range(0, kAgeBuckets - 1);
    base_profile.gender = rng.range(0, kGenders - 1);
    base_profile.location = rng.range(0, kLocations - 1);
    base_profile.education = rng.range(0, kEducations - 1);
    const std::int64_t group = cfg.group_rule ? base_profile.gender : 0;

    std::vector<char> affinity(static_cast<std::size_t>(cfg.categories));
    for (char& a : affinity) a = rng.bernoulli(0.5) ? 1 : 0;

    // Session-structured behavior stream. Each session has a theme
    // category; with probability trigger_drop one item of the session is a
    // trigger and the watch times after it collapse. Triggers never sit at
    // the session edge, so a trigger always has an in-session follower and
    // the first item of a session is never collapsed.
    std::vector<StreamItem> stream;
    stream.reserve(static_cast<std::size_t>(needed + 16));
    while (static_cast<std::int64_t>(stream.size()) < needed) {
      const std::int64_t len = cfg.second_signal ? rng.range(10, 14) : rng.range(6, 10);
      const std::int64_t theme = rng.range(0, cfg.categories - 1);
      const bool has_trigger = rng.bernoulli(cfg.trigger_drop);
      const bool major = cfg.second_signal ? rng.bernoulli(0.5) : true;
      std::int64_t trig_pos = -1;
      if (has_trigger) {
        // The second signal needs room for a six-item collapse run plus one
        // untouched item so run lengths stay separable.
        trig_pos = cfg.second_signal ? rng.range(1, len - 8) : rng.range(1, len - 2);
      }
      for (std::int64_t j = 0; j < len; ++j) {
        StreamItem si;
        const std::int64_t cat =
            rng.bernoulli(0.7) ? theme : rng.range(0, cfg.categories - 1);
        const std::int64_t pool = category_pool(cat, cfg.items, cfg.categories);
        si.item.item = cat + cfg.categories * rng.range(0, pool - 1);
        si.item.category = cat;
        si.item.author = si.item.item % cfg.authors;
        si.trigger = has_trigger && j == trig_pos;
        si.major = major;
        if (has_trigger && j > trig_pos) {
          const std::int64_t run = cfg.second_signal ? (major ? 6 : 3) : len;
          si.collapsed = j <= trig_pos + run;
        }
        if (si.collapsed) {
          si.item.watch_time = rng.uniform(0.05, 0.5);
        } else if (affinity[static_cast<std::size_t>(cat)]) {
          si.item.watch_time = rng.uniform(20.0, 600.0);
        } else {
          si.item.watch_time = rng.uniform(2.0, 10.0);
        }
        stream.push_back(si);
      }
    }

    const std::int64_t first_cursor = rng.range(cfg.seq_len / 2, cfg.seq_len);
    for (std::int64_t k = 0; k < cfg.samples_per_user; ++k) {
      const std::int64_t cursor =
          std::min<std::int64_t>(first_cursor + k * kSampleGap,
                                 static_cast<std::int64_t>(stream.size()));
      const std::int64_t begin = std::max<std::int64_t>(0, cursor - cfg.seq_len);
      const std::int64_t window_len = cursor - begin;

      std::vector<std::int64_t> last_occ(static_cast<std::size_t>(cfg.categories), -1);
      for (std::int64_t t = begin; t < cursor; ++t) {
        last_occ[static_cast<std::size_t>(stream[static_cast<std::size_t>(t)].item.category)] = t;
      }

      // Candidate category selection keeps the planted signal balanced:
      // half the time aim at a category whose most recent occurrence is a
      // trigger, otherwise at one whose most recent occurrence is not. The
      // pivot is never the final window item, so its follower is observable.
      std::vector<std::int64_t> trigger_cats;
      std::vector<std::int64_t> plain_cats;
      for (std::int64_t c = 0; c < cfg.categories; ++c) {
        const std::int64_t p = last_occ[static_cast<std::size_t>(c)];
        if (p < 0 || p > cursor - 2) continue;
        if (stream[static_cast<std::size_t>(p)].trigger) {
          trigger_cats.push_back(c);
        } else {
          plain_cats.push_back(c);
        }
      }
      std::int64_t cstar;
      const bool want_trigger = rng.bernoulli(0.5);
      if (want_trigger && !trigger_cats.empty()) {
        cstar = trigger_cats[rng.below(trigger_cats.size())];
      } else if (!plain_cats.empty()) {
        cstar = plain_cats[rng.below(plain_cats.size())];
      } else if (!trigger_cats.empty()) {
        cstar = trigger_cats[rng.below(trigger_cats.size())];
      } else {
        cstar = rng.range(0, cfg.categories - 1);
      }

      Sample s;
      s.user = u;
      s.profile = base_profile;
      s.profile.items_presented = cursor;
      std::int64_t clicked = 0;
      std::map<std::int64_t, std::int64_t> author_freq;
      for (std::int64_t t = begin; t < cursor; ++t) {
        const StreamItem& si = stream[static_cast<std::size_t>(t)];
        s.lifelong.push_back(si.item);
        if (si.item.watch_time >= 20.0) ++clicked;
        ++author_freq[si.item.author];
      }
      s.profile.items_clicked = clicked;
      std::vector<std::pair<std::int64_t, std::int64_t>> freq(author_freq.begin(),
                                                              author_freq.end());
      std::sort(freq.begin(), freq.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
      });
      for (std::size_t i = 0; i < freq.size() && i < static_cast<std::size_t>(kTopAuthors); ++i) {
        s.profile.top_authors.push_back(freq[i].first);
      }

      const std::int64_t h = std::min<std::int64_t>(cfg.short_len, window_len);
      for (std::int64_t i = window_len - h; i < window_len; ++i) s.short_indices.push_back(i);

      const std::int64_t cpool = category_pool(cstar, cfg.items, cfg.categories);
      s.candidate.item = cstar + cfg.categories * rng.range(0, cpool - 1);
      s.candidate.category = cstar;
      s.candidate.author = s.candidate.item % cfg.authors;
      s.candidate.watch_time = 0.0;

      SampleTruth truth;
      truth.affinity_positive = affinity[static_cast<std::size_t>(cstar)] != 0;
      truth.pivot_index = last_occ[static_cast<std::size_t>(cstar)];
      if (truth.pivot_index >= 0) {
        const StreamItem& pivot = stream[static_cast<std::size_t>(truth.pivot_index)];
        truth.pivot_is_trigger = pivot.trigger && pivot.major;
        truth.pivot_collapsed = pivot.collapsed;
      }
      if (group == 1) {
        truth.condition = truth.affinity_positive && truth.pivot_is_trigger;
      } else {
        truth.condition = truth.affinity_positive && !truth.pivot_is_trigger;
      }
      const double p_label = truth.condition ? 1.0 - cfg.label_noise : cfg.label_noise;
      s.label = rng.bernoulli(p_label) ? 1 : 0;

      ds.samples.push_back(std::move(s));
      ds.truth.push_back(truth);
    }
  }
  return ds;
}

double bayes_oracle(const Dataset& dataset, OracleMode mode) {
  if (!dataset.has_truth()) {
    throw UsageError("bayes_oracle: dataset was not produced by the synthetic generator");
  }
  const double eps_guess = [&] {
    // The label-noise level is recoverable from the truth: fraction of
    // labels disagreeing with the condition bit.
    double disagree = 0.0;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      if ((dataset.samples[i].label == 1) != dataset.truth[i].condition) disagree += 1.0;
    }
    return disagree / static_cast<double>(dataset.samples.size());
  }();

  std::vector<EvalRecord> records;
  records.reserve(dataset.samples.size());
  if (mode == OracleMode::kContext) {
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      records.push_back(EvalRecord{dataset.samples[i].user,
                                   dataset.truth[i].condition ? 1.0 - eps_guess : eps_guess,
                                   dataset.samples[i].label});
    }
    return auc(records);
  }
  // Point-wise mode: the best predictor over features visible without
  // neighbors. Strata: (group, affinity sign, pivot state) where pivot
  // state is none / normal / collapsed -- the pivot's own watch time is
  // point-wise visible, the collapse after it is not.
  auto stratum = [&](std::size_t i) {
    const SampleTruth& t = dataset.truth[i];
    const int pivot_state = t.pivot_index < 0 ? 0 : (t.pivot_collapsed ? 2 : 1);
    return static_cast<std::size_t>(
        (dataset.samples[i].profile.gender * 2 + (t.affinity_positive ? 1 : 0)) * 3 +
        pivot_state);
  };
  std::vector<double> cond_sum(kGenders * 2 * 3, 0.0);
  std::vector<double> count(kGenders * 2 * 3, 0.0);
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const std::size_t s = stratum(i);
    cond_sum[s] += dataset.truth[i].condition ? 1.0 : 0.0;
    count[s] += 1.0;
  }
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const std::size_t s = stratum(i);
    const double p_cond = cond_sum[s] / count[s];
    const double score = (1.0 - eps_guess) * p_cond + eps_guess * (1.0 - p_cond);
    records.push_back(EvalRecord{dataset.samples[i].user, score, dataset.samples[i].label});
  }
  return auc(records);
}

// ---------------------------------------------------------------------------
// File format

namespace {

constexpr const char* kHeaderTag = "#cain-dataset v1";

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

[[noreturn]] void format_error(std::int64_t line, const std::string& field,
                               const std::string& what) {
  throw DataFormatError("dataset line " + std::to_string(line) + ", field '" + field +
                        "': " + what);
}

std::int64_t parse_int(const std::string& s, std::int64_t line, const std::string& field) {
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    format_error(line, field, "not an integer: " + s);
  }
}

double parse_num(const std::string& s, std::int64_t line, const std::string& field) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    format_error(line, field, "not a number: " + s);
  }
}

void check_id(std::int64_t v, std::int64_t vocab, std::int64_t line, const std::string& field) {
  if (v < 0 || v >= vocab) {
    format_error(line, field,
                 "id " + std::to_string(v) + " outside vocab [0," + std::to_string(vocab) + ")");
  }
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataFormatError("cannot open for writing: " + path);
  out << kHeaderTag << " users=" << dataset.vocab.users << " items=" << dataset.vocab.items
      << " categories=" << dataset.vocab.categories << " authors=" << dataset.vocab.authors
      << "\n";
  for (const Sample& s : dataset.samples) {
    out << s.user << '\t' << s.profile.age_bucket << ',' << s.profile.gender << ','
        << s.profile.location << ',' << s.profile.education << '\t'
        << s.profile.items_presented << ',' << s.profile.items_clicked << '\t';
    if (s.profile.top_authors.empty()) {
      out << '-';
    } else {
      for (std::size_t i = 0; i < s.profile.top_authors.size(); ++i) {
        if (i) out << ',';
        out << s.profile.top_authors[i];
      }
    }
    out << '\t';
    if (s.lifelong.empty()) {
      out << '-';
    } else {
      for (std::size_t i = 0; i < s.lifelong.size(); ++i) {
        if (i) out << ';';
        const BehaviorItem& b = s.lifelong[i];
        out << b.item << ':' << b.category << ':' << b.author << ':'
            << format_double(b.watch_time);
      }
    }
    out << '\t';
    if (s.short_indices.empty()) {
      out << '-';
    } else {
      for (std::size_t i = 0; i < s.short_indices.size(); ++i) {
        if (i) out << ',';
        out << s.short_indices[i];
      }
    }
    out << '\t' << s.candidate.item << ':' << s.candidate.category << ':' << s.candidate.author
        << '\t' << s.label << '\n';
  }
  if (!out) throw DataFormatError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open dataset: " + path);
  Dataset ds;
  std::string line;
  std::int64_t lineno = 0;
  if (!std::getline(in, line)) return ds;  // empty file -> empty dataset
  ++lineno;
  {
    std::istringstream hs(line);
    std::string tag, ver;
    hs >> tag >> ver;
    if (tag + " " + ver != kHeaderTag) {
      throw DataFormatError("dataset header missing or wrong version: " + line);
    }
    std::string kv;
    while (hs >> kv) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos) format_error(lineno, "header", "bad entry " + kv);
      const std::string key = kv.substr(0, eq);
      const std::int64_t val = parse_int(kv.substr(eq + 1), lineno, "header");
      if (key == "users") ds.vocab.users = val;
      else if (key == "items") ds.vocab.items = val;
      else if (key == "categories") ds.vocab.categories = val;
      else if (key == "authors") ds.vocab.authors = val;
      else format_error(lineno, "header", "unknown key " + key);
    }
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split(line, '\t');
    if (fields.size() != 8) {
      format_error(lineno, "record", "expected 8 tab-separated fields, got " +
                                         std::to_string(fields.size()));
    }
    Sample s;
    s.user = parse_int(fields[0], lineno, "user");
    check_id(s.user, ds.vocab.users, lineno, "user");
    {
      const std::vector<std::string> demo = split(fields[1], ',');
      if (demo.size() != 4) format_error(lineno, "profile", "expected 4 demographic ids");
      s.profile.age_bucket = parse_int(demo[0], lineno, "profile.age");
      s.profile.gender = parse_int(demo[1], lineno, "profile.gender");
      s.profile.location = parse_int(demo[2], lineno, "profile.location");
      s.profile.education = parse_int(demo[3], lineno, "profile.education");
      check_id(s.profile.age_bucket, kAgeBuckets, lineno, "profile.age");
      check_id(s.profile.gender, kGenders, lineno, "profile.gender");
      check_id(s.profile.location, kLocations, lineno, "profile.location");
      check_id(s.profile.education, kEducations, lineno, "profile.education");
    }
    {
      const std::vector<std::string> st = split(fields[2], ',');
      if (st.size() != 2) format_error(lineno, "stats", "expected 2 counters");
      s.profile.items_presented = parse_int(st[0], lineno, "stats.presented");
      s.profile.items_clicked = parse_int(st[1], lineno, "stats.clicked");
      if (s.profile.items_presented < 0 || s.profile.items_clicked < 0) {
        format_error(lineno, "stats", "counters must be non-negative");
      }
    }
    if (fields[3] != "-") {
      for (const std::string& a : split(fields[3], ',')) {
        const std::int64_t id = parse_int(a, lineno, "authors");
        check_id(id, ds.vocab.authors, lineno, "authors");
        s.profile.top_authors.push_back(id);
      }
      if (static_cast<std::int64_t>(s.profile.top_authors.size()) > kTopAuthors) {
        format_error(lineno, "authors", "more than " + std::to_string(kTopAuthors) + " authors");
      }
    }
    if (fields[4] != "-") {
      for (const std::string& tok : split(fields[4], ';')) {
        const std::vector<std::string> parts = split(tok, ':');
        if (parts.size() != 4) format_error(lineno, "lifelong", "expected item:cat:author:wt");
        BehaviorItem b;
        b.item = parse_int(parts[0], lineno, "lifelong.item");
        b.category = parse_int(parts[1], lineno, "lifelong.category");
        b.author = parse_int(parts[2], lineno, "lifelong.author");
        b.watch_time = parse_num(parts[3], lineno, "lifelong.watch_time");
        check_id(b.item, ds.vocab.items, lineno, "lifelong.item");
        check_id(b.category, ds.vocab.categories, lineno, "lifelong.category");
        check_id(b.author, ds.vocab.authors, lineno, "lifelong.author");
        if (!std::isfinite(b.watch_time) || b.watch_time < 0.0) {
          format_error(lineno, "lifelong.watch_time", "must be finite and non-negative");
        }
        s.lifelong.push_back(b);
      }
    }
    if (fields[5] != "-") {
      for (const std::string& tok : split(fields[5], ',')) {
        s.short_indices.push_back(parse_int(tok, lineno, "short"));
      }
      const std::int64_t t = static_cast<std::int64_t>(s.lifelong.size());
      for (std::size_t i = 0; i < s.short_indices.size(); ++i) {
        const std::int64_t expect =
            t - static_cast<std::int64_t>(s.short_indices.size()) + static_cast<std::int64_t>(i);
        if (s.short_indices[i] != expect) {
          format_error(lineno, "short", "indices must form a suffix of the lifelong sequence");
        }
      }
    }
    {
      const std::vector<std::string> cand = split(fields[6], ':');
      if (cand.size() != 3) format_error(lineno, "candidate", "expected item:cat:author");
      s.candidate.item = parse_int(cand[0], lineno, "candidate.item");
      s.candidate.category = parse_int(cand[1], lineno, "candidate.category");
      s.candidate.author = parse_int(cand[2], lineno, "candidate.author");
      check_id(s.candidate.item, ds.vocab.items, lineno, "candidate.item");
      check_id(s.candidate.category, ds.vocab.categories, lineno, "candidate.category");
      check_id(s.candidate.author, ds.vocab.authors, lineno, "candidate.author");
    }
    const std::int64_t y = parse_int(fields[7], lineno, "label");
    if (y != 0 && y != 1) format_error(lineno, "label", "must be 0 or 1");
    s.label = static_cast<int>(y);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::pair<Dataset, Dataset> split_temporal(const Dataset& dataset, double test_fraction) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test fraction must be in [0, 1)");
  }
  std::map<std::int64_t, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    by_user[dataset.samples[i].user].push_back(i);  // file order is temporal per user
  }
  Dataset train, test;
  train.vocab = test.vocab = dataset.vocab;
  const bool carry_truth = dataset.has_truth();
  for (const auto& [user, idx] : by_user) {
    std::int64_t n_test = static_cast<std::int64_t>(
        std::llround(test_fraction * static_cast<double>(idx.size())));
    n_test = std::min<std::int64_t>(n_test, static_cast<std::int64_t>(idx.size()) - 1);
    n_test = std::max<std::int64_t>(n_test, test_fraction > 0.0 && idx.size() > 1 ? 1 : 0);
    const std::size_t cut = idx.size() - static_cast<std::size_t>(n_test);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      Dataset& dst = i < cut ? train : test;
      dst.samples.push_back(dataset.samples[idx[i]]);
      if (carry_truth) dst.truth.push_back(dataset.truth[idx[i]]);
    }
  }
  return {std::move(train), std::move(test)};
}

BatchIterator::BatchIterator(const Dataset& dataset, std::int64_t batch_size, std::uint64_t seed)
    : dataset_(dataset), batch_size_(batch_size), seed_(seed) {
  if (batch_size_ <= 0) {
    throw ConfigError("batch size must be positive, got " + std::to_string(batch_size_));
  }
  order_.resize(dataset_.samples.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<std::int64_t>(i);
}

void BatchIterator::start_epoch(std::int64_t epoch) {
  cursor_ = 0;
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<std::int64_t>(i);
  Rng rng(seed_ ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(epoch + 1)));
  for (std::size_t i = order_.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(order_[i - 1], order_[j]);
  }
}

bool BatchIterator::next(Batch& out) {
  if (cursor_ >= order_.size()) return false;
  out.samples.clear();
  out.max_len = 0;
  const std::size_t end = std::min(cursor_ + static_cast<std::size_t>(batch_size_), order_.size());
  for (std::size_t i = cursor_; i < end; ++i) {
    const Sample& s = dataset_.samples[static_cast<std::size_t>(order_[i])];
    out.samples.push_back(&s);
    out.max_len = std::max<std::int64_t>(out.max_len,
                                         static_cast<std::int64_t>(s.lifelong.size()));
  }
  cursor_ = end;
  return true;
}

std::int64_t BatchIterator::batches_per_epoch() const {
  return static_cast<std::int64_t>(
      (order_.size() + static_cast<std::size_t>(batch_size_) - 1) /
      static_cast<std::size_t>(batch_size_));
}

}  // namespace cain
