#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "embedlab/analogy.hpp"
#include "embedlab/common.hpp"

namespace embedlab {

// Error-analysis functions over the persisted outcomes of one or more
// evaluations. A "failure" is any non-correct question: wrong predictions
// and not-given answers both count, so becoming answerable under a better
// parametrization shows up as a solved error.

namespace detail {

inline void require_same_suite(const EvalRun& a, const EvalRun& b) {
  if (a.report.suite_hash != b.report.suite_hash ||
      a.report.suite_questions != b.report.suite_questions)
    throw Error("analysis: evaluations ran on different suites");
}

}  // namespace detail

struct ErrorSummary {
  std::uint64_t total_errors = 0;           // wrong predictions only
  std::uint64_t distinct_expected_words = 0;
  // (expected word b*, failure count), descending count, ties by word
  std::vector<std::pair<std::string, std::uint64_t>> ranked_error_words;
};

// Frequency table of wrong answers keyed by the expected word. not_given
// records are excluded here; they are coverage, not prediction errors.
inline ErrorSummary summarize_errors(std::span<const ErrorRecord> records) {
  std::unordered_map<std::string, std::uint64_t> freq;
  std::uint64_t total = 0;
  for (const auto& r : records) {
    if (r.outcome != Outcome::wrong) continue;
    ++freq[r.question.b_star];
    ++total;
  }
  ErrorSummary s;
  s.total_errors = total;
  s.ranked_error_words.assign(freq.begin(), freq.end());
  std::sort(s.ranked_error_words.begin(), s.ranked_error_words.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  s.distinct_expected_words = s.ranked_error_words.size();
  return s;
}

inline ErrorSummary summarize_errors(const EvalRun& run) {
  return summarize_errors(std::span<const ErrorRecord>(run.records));
}

// Questions failed (wrong or not given) in `base` and answered correctly in
// `improved`. Both evaluations must come from the same suite; a question
// absent from an evaluation's records was answered correctly there.
inline std::vector<AnalogyQuestion> solved_errors(const EvalRun& base,
                                                  const EvalRun& improved) {
  detail::require_same_suite(base, improved);
  std::unordered_set<std::string> still_failing;
  still_failing.reserve(improved.records.size());
  for (const auto& r : improved.records) still_failing.insert(r.question.key());

  std::vector<AnalogyQuestion> out;
  std::unordered_set<std::string> emitted;
  for (const auto& r : base.records) {
    std::string key = r.question.key();
    if (still_failing.count(key) || !emitted.insert(key).second) continue;
    out.push_back(r.question);
  }
  return out;
}

// Expected words that every parametrization failed on: the intersection of
// the per-evaluation distinct expected-word lists. Sorted for stable output.
inline std::vector<std::string> always_wrong(std::span<const EvalRun> runs) {
  if (runs.empty()) throw Error("always_wrong: need at least one record set");
  for (std::size_t i = 1; i < runs.size(); ++i)
    detail::require_same_suite(runs[0], runs[i]);

  std::unordered_set<std::string> acc;
  for (const auto& r : runs[0].records) acc.insert(r.question.b_star);
  for (std::size_t i = 1; i < runs.size() && !acc.empty(); ++i) {
    std::unordered_set<std::string> here;
    for (const auto& r : runs[i].records) here.insert(r.question.b_star);
    for (auto it = acc.begin(); it != acc.end();)
      it = here.count(*it) ? std::next(it) : acc.erase(it);
  }
  std::vector<std::string> out(acc.begin(), acc.end());
  std::sort(out.begin(), out.end());
  return out;
}

struct TopkRecovery {
  std::uint64_t errors = 0;    // wrong records considered
  std::uint64_t in_topk = 0;   // b* found at ranks 2..k
  std::uint64_t at_rank2 = 0;  // b* found at exactly rank 2
  double fraction_in_topk = 0.0;
  std::optional<double> fraction_at_rank2;  // among those in top k
};

// How often the correct answer hides just below the top of the ranking.
inline TopkRecovery topk_recovery(std::span<const ErrorRecord> records, std::size_t k,
                                  std::size_t stored_topk) {
  if (k < 2) throw Error("topk_recovery: k must be >= 2");
  if (k > stored_topk)
    throw Error("topk_recovery: k=" + std::to_string(k) +
                " exceeds the stored ranking depth " + std::to_string(stored_topk));
  TopkRecovery t;
  for (const auto& r : records) {
    if (r.outcome != Outcome::wrong) continue;
    t.errors += 1;
    std::size_t limit = std::min(k, r.top5.size());
    for (std::size_t rank = 2; rank <= limit; ++rank) {
      if (r.top5[rank - 1].first == r.question.b_star) {
        t.in_topk += 1;
        if (rank == 2) t.at_rank2 += 1;
        break;
      }
    }
  }
  if (t.errors) t.fraction_in_topk = static_cast<double>(t.in_topk) / t.errors;
  if (t.in_topk) t.fraction_at_rank2 = static_cast<double>(t.at_rank2) / t.in_topk;
  return t;
}

inline TopkRecovery topk_recovery(const EvalRun& run, std::size_t k) {
  return topk_recovery(std::span<const ErrorRecord>(run.records), k, run.report.top_k);
}

}  // namespace embedlab
