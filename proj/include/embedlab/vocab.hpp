#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "embedlab/common.hpp"
#include "embedlab/corpus.hpp"

namespace embedlab {

// Min-count-pruned vocabulary. Ids are dense 0..size()-1, assigned by
// descending corpus frequency with lexicographic tie-break, so builds are
// deterministic.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary from_entries(std::vector<std::pair<std::string, std::uint64_t>> entries,
                                 std::uint32_t min_count) {
    Vocabulary v;
    v.min_count_ = min_count;
    v.words_.reserve(entries.size());
    v.counts_.reserve(entries.size());
    for (auto& [w, c] : entries) {
      v.index_.emplace(w, static_cast<std::uint32_t>(v.words_.size()));
      v.words_.push_back(std::move(w));
      v.counts_.push_back(c);
      v.total_tokens_ += c;
    }
    return v;
  }

  std::uint32_t size() const { return static_cast<std::uint32_t>(words_.size()); }
  bool empty() const { return words_.empty(); }
  const std::string& word(std::uint32_t id) const { return words_[id]; }
  std::uint64_t count(std::uint32_t id) const { return counts_[id]; }
  std::uint32_t min_count() const { return min_count_; }
  std::uint64_t total_tokens() const { return total_tokens_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  std::optional<std::uint32_t> id_of(const std::string& w) const {
    auto it = index_.find(w);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(const std::string& w) const { return index_.count(w) != 0; }

  // Maps tokens to ids, dropping out-of-vocabulary tokens. Pruned words do
  // not occupy window slots downstream.
  void map_sentence(const std::vector<std::string>& tokens,
                    std::vector<std::uint32_t>& out) const {
    out.clear();
    for (const auto& t : tokens) {
      auto it = index_.find(t);
      if (it != index_.end()) out.push_back(it->second);
    }
  }

  // Format: header "#vocab<TAB>size<TAB>min_count", then "word<TAB>count"
  // per entry in id order.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocabulary file: " + path);
    out << "#vocab\t" << size() << '\t' << min_count_ << '\n';
    for (std::uint32_t i = 0; i < size(); ++i)
      out << words_[i] << '\t' << counts_[i] << '\n';
    if (!out) throw IoError("write failure on vocabulary file: " + path);
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocabulary file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path, 1, "empty vocabulary file");
    std::uint64_t declared = 0;
    std::uint32_t min_count = 0;
    {
      auto t1 = line.find('\t');
      auto t2 = (t1 == std::string::npos) ? std::string::npos : line.find('\t', t1 + 1);
      if (line.compare(0, t1, "#vocab") != 0 || t2 == std::string::npos)
        throw ParseError(path, 1, "malformed vocabulary header");
      auto parse_u64 = [&](std::size_t b, std::size_t e, std::uint64_t& v) {
        auto res = std::from_chars(line.data() + b, line.data() + e, v);
        return res.ec == std::errc() && res.ptr == line.data() + e;
      };
      std::uint64_t mc = 0;
      if (!parse_u64(t1 + 1, t2, declared) || !parse_u64(t2 + 1, line.size(), mc))
        throw ParseError(path, 1, "malformed vocabulary header");
      min_count = static_cast<std::uint32_t>(mc);
    }
    std::vector<std::pair<std::string, std::uint64_t>> entries;
    entries.reserve(declared);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw ParseError(path, line_no, "expected word<TAB>count");
      std::uint64_t c = 0;
      auto res = std::from_chars(line.data() + tab + 1, line.data() + line.size(), c);
      if (res.ec != std::errc() || res.ptr != line.data() + line.size())
        throw ParseError(path, line_no, "malformed count");
      entries.emplace_back(line.substr(0, tab), c);
    }
    if (entries.size() != declared)
      throw ParseError(path, line_no, "entry count does not match header");
    Vocabulary v = from_entries(std::move(entries), min_count);
    if (v.index_.size() != v.words_.size())
      throw ParseError(path, line_no, "duplicate word in vocabulary file");
    return v;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::uint32_t min_count_ = 1;
  std::uint64_t total_tokens_ = 0;
};

// Keeps exactly the words with frequency >= min_count. An empty corpus gives
// an empty vocabulary, not an error.
template <class SentenceSource>
Vocabulary build_vocabulary(SentenceSource& src, std::uint32_t min_count) {
  if (min_count < 1) throw Error("min_count must be >= 1");
  std::unordered_map<std::string, std::uint64_t> freq;
  std::vector<std::string> sent;
  while (src.next(sent))
    for (const auto& t : sent) ++freq[t];

  std::vector<std::pair<std::string, std::uint64_t>> entries;
  entries.reserve(freq.size());
  for (auto& [w, c] : freq)
    if (c >= min_count) entries.emplace_back(w, c);
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return Vocabulary::from_entries(std::move(entries), min_count);
}

inline Vocabulary build_vocabulary_file(const std::string& path, std::uint32_t min_count,
                                        const TokenizerConfig& cfg = {}) {
  FileRangeSentences src(path, cfg);
  return build_vocabulary(src, min_count);
}

// Keep-probability for frequent-word subsampling, min(1, sqrt(t/f) + t/f)
// with f the word's relative frequency. Off by default in the trainer.
inline double subsample_keep_probability(std::uint64_t count, std::uint64_t total_tokens,
                                         double threshold) {
  if (threshold <= 0 || count == 0 || total_tokens == 0) return 1.0;
  double f = static_cast<double>(count) / static_cast<double>(total_tokens);
  double p = std::sqrt(threshold / f) + threshold / f;
  return p < 1.0 ? p : 1.0;
}

// Draws word ids with probability proportional to count^power (0.75 by
// default). Immutable after construction; draws take the caller's Rng, so
// concurrent workers each keep their own stream. Alias method, O(1) a draw.
class NegativeSampler {
 public:
  NegativeSampler(const Vocabulary& vocab, double power = 0.75, std::uint64_t seed = 1)
      : power_(power), seed_(seed) {
    if (vocab.empty()) throw Error("negative sampler: empty vocabulary");
    if (power < 0) throw Error("negative sampler: power must be >= 0");
    const std::uint32_t n = vocab.size();
    probs_.resize(n);
    double z = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
      probs_[i] = std::pow(static_cast<double>(vocab.count(i)), power);
      z += probs_[i];
    }
    for (auto& p : probs_) p /= z;
    build_alias();
  }

  std::uint32_t size() const { return static_cast<std::uint32_t>(probs_.size()); }
  double probability(std::uint32_t id) const { return probs_[id]; }
  const std::vector<double>& distribution() const { return probs_; }
  double power() const { return power_; }
  std::uint64_t seed() const { return seed_; }

  std::uint32_t draw(Rng& rng) const {
    std::uint32_t i = rng.below(size());
    return rng.next_double() < accept_[i] ? i : alias_[i];
  }

  // n draws, redrawing anything equal to `forbidden`; the returned ids follow
  // the sampler distribution renormalized over V minus the forbidden word.
  void sample_negatives(std::uint32_t n, std::uint32_t forbidden, Rng& rng,
                        std::vector<std::uint32_t>& out) const {
    if (size() < 2) throw Error("negative sampler: need vocabulary size >= 2 to exclude");
    out.clear();
    out.reserve(n);
    while (out.size() < n) {
      std::uint32_t id = draw(rng);
      if (id != forbidden) out.push_back(id);
    }
  }

  std::vector<std::uint32_t> sample_negatives(std::uint32_t n, std::uint32_t forbidden,
                                              Rng& rng) const {
    std::vector<std::uint32_t> out;
    sample_negatives(n, forbidden, rng, out);
    return out;
  }

 private:
  void build_alias() {
    const std::uint32_t n = size();
    accept_.assign(n, 1.0);
    alias_.assign(n, 0);
    std::vector<double> scaled(n);
    std::vector<std::uint32_t> small, large;
    for (std::uint32_t i = 0; i < n; ++i) {
      scaled[i] = probs_[i] * n;
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      std::uint32_t s = small.back(), l = large.back();
      small.pop_back();
      large.pop_back();
      accept_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] -= 1.0 - scaled[s];
      (scaled[l] < 1.0 ? small : large).push_back(l);
    }
    // leftovers are 1 up to rounding
    for (std::uint32_t i : small) accept_[i] = 1.0;
    for (std::uint32_t i : large) accept_[i] = 1.0;
  }

  std::vector<double> probs_;
  std::vector<double> accept_;
  std::vector<std::uint32_t> alias_;
  double power_;
  std::uint64_t seed_;
};

}  // namespace embedlab
