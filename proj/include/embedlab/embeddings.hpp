#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "embedlab/common.hpp"
#include "embedlab/vocab.hpp"

namespace embedlab {

struct Neighbor {
  std::string word;
  double cosine;
};

// A trained (or loaded) embedding space: the vocabulary plus the input-side
// vectors, with a row-normalized copy for similarity queries. Immutable after
// construction, safe for shared concurrent reads. Rows with zero norm are
// flagged and never appear as query results.
class EmbeddingSpace {
 public:
  EmbeddingSpace() = default;

  EmbeddingSpace(Vocabulary vocab, MatF vectors)
      : vocab_(std::move(vocab)), vectors_(std::move(vectors)) {
    if (vectors_.rows != vocab_.size())
      throw Error("embedding space: vector rows do not match vocabulary size");
    build_unit_cache();
  }

  const Vocabulary& vocab() const { return vocab_; }
  const MatF& vectors() const { return vectors_; }
  const MatF& unit_vectors() const { return unit_; }
  std::uint32_t size() const { return vectors_.rows; }
  std::uint32_t dim() const { return vectors_.cols; }
  bool is_zero_row(std::uint32_t id) const { return zero_rows_[id] != 0; }
  std::uint32_t zero_vector_count() const { return zero_count_; }

  std::uint32_t require_id(const std::string& w) const {
    auto id = vocab_.id_of(w);
    if (!id) throw OovError(w);
    return *id;
  }

 private:
  void build_unit_cache() {
    unit_ = MatF(vectors_.rows, vectors_.cols);
    zero_rows_.assign(vectors_.rows, 0);
    for (std::uint32_t r = 0; r < vectors_.rows; ++r) {
      const float* src = vectors_.row(r);
      double n2 = 0;
      for (std::uint32_t c = 0; c < vectors_.cols; ++c)
        n2 += double(src[c]) * double(src[c]);
      float* dst = unit_.row(r);
      if (n2 == 0) {
        zero_rows_[r] = 1;
        ++zero_count_;
        continue;  // zero rows stay zero and are flagged
      }
      float inv = static_cast<float>(1.0 / std::sqrt(n2));
      for (std::uint32_t c = 0; c < vectors_.cols; ++c) dst[c] = src[c] * inv;
    }
  }

  Vocabulary vocab_;
  MatF vectors_;
  MatF unit_;
  std::vector<std::uint8_t> zero_rows_;
  std::uint32_t zero_count_ = 0;
};

inline double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * double(b[i]);
    na += double(a[i]) * double(a[i]);
    nb += double(b[i]) * double(b[i]);
  }
  if (na == 0 || nb == 0) return 0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double cosine(const EmbeddingSpace& space, const std::string& u,
                     const std::string& v) {
  std::uint32_t iu = space.require_id(u);
  std::uint32_t iv = space.require_id(v);
  if (space.is_zero_row(iu)) throw DegenerateVectorError(u);
  if (space.is_zero_row(iv)) throw DegenerateVectorError(v);
  const std::uint32_t d = space.dim();
  return cosine({space.vectors().row(iu), d}, {space.vectors().row(iv), d});
}

// Exhaustive scan over the vocabulary: the k highest-cosine words not in
// `exclude`, descending cosine, ties broken by ascending word id. Zero rows
// never appear. Asking for more than is available returns what there is.
inline std::vector<Neighbor> nearest_neighbors(
    const EmbeddingSpace& space, std::span<const float> query_vector, std::size_t k,
    const std::unordered_set<std::uint32_t>& exclude_ids = {}) {
  if (k < 1) throw Error("nearest_neighbors: k must be >= 1");
  if (query_vector.size() != space.dim())
    throw Error("nearest_neighbors: query vector has wrong dimension");

  double qn2 = 0;
  for (float x : query_vector) qn2 += double(x) * double(x);
  const double qinv = qn2 > 0 ? 1.0 / std::sqrt(qn2) : 0.0;

  std::vector<std::pair<double, std::uint32_t>> scored;  // (cosine, id)
  scored.reserve(space.size());
  const MatF& unit = space.unit_vectors();
  for (std::uint32_t id = 0; id < space.size(); ++id) {
    if (space.is_zero_row(id) || exclude_ids.count(id)) continue;
    const float* u = unit.row(id);
    double dot = 0;
    for (std::uint32_t c = 0; c < space.dim(); ++c)
      dot += double(u[c]) * double(query_vector[c]);
    scored.emplace_back(dot * qinv, id);
  }

  auto better = [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  if (k < scored.size()) {
    std::partial_sort(scored.begin(), scored.begin() + k, scored.end(), better);
    scored.resize(k);
  } else {
    std::sort(scored.begin(), scored.end(), better);
  }

  std::vector<Neighbor> out;
  out.reserve(scored.size());
  for (const auto& [cos, id] : scored) out.push_back({space.vocab().word(id), cos});
  return out;
}

inline std::vector<Neighbor> nearest_neighbors(const EmbeddingSpace& space,
                                               const std::string& word, std::size_t k,
                                               const std::unordered_set<std::string>& exclude = {}) {
  std::uint32_t id = space.require_id(word);
  std::unordered_set<std::uint32_t> ex;
  for (const auto& w : exclude) {
    auto i = space.vocab().id_of(w);
    if (i) ex.insert(*i);
  }
  return nearest_neighbors(space, {space.vectors().row(id), space.dim()}, k, ex);
}

// ---------------------------------------------------------------------------
// word2vec text format: header "<V> <dim>", then one word and dim reals per
// line, space separated. Values are printed with 6 significant digits; the
// binary sidecar below is the lossless route.
// ---------------------------------------------------------------------------

inline void save_text(const EmbeddingSpace& space, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vectors file: " + path);
  out << space.size() << ' ' << space.dim() << '\n';
  char buf[64];
  for (std::uint32_t r = 0; r < space.size(); ++r) {
    out << space.vocab().word(r);
    const float* row = space.vectors().row(r);
    for (std::uint32_t c = 0; c < space.dim(); ++c) {
      std::snprintf(buf, sizeof(buf), " %.6g", double(row[c]));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failure on vectors file: " + path);
}

inline EmbeddingSpace load_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vectors file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path, 1, "empty vectors file");

  std::uint64_t rows = 0, dim = 0;
  {
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto r1 = std::from_chars(p, end, rows);
    if (r1.ec != std::errc() || r1.ptr == end || *r1.ptr != ' ')
      throw ParseError(path, 1, "malformed header, expected '<count> <dim>'");
    auto r2 = std::from_chars(r1.ptr + 1, end, dim);
    if (r2.ec != std::errc() || r2.ptr != end)
      throw ParseError(path, 1, "malformed header, expected '<count> <dim>'");
    if (dim < 1) throw ParseError(path, 1, "dimension must be >= 1");
  }

  MatF vectors(static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(dim));
  std::vector<std::pair<std::string, std::uint64_t>> entries;
  entries.reserve(rows);
  std::unordered_set<std::string> seen;
  seen.reserve(rows);

  std::size_t line_no = 1;
  std::uint64_t r = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (r >= rows) throw ParseError(path, line_no, "more rows than the header declares");
    const char* p = line.data();
    const char* end = line.data() + line.size();
    const char* sp = static_cast<const char*>(std::memchr(p, ' ', line.size()));
    if (!sp || sp == p) throw ParseError(path, line_no, "expected '<word> <values...>'");
    std::string word(p, sp);
    if (!seen.insert(word).second)
      throw ParseError(path, line_no, "duplicate word '" + word + "'");
    float* row = vectors.row(static_cast<std::uint32_t>(r));
    const char* cur = sp;
    for (std::uint64_t c = 0; c < dim; ++c) {
      if (cur == end || *cur != ' ')
        throw ParseError(path, line_no, "expected " + std::to_string(dim) +
                                            " values, found " + std::to_string(c));
      ++cur;
      float v = 0;
      auto res = std::from_chars(cur, end, v);
      if (res.ec != std::errc())
        throw ParseError(path, line_no, "malformed value in column " + std::to_string(c + 1));
      if (!std::isfinite(v))
        throw ParseError(path, line_no, "non-finite value in column " + std::to_string(c + 1));
      row[c] = v;
      cur = res.ptr;
    }
    if (cur != end)
      throw ParseError(path, line_no, "row has more than " + std::to_string(dim) + " values");
    entries.emplace_back(std::move(word), 0);
    ++r;
  }
  if (r != rows)
    throw ParseError(path, line_no, "header declares " + std::to_string(rows) +
                                        " rows, file has " + std::to_string(r));
  // counts are unknown for externally produced files
  Vocabulary vocab = Vocabulary::from_entries(std::move(entries), 0);
  if (vocab.size() != rows) throw ParseError(path, line_no, "duplicate words in file");
  return EmbeddingSpace(std::move(vocab), std::move(vectors));
}

// ---------------------------------------------------------------------------
// Binary sidecar (.vecbin): "EMBL" magic, u32 version, u64 rows, u32 dim,
// length-prefixed words, then rows*dim raw little-endian float32. Bit-exact
// round trips between runs.
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little,
              "vecbin i/o assumes a little-endian host");
static_assert(sizeof(float) == 4, "vecbin i/o assumes 32-bit IEEE floats");

inline void save_vecbin(const EmbeddingSpace& space, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vecbin file: " + path);
  auto put = [&](const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  };
  put("EMBL", 4);
  std::uint32_t version = 1;
  std::uint64_t rows = space.size();
  std::uint32_t dim = space.dim();
  put(&version, 4);
  put(&rows, 8);
  put(&dim, 4);
  for (std::uint32_t r = 0; r < space.size(); ++r) {
    const std::string& w = space.vocab().word(r);
    std::uint32_t len = static_cast<std::uint32_t>(w.size());
    put(&len, 4);
    put(w.data(), w.size());
  }
  put(space.vectors().data.data(), space.vectors().data.size() * sizeof(float));
  if (!out) throw IoError("write failure on vecbin file: " + path);
}

inline EmbeddingSpace load_vecbin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vecbin file: " + path);
  auto get = [&](void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw Error("vecbin file truncated: " + path);
  };
  char magic[4];
  get(magic, 4);
  if (std::memcmp(magic, "EMBL", 4) != 0)
    throw Error("not a vecbin file (bad magic): " + path);
  std::uint32_t version = 0, dim = 0;
  std::uint64_t rows = 0;
  get(&version, 4);
  if (version != 1) throw Error("unsupported vecbin version " + std::to_string(version));
  get(&rows, 8);
  get(&dim, 4);
  if (dim < 1) throw Error("vecbin dimension must be >= 1: " + path);

  std::vector<std::pair<std::string, std::uint64_t>> entries;
  entries.reserve(rows);
  for (std::uint64_t r = 0; r < rows; ++r) {
    std::uint32_t len = 0;
    get(&len, 4);
    std::string w(len, '\0');
    if (len) get(w.data(), len);
    entries.emplace_back(std::move(w), 0);
  }
  MatF vectors(static_cast<std::uint32_t>(rows), dim);
  get(vectors.data.data(), vectors.data.size() * sizeof(float));
  Vocabulary vocab = Vocabulary::from_entries(std::move(entries), 0);
  if (vocab.size() != rows) throw Error("duplicate words in vecbin file: " + path);
  return EmbeddingSpace(std::move(vocab), std::move(vectors));
}

}  // namespace embedlab
