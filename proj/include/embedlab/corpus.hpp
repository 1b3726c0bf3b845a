#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "embedlab/common.hpp"

namespace embedlab {

// ---------------------------------------------------------------------------
// UTF-8 handling
//
// The tokenizer recognizes letters from the Latin blocks only:
//   ASCII a-z A-Z, Latin-1 Supplement (U+00C0..U+00FF minus the multiply and
//   divide signs) and Latin Extended-A/B (U+0100..U+024F).
// Everything else (digits, punctuation, symbols, non-Latin scripts) separates
// tokens and is discarded. Case folding covers ASCII, Latin-1 and Extended-A;
// Extended-B codepoints pass through unchanged, so folding is idempotent.
// ---------------------------------------------------------------------------

struct Utf8Char {
  char32_t cp = 0;
  int len = 0;  // bytes consumed; 0 = malformed sequence
};

inline Utf8Char decode_utf8(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1};
  auto cont = [&](std::size_t k) {
    return i + k < s.size() &&
           (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  auto cb = [&](std::size_t k) {
    return static_cast<char32_t>(static_cast<unsigned char>(s[i + k]) & 0x3F);
  };
  if ((b0 & 0xE0) == 0xC0) {
    if (!cont(1)) return {0, 0};
    char32_t cp = (char32_t(b0 & 0x1F) << 6) | cb(1);
    if (cp < 0x80) return {0, 0};  // overlong
    return {cp, 2};
  }
  if ((b0 & 0xF0) == 0xE0) {
    if (!cont(1) || !cont(2)) return {0, 0};
    char32_t cp = (char32_t(b0 & 0x0F) << 12) | (cb(1) << 6) | cb(2);
    if (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF)) return {0, 0};
    return {cp, 3};
  }
  if ((b0 & 0xF8) == 0xF0) {
    if (!cont(1) || !cont(2) || !cont(3)) return {0, 0};
    char32_t cp = (char32_t(b0 & 0x07) << 18) | (cb(1) << 12) | (cb(2) << 6) | cb(3);
    if (cp < 0x10000 || cp > 0x10FFFF) return {0, 0};
    return {cp, 4};
  }
  return {0, 0};
}

inline void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline bool is_letter_cp(char32_t cp) {
  if ((cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z')) return true;
  if (cp >= 0xC0 && cp <= 0xFF) return cp != 0xD7 && cp != 0xF7;
  return cp >= 0x100 && cp <= 0x24F;
}

inline char32_t lower_cp(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp == 0x178) return 0xFF;  // Y with diaeresis
  if (cp >= 0x100 && cp <= 0x137 && (cp & 1) == 0) return cp + 1;
  if (cp >= 0x139 && cp <= 0x148 && (cp & 1) == 1) return cp + 1;
  if (cp >= 0x14A && cp <= 0x177 && (cp & 1) == 0) return cp + 1;
  if (cp >= 0x179 && cp <= 0x17E && (cp & 1) == 1) return cp + 1;
  return cp;
}

// Lowercases well-formed sequences, leaves malformed bytes untouched.
inline std::string lowercase_utf8(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    Utf8Char c = decode_utf8(s, i);
    if (c.len == 0) {
      out.push_back(s[i]);
      ++i;
      continue;
    }
    encode_utf8(lower_cp(c.cp), out);
    i += c.len;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

enum class TokenRule {
  letter_runs,  // maximal letter runs, apostrophes kept when letter-flanked
  whitespace,   // split on ASCII whitespace, no other filtering
};

struct TokenizerConfig {
  bool lowercase = true;
  TokenRule token_pattern = TokenRule::letter_runs;
};

// A token is a maximal run of letters; an ASCII apostrophe joins two letters
// ("dell'acqua"). Digits and punctuation end the run and are dropped. A
// malformed UTF-8 byte glues onto the surrounding run and poisons it: the
// whole run is discarded, the stream continues.
inline void tokenize_into(std::string_view line, const TokenizerConfig& cfg,
                          std::vector<std::string>& out) {
  out.clear();
  if (cfg.token_pattern == TokenRule::whitespace) {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' ||
                                 line[i] == '\r' || line[i] == '\v' || line[i] == '\f'))
        ++i;
      std::size_t j = i;
      while (j < line.size() && !(line[j] == ' ' || line[j] == '\t' ||
                                  line[j] == '\r' || line[j] == '\v' || line[j] == '\f'))
        ++j;
      if (j > i) {
        std::string t(line.substr(i, j - i));
        if (cfg.lowercase) t = lowercase_utf8(t);
        out.push_back(std::move(t));
      }
      i = j;
    }
    return;
  }

  std::string token;
  bool poisoned = false;
  auto flush = [&] {
    if (!token.empty() && !poisoned) out.push_back(token);
    token.clear();
    poisoned = false;
  };

  std::size_t i = 0;
  const std::size_t n = line.size();
  while (i < n) {
    Utf8Char c = decode_utf8(line, i);
    if (c.len == 0) {
      poisoned = true;
      ++i;
      continue;
    }
    if (is_letter_cp(c.cp)) {
      encode_utf8(cfg.lowercase ? lower_cp(c.cp) : c.cp, token);
      i += c.len;
      continue;
    }
    if (c.cp == U'\'' && (!token.empty() || poisoned)) {
      Utf8Char nx = (i + 1 < n) ? decode_utf8(line, i + 1) : Utf8Char{};
      if (nx.len != 0 && is_letter_cp(nx.cp)) {
        token.push_back('\'');
        ++i;
        continue;
      }
    }
    flush();
    i += c.len;
  }
  flush();
}

inline std::vector<std::string> tokenize(std::string_view line,
                                         const TokenizerConfig& cfg = {}) {
  std::vector<std::string> out;
  tokenize_into(line, cfg, out);
  return out;
}

// ---------------------------------------------------------------------------
// Sentence streaming
//
// One sentence per line. Lines that yield no tokens are skipped, so a
// "sentence" is by definition nonempty. Memory is bounded by the longest
// line.
// ---------------------------------------------------------------------------

class SentenceStream {
 public:
  SentenceStream(std::istream& in, TokenizerConfig cfg = {})
      : in_(&in), cfg_(cfg) {
    if (!in.good()) throw IoError("sentence stream: source not readable");
  }

  bool next(std::vector<std::string>& out) {
    std::string line;
    while (std::getline(*in_, line)) {
      tokenize_into(line, cfg_, out);
      if (!out.empty()) return true;
    }
    return false;
  }

 private:
  std::istream* in_;
  TokenizerConfig cfg_;
};

// Streams the lines of a file whose first byte lies in [begin, end).
// Distinct ranges over the same file partition it without overlap, which is
// what the parallel trainer relies on.
class FileRangeSentences {
 public:
  explicit FileRangeSentences(const std::string& path, TokenizerConfig cfg = {},
                              std::uint64_t begin = 0,
                              std::uint64_t end = UINT64_MAX)
      : in_(path, std::ios::binary), cfg_(cfg), pos_(begin), end_(end) {
    if (!in_) throw IoError("cannot open corpus file: " + path);
    if (begin > 0) {
      // A line belongs to the range holding its first byte. If the byte just
      // before `begin` is a newline, the line starting at `begin` is ours.
      in_.seekg(static_cast<std::streamoff>(begin - 1));
      char prev = 0;
      in_.get(prev);
      if (in_ && prev != '\n') {
        std::string skipped;
        std::getline(in_, skipped);
        pos_ += skipped.size() + 1;
      }
    }
  }

  bool next(std::vector<std::string>& out) {
    std::string line;
    while (pos_ < end_ && std::getline(in_, line)) {
      pos_ += line.size() + 1;
      tokenize_into(line, cfg_, out);
      if (!out.empty()) return true;
    }
    return false;
  }

 private:
  std::ifstream in_;
  TokenizerConfig cfg_;
  std::uint64_t pos_;
  std::uint64_t end_;
};

// Adapter so in-memory token sequences satisfy the sentence-source shape.
class VectorSentenceSource {
 public:
  explicit VectorSentenceSource(std::vector<std::vector<std::string>> sentences)
      : sentences_(std::move(sentences)) {}

  bool next(std::vector<std::string>& out) {
    if (i_ >= sentences_.size()) return false;
    out = sentences_[i_++];
    return true;
  }

  void reset() { i_ = 0; }

 private:
  std::vector<std::vector<std::string>> sentences_;
  std::size_t i_ = 0;
};

struct CorpusStats {
  std::uint64_t sentence_count = 0;
  std::uint64_t token_count = 0;
};

template <class SentenceSource>
CorpusStats corpus_stats(SentenceSource& src) {
  CorpusStats st;
  std::vector<std::string> sent;
  while (src.next(sent)) {
    st.sentence_count += 1;
    st.token_count += sent.size();
  }
  return st;
}

inline CorpusStats corpus_stats(std::istream& in, const TokenizerConfig& cfg = {}) {
  SentenceStream s(in, cfg);
  return corpus_stats(s);
}

inline CorpusStats corpus_stats_file(const std::string& path,
                                     const TokenizerConfig& cfg = {}) {
  FileRangeSentences s(path, cfg);
  return corpus_stats(s);
}

inline std::uint64_t file_size_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open file: " + path);
  return static_cast<std::uint64_t>(in.tellg());
}

// Approximate sentence splitter for raw paragraph text: breaks after
// ". ", "! " and "? ". Abbreviations and ellipses will oversplit; corpora
// prepared elsewhere should arrive already one sentence per line.
inline std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  auto trim = [](std::string_view v) {
    std::size_t b = 0, e = v.size();
    while (b < e && (v[b] == ' ' || v[b] == '\t' || v[b] == '\r')) ++b;
    while (e > b && (v[e - 1] == ' ' || v[e - 1] == '\t' || v[e - 1] == '\r')) --e;
    return v.substr(b, e - b);
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i + 1 < text.size(); ++i) {
    char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && text[i + 1] == ' ') {
      auto piece = trim(text.substr(start, i + 1 - start));
      if (!piece.empty()) out.emplace_back(piece);
      start = i + 2;
    }
  }
  auto tail = trim(text.substr(start));
  if (!tail.empty()) out.emplace_back(tail);
  return out;
}

}  // namespace embedlab
