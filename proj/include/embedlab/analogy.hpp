#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "embedlab/common.hpp"
#include "embedlab/corpus.hpp"
#include "embedlab/embeddings.hpp"

namespace embedlab {

enum class QuestionKind { morphosyntactic, semantic };

inline const char* kind_name(QuestionKind k) {
  return k == QuestionKind::morphosyntactic ? "morphosyntactic" : "semantic";
}

// a : a* :: b : b*, asking for b*.
struct AnalogyQuestion {
  std::string a, a_star, b, b_star;
  std::string category;
  QuestionKind kind = QuestionKind::semantic;

  bool operator==(const AnalogyQuestion& o) const {
    return a == o.a && a_star == o.a_star && b == o.b && b_star == o.b_star &&
           category == o.category;
  }

  std::string key() const {
    return a + '\x1f' + a_star + '\x1f' + b + '\x1f' + b_star + '\x1f' + category;
  }
};

struct CategoryInfo {
  std::string name;
  QuestionKind kind;
  std::uint32_t count = 0;
};

struct AnalogySuite {
  std::vector<AnalogyQuestion> questions;
  std::vector<CategoryInfo> categories;
  std::uint64_t hash = 0;  // content fingerprint, used to detect suite mismatches
};

// ---------------------------------------------------------------------------
// Category -> kind table. Covers the canonical relation names (13
// morphosyntactic, the rest semantic) plus their gramN- prefixed spellings.
// Unknown names fall back to a heuristic unless strict mode is on: a gramN-
// prefix means morphosyntactic, anything else semantic.
// ---------------------------------------------------------------------------

inline std::string normalize_category(std::string_view raw) {
  std::string s = lowercase_utf8(raw);
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '(' || c == ')') continue;
    if (c == ' ' || c == '\t' || c == '_') c = '-';
    if (c == '-' && (out.empty() || out.back() == '-')) continue;
    out.push_back(c);
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

inline std::optional<QuestionKind> kind_from_table(const std::string& normalized) {
  static const char* kSemantic[] = {
      "capital-common-countries", "capital-world", "currency", "city-in-state",
      "regione-capoluogo", "family",
  };
  static const char* kMorph[] = {
      "adjective-to-adverb", "opposite", "comparative", "superlative",
      "present-participle", "nationality-adjective", "past-tense",
      "plural-verbs", "plural", "remote-past-verbs",
      "noun-masculine-feminine-singular", "noun-masculine-feminine-plural",
  };
  std::string name = normalized;
  if (name.size() > 5 && name.compare(0, 4, "gram") == 0) {
    std::size_t i = 4;
    while (i < name.size() && name[i] >= '0' && name[i] <= '9') ++i;
    if (i > 4 && i < name.size() && name[i] == '-') name = name.substr(i + 1);
  }
  for (const char* k : kSemantic)
    if (name.compare(0, std::string::traits_type::length(k), k) == 0)
      return QuestionKind::semantic;
  for (const char* k : kMorph)
    if (name.compare(0, std::string::traits_type::length(k), k) == 0)
      return QuestionKind::morphosyntactic;
  return std::nullopt;
}

struct SuiteOptions {
  bool strict_kinds = false;  // error on categories missing from the kind table
};

// Google analogy text format: ": category-name" section headers followed by
// four whitespace-separated words per line. Words are lowercased on read.
inline AnalogySuite parse_suite(const std::string& path, const SuiteOptions& opts = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open analogy suite: " + path);

  AnalogySuite suite;
  std::unordered_map<std::string, std::size_t> cat_index;
  std::int64_t current = -1;
  QuestionKind current_kind = QuestionKind::semantic;
  std::string current_name;

  std::string line;
  std::size_t line_no = 0;
  std::uint64_t h = kFnvBasis;
  std::vector<std::string> fields;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == ':') {
      std::string name = std::string(line.substr(1));
      std::size_t b = name.find_first_not_of(" \t");
      std::size_t e = name.find_last_not_of(" \t");
      if (b == std::string::npos) throw ParseError(path, line_no, "empty category name");
      name = name.substr(b, e - b + 1);
      auto kind = kind_from_table(normalize_category(name));
      if (!kind) {
        if (opts.strict_kinds)
          throw ParseError(path, line_no,
                           "category '" + name + "' is not in the kind table");
        std::string norm = normalize_category(name);
        kind = (norm.compare(0, 4, "gram") == 0) ? QuestionKind::morphosyntactic
                                                 : QuestionKind::semantic;
      }
      current_name = name;
      current_kind = *kind;
      auto it = cat_index.find(name);
      if (it == cat_index.end()) {
        cat_index.emplace(name, suite.categories.size());
        current = static_cast<std::int64_t>(suite.categories.size());
        suite.categories.push_back({name, *kind, 0});
      } else {
        current = static_cast<std::int64_t>(it->second);
      }
      continue;
    }
    fields.clear();
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      if (j > i) fields.push_back(line.substr(i, j - i));
      i = j;
    }
    if (fields.empty()) continue;
    if (current < 0)
      throw ParseError(path, line_no, "question before any ': category' header");
    if (fields.size() != 4)
      throw ParseError(path, line_no, "expected 4 words, found " +
                                          std::to_string(fields.size()));
    AnalogyQuestion q;
    q.a = lowercase_utf8(fields[0]);
    q.a_star = lowercase_utf8(fields[1]);
    q.b = lowercase_utf8(fields[2]);
    q.b_star = lowercase_utf8(fields[3]);
    q.category = current_name;
    q.kind = current_kind;
    std::string key = q.key();
    h = fnv1a(h, key.data(), key.size());
    h = fnv1a(h, "\x1e", 1);
    suite.categories[static_cast<std::size_t>(current)].count += 1;
    suite.questions.push_back(std::move(q));
  }
  suite.hash = h;
  return suite;
}

// ---------------------------------------------------------------------------
// Answer methods
// ---------------------------------------------------------------------------

enum class MethodKind { cosadd, cosmul };

inline const char* method_name(MethodKind m) {
  return m == MethodKind::cosadd ? "cosadd" : "cosmul";
}

inline MethodKind method_from_name(const std::string& s) {
  if (s == "cosadd" || s == "3cosadd") return MethodKind::cosadd;
  if (s == "cosmul" || s == "3cosmul") return MethodKind::cosmul;
  throw Error("unknown analogy method: '" + s + "' (expected cosadd or cosmul)");
}

struct MethodConfig {
  MethodKind method = MethodKind::cosadd;
  double epsilon = 0.001;  // cosmul only; keeps the denominator positive
  bool exclude_queries = true;
};

struct RankedCandidate {
  std::uint32_t id;
  std::string word;
  double score;
};

namespace detail {

// Shared candidate scan: scores every non-zero row outside the exclusion
// set, returns the top k by (score desc, id asc).
template <class ScoreFn>
std::vector<RankedCandidate> top_candidates(const EmbeddingSpace& space, std::size_t k,
                                            const std::unordered_set<std::uint32_t>& exclude,
                                            ScoreFn&& score_of) {
  std::vector<std::pair<double, std::uint32_t>> scored;
  scored.reserve(space.size());
  for (std::uint32_t id = 0; id < space.size(); ++id) {
    if (space.is_zero_row(id) || exclude.count(id)) continue;
    scored.emplace_back(score_of(id), id);
  }
  auto better = [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  };
  if (k < scored.size()) {
    std::partial_sort(scored.begin(), scored.begin() + k, scored.end(), better);
    scored.resize(k);
  } else {
    std::sort(scored.begin(), scored.end(), better);
  }
  std::vector<RankedCandidate> out;
  out.reserve(scored.size());
  for (auto& [s, id] : scored) out.push_back({id, space.vocab().word(id), s});
  return out;
}

inline double unit_dot(const EmbeddingSpace& space, std::uint32_t x, std::uint32_t y) {
  const float* a = space.unit_vectors().row(x);
  const float* b = space.unit_vectors().row(y);
  double s = 0;
  for (std::uint32_t c = 0; c < space.dim(); ++c) s += double(a[c]) * double(b[c]);
  return s;
}

}  // namespace detail

// cos(candidate, b - a + a*) over unit-normalized vectors. Returns nullopt
// when a query word is out of vocabulary (a not-given answer, distinct from
// a wrong one).
inline std::optional<std::vector<RankedCandidate>> answer_3cosadd(
    const EmbeddingSpace& space, const std::string& a, const std::string& a_star,
    const std::string& b, const MethodConfig& cfg = {}, std::size_t k = 5) {
  auto ia = space.vocab().id_of(a);
  auto ia2 = space.vocab().id_of(a_star);
  auto ib = space.vocab().id_of(b);
  if (!ia || !ia2 || !ib) return std::nullopt;

  const MatF& unit = space.unit_vectors();
  const std::uint32_t dim = space.dim();
  std::vector<double> target(dim);
  double norm2 = 0;
  for (std::uint32_t c = 0; c < dim; ++c) {
    target[c] = double(unit.row(*ib)[c]) - double(unit.row(*ia)[c]) +
                double(unit.row(*ia2)[c]);
    norm2 += target[c] * target[c];
  }
  const double inv = norm2 > 0 ? 1.0 / std::sqrt(norm2) : 0.0;

  std::unordered_set<std::uint32_t> exclude;
  if (cfg.exclude_queries) exclude = {*ia, *ia2, *ib};

  return detail::top_candidates(space, k, exclude, [&](std::uint32_t id) {
    const float* u = unit.row(id);
    double dot = 0;
    for (std::uint32_t c = 0; c < dim; ++c) dot += double(u[c]) * target[c];
    return dot * inv;
  });
}

// Multiplicative objective with each cosine shifted to [0,1] via
// (cos+1)/2 before combining - plain cosines flip sign and would invert
// rankings. score = s(c,b) * s(c,a*) / (s(c,a) + epsilon).
inline std::optional<std::vector<RankedCandidate>> answer_3cosmul(
    const EmbeddingSpace& space, const std::string& a, const std::string& a_star,
    const std::string& b, const MethodConfig& cfg = {}, std::size_t k = 5) {
  if (!(cfg.epsilon > 0)) throw Error("cosmul: epsilon must be > 0");
  auto ia = space.vocab().id_of(a);
  auto ia2 = space.vocab().id_of(a_star);
  auto ib = space.vocab().id_of(b);
  if (!ia || !ia2 || !ib) return std::nullopt;

  std::unordered_set<std::uint32_t> exclude;
  if (cfg.exclude_queries) exclude = {*ia, *ia2, *ib};

  return detail::top_candidates(space, k, exclude, [&](std::uint32_t id) {
    double sb = (detail::unit_dot(space, id, *ib) + 1.0) * 0.5;
    double sa2 = (detail::unit_dot(space, id, *ia2) + 1.0) * 0.5;
    double sa = (detail::unit_dot(space, id, *ia) + 1.0) * 0.5;
    return sb * sa2 / (sa + cfg.epsilon);
  });
}

inline std::optional<std::vector<RankedCandidate>> answer_analogy(
    const EmbeddingSpace& space, const std::string& a, const std::string& a_star,
    const std::string& b, const MethodConfig& cfg, std::size_t k = 5) {
  return cfg.method == MethodKind::cosadd ? answer_3cosadd(space, a, a_star, b, cfg, k)
                                          : answer_3cosmul(space, a, a_star, b, cfg, k);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

enum class Outcome { correct, wrong, not_given };

inline const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::correct: return "correct";
    case Outcome::wrong: return "wrong";
    default: return "not_given";
  }
}

// One non-correct question as persisted for later error analysis. The top-k
// ranking is captured at evaluation time so analysis never needs the vector
// files again. not_given records carry no ranking.
struct ErrorRecord {
  AnalogyQuestion question;
  Outcome outcome = Outcome::wrong;
  std::string predicted;
  std::vector<std::pair<std::string, double>> top5;
  std::string method;
  std::string config_id;
};

struct CategoryResult {
  std::string name;
  QuestionKind kind = QuestionKind::semantic;
  std::uint32_t questions = 0;
  std::uint32_t attempted = 0;
  std::uint32_t correct = 0;
  std::uint32_t not_given = 0;

  std::uint32_t wrong() const { return attempted - correct; }
};

struct Totals {
  std::uint32_t questions = 0;
  std::uint32_t attempted = 0;
  std::uint32_t correct = 0;
  std::uint32_t not_given = 0;

  // undefined (absent) when nothing was attempted
  std::optional<double> accuracy_over_attempted() const {
    if (attempted == 0) return std::nullopt;
    return static_cast<double>(correct) / attempted;
  }
  double accuracy_over_all() const {
    return questions ? static_cast<double>(correct) / questions : 0.0;
  }

  void add(const CategoryResult& c) {
    questions += c.questions;
    attempted += c.attempted;
    correct += c.correct;
    not_given += c.not_given;
  }
};

struct EvalReport {
  std::string config_id;
  MethodConfig method;
  std::uint32_t top_k = 5;
  std::uint64_t suite_hash = 0;
  std::uint32_t suite_questions = 0;
  std::vector<CategoryResult> per_category;

  Totals totals(QuestionKind kind) const {
    Totals t;
    for (const auto& c : per_category)
      if (c.kind == kind) t.add(c);
    return t;
  }

  Totals overall() const {
    Totals t;
    for (const auto& c : per_category) t.add(c);
    return t;
  }
};

struct EvalRun {
  EvalReport report;
  std::vector<ErrorRecord> records;  // wrong and not_given questions
};

// For each question: any OOV query or answer word means not_given; otherwise
// the method's top-1 is the prediction and must equal b*. Every non-correct
// question yields an ErrorRecord.
inline EvalRun evaluate(const EmbeddingSpace& space, const AnalogySuite& suite,
                        const MethodConfig& method, const std::string& config_id = "",
                        std::size_t top_k = 5) {
  if (suite.questions.empty()) throw Error("evaluate: empty analogy suite");

  EvalRun run;
  run.report.config_id = config_id;
  run.report.method = method;
  run.report.top_k = static_cast<std::uint32_t>(top_k);
  run.report.suite_hash = suite.hash;
  run.report.suite_questions = static_cast<std::uint32_t>(suite.questions.size());

  std::unordered_map<std::string, std::size_t> cat_index;
  for (const auto& c : suite.categories) {
    cat_index.emplace(c.name, run.report.per_category.size());
    run.report.per_category.push_back({c.name, c.kind, 0, 0, 0, 0});
  }

  for (const auto& q : suite.questions) {
    auto& cat = run.report.per_category[cat_index.at(q.category)];
    cat.questions += 1;

    auto ranked = answer_analogy(space, q.a, q.a_star, q.b, method, top_k);
    const bool answer_known = space.vocab().contains(q.b_star);
    if (!ranked || !answer_known) {
      cat.not_given += 1;
      ErrorRecord rec;
      rec.question = q;
      rec.outcome = Outcome::not_given;
      rec.method = method_name(method.method);
      rec.config_id = config_id;
      run.records.push_back(std::move(rec));
      continue;
    }

    cat.attempted += 1;
    const bool correct = !ranked->empty() && ranked->front().word == q.b_star;
    if (correct) {
      cat.correct += 1;
      continue;
    }
    ErrorRecord rec;
    rec.question = q;
    rec.outcome = Outcome::wrong;
    rec.predicted = ranked->empty() ? std::string() : ranked->front().word;
    rec.top5.reserve(ranked->size());
    for (const auto& r : *ranked) rec.top5.emplace_back(r.word, r.score);
    rec.method = method_name(method.method);
    rec.config_id = config_id;
    run.records.push_back(std::move(rec));
  }
  return run;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json totals_to_json(const Totals& t) {
  nlohmann::json j{{"questions", t.questions},
                   {"attempted", t.attempted},
                   {"correct", t.correct},
                   {"not_given", t.not_given},
                   {"accuracy_over_all", t.accuracy_over_all()}};
  auto acc = t.accuracy_over_attempted();
  j["accuracy_over_attempted"] = acc ? nlohmann::json(*acc) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : r.per_category) {
    cats.push_back({{"name", c.name},
                    {"kind", kind_name(c.kind)},
                    {"questions", c.questions},
                    {"attempted", c.attempted},
                    {"correct", c.correct},
                    {"not_given", c.not_given}});
  }
  return nlohmann::json{
      {"config_id", r.config_id},
      {"method",
       {{"method", method_name(r.method.method)},
        {"epsilon", r.method.epsilon},
        {"exclude_queries", r.method.exclude_queries}}},
      {"top_k", r.top_k},
      {"suite", {{"questions", r.suite_questions}, {"hash", r.suite_hash}}},
      {"categories", cats},
      {"totals",
       {{"morphosyntactic", totals_to_json(r.totals(QuestionKind::morphosyntactic))},
        {"semantic", totals_to_json(r.totals(QuestionKind::semantic))},
        {"overall", totals_to_json(r.overall())}}}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.config_id = j.at("config_id").get<std::string>();
  r.method.method = method_from_name(j.at("method").at("method").get<std::string>());
  r.method.epsilon = j.at("method").at("epsilon").get<double>();
  r.method.exclude_queries = j.at("method").at("exclude_queries").get<bool>();
  r.top_k = j.at("top_k").get<std::uint32_t>();
  r.suite_hash = j.at("suite").at("hash").get<std::uint64_t>();
  r.suite_questions = j.at("suite").at("questions").get<std::uint32_t>();
  for (const auto& c : j.at("categories")) {
    CategoryResult cr;
    cr.name = c.at("name").get<std::string>();
    cr.kind = c.at("kind").get<std::string>() == "semantic"
                  ? QuestionKind::semantic
                  : QuestionKind::morphosyntactic;
    cr.questions = c.at("questions").get<std::uint32_t>();
    cr.attempted = c.at("attempted").get<std::uint32_t>();
    cr.correct = c.at("correct").get<std::uint32_t>();
    cr.not_given = c.at("not_given").get<std::uint32_t>();
    r.per_category.push_back(std::move(cr));
  }
  return r;
}

inline void save_report_json(const EvalReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write report: " + path);
  out << report_to_json(r).dump(2) << '\n';
}

inline EvalReport load_report_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open report: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 0, std::string("invalid report json: ") + e.what());
  }
  return report_from_json(j);
}

inline void write_report_tsv(const EvalReport& r, std::ostream& out) {
  out << "category\tkind\tquestions\tattempted\tcorrect\twrong\tnot_given"
         "\taccuracy_over_attempted\taccuracy_over_all\n";
  auto acc_str = [](const Totals& t) {
    auto a = t.accuracy_over_attempted();
    return a ? std::to_string(*a) : std::string("-");
  };
  for (const auto& c : r.per_category) {
    Totals t;
    t.add(c);
    out << c.name << '\t' << kind_name(c.kind) << '\t' << c.questions << '\t'
        << c.attempted << '\t' << c.correct << '\t' << c.wrong() << '\t'
        << c.not_given << '\t' << acc_str(t) << '\t' << t.accuracy_over_all() << '\n';
  }
  auto row = [&](const char* name, const Totals& t) {
    out << name << "\t-\t" << t.questions << '\t' << t.attempted << '\t' << t.correct
        << '\t' << (t.attempted - t.correct) << '\t' << t.not_given << '\t'
        << acc_str(t) << '\t' << t.accuracy_over_all() << '\n';
  };
  row("TOTAL:morphosyntactic", r.totals(QuestionKind::morphosyntactic));
  row("TOTAL:semantic", r.totals(QuestionKind::semantic));
  row("TOTAL:overall", r.overall());
}

inline void save_report_tsv(const EvalReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write report: " + path);
  write_report_tsv(r, out);
}

inline nlohmann::json record_to_json(const ErrorRecord& rec) {
  nlohmann::json top = nlohmann::json::array();
  for (const auto& [w, s] : rec.top5) top.push_back({w, s});
  return nlohmann::json{{"a", rec.question.a},
                        {"a_star", rec.question.a_star},
                        {"b", rec.question.b},
                        {"b_star", rec.question.b_star},
                        {"category", rec.question.category},
                        {"kind", kind_name(rec.question.kind)},
                        {"outcome", outcome_name(rec.outcome)},
                        {"predicted", rec.predicted},
                        {"top5", top},
                        {"method", rec.method},
                        {"config_id", rec.config_id}};
}

inline ErrorRecord record_from_json(const nlohmann::json& j) {
  ErrorRecord rec;
  rec.question.a = j.at("a").get<std::string>();
  rec.question.a_star = j.at("a_star").get<std::string>();
  rec.question.b = j.at("b").get<std::string>();
  rec.question.b_star = j.at("b_star").get<std::string>();
  rec.question.category = j.at("category").get<std::string>();
  rec.question.kind = j.at("kind").get<std::string>() == "semantic"
                          ? QuestionKind::semantic
                          : QuestionKind::morphosyntactic;
  std::string oc = j.at("outcome").get<std::string>();
  rec.outcome = oc == "wrong" ? Outcome::wrong : Outcome::not_given;
  rec.predicted = j.at("predicted").get<std::string>();
  for (const auto& t : j.at("top5"))
    rec.top5.emplace_back(t.at(0).get<std::string>(), t.at(1).get<double>());
  rec.method = j.at("method").get<std::string>();
  rec.config_id = j.at("config_id").get<std::string>();
  return rec;
}

// newline-delimited JSON, one record per line
inline void save_error_records(const std::vector<ErrorRecord>& records,
                               const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write error records: " + path);
  for (const auto& rec : records) out << record_to_json(rec).dump() << '\n';
}

inline std::vector<ErrorRecord> load_error_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open error records: " + path);
  std::vector<ErrorRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, line_no, std::string("invalid record: ") + e.what());
    }
  }
  return out;
}

}  // namespace embedlab
