#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "embedlab/analogy.hpp"
#include "embedlab/analysis.hpp"
#include "embedlab/common.hpp"
#include "embedlab/embeddings.hpp"
#include "embedlab/trainer.hpp"

namespace embedlab {

// ---------------------------------------------------------------------------
// Sweep specification. Flat key/value-list file, one key per line:
//
//     # comment
//     corpus = corpus.txt
//     suite = questions.txt
//     out = runs
//     models = sg cbow
//     dim = 200 300 400 500
//     window.sg = 3 5
//     window.cbow = 2 5
//     min_count = 1 5
//     negatives.sg = 1 5 10
//     negatives.cbow = 1 5 15
//     epochs = 5
//     seed = 1
//     workers = 1
//     methods = cosadd cosmul
//
// Window and negative lists are per model; the grid is the cartesian product
// per model kind.
// ---------------------------------------------------------------------------

struct SweepSpec {
  std::string corpus;
  std::string suite;
  std::string out_root;
  std::vector<ModelKind> models{ModelKind::sg, ModelKind::cbow};
  std::vector<int> dims;
  std::vector<int> windows_sg;
  std::vector<int> windows_cbow;
  std::vector<int> min_counts;
  std::vector<int> negatives_sg;
  std::vector<int> negatives_cbow;
  int epochs = 5;
  float initial_lr = 0.0f;  // 0 = per-model default
  double subsample_threshold = 0.0;
  double sampler_power = 0.75;
  std::uint64_t seed = 1;
  int workers = 1;
  std::vector<MethodKind> methods{MethodKind::cosadd, MethodKind::cosmul};
  double epsilon = 0.001;
  std::uint32_t top_k = 5;

  const std::vector<int>& windows(ModelKind m) const {
    return m == ModelKind::sg ? windows_sg : windows_cbow;
  }
  const std::vector<int>& negatives(ModelKind m) const {
    return m == ModelKind::sg ? negatives_sg : negatives_cbow;
  }
};

inline SweepSpec parse_sweep_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open sweep spec: " + path);
  SweepSpec spec;
  spec.models.clear();
  spec.methods.clear();

  std::string line;
  std::size_t line_no = 0;
  bool saw_models = false, saw_methods = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path, line_no, "expected 'key = value...'");
    auto trim = [](std::string s) {
      std::size_t x = s.find_first_not_of(" \t\r");
      std::size_t y = s.find_last_not_of(" \t\r");
      return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));

    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < value.size()) {
      while (i < value.size() && (value[i] == ' ' || value[i] == '\t')) ++i;
      std::size_t j = i;
      while (j < value.size() && value[j] != ' ' && value[j] != '\t') ++j;
      if (j > i) parts.push_back(value.substr(i, j - i));
      i = j;
    }

    auto ints = [&](std::vector<int>& dst) {
      dst.clear();
      for (const auto& p : parts) {
        try {
          dst.push_back(std::stoi(p));
        } catch (...) {
          throw ParseError(path, line_no, "expected integer list for '" + key + "'");
        }
      }
    };
    auto single = [&]() -> const std::string& {
      if (parts.size() != 1)
        throw ParseError(path, line_no, "'" + key + "' takes exactly one value");
      return parts[0];
    };

    if (key == "corpus") spec.corpus = single();
    else if (key == "suite") spec.suite = single();
    else if (key == "out") spec.out_root = single();
    else if (key == "models") {
      saw_models = true;
      for (const auto& p : parts) spec.models.push_back(model_from_name(p));
    } else if (key == "dim") ints(spec.dims);
    else if (key == "window.sg") ints(spec.windows_sg);
    else if (key == "window.cbow") ints(spec.windows_cbow);
    else if (key == "window") { ints(spec.windows_sg); spec.windows_cbow = spec.windows_sg; }
    else if (key == "min_count") ints(spec.min_counts);
    else if (key == "negatives.sg") ints(spec.negatives_sg);
    else if (key == "negatives.cbow") ints(spec.negatives_cbow);
    else if (key == "negatives") { ints(spec.negatives_sg); spec.negatives_cbow = spec.negatives_sg; }
    else if (key == "epochs") spec.epochs = std::stoi(single());
    else if (key == "lr") spec.initial_lr = std::stof(single());
    else if (key == "subsample") spec.subsample_threshold = std::stod(single());
    else if (key == "power") spec.sampler_power = std::stod(single());
    else if (key == "seed") spec.seed = std::stoull(single());
    else if (key == "workers") spec.workers = std::stoi(single());
    else if (key == "epsilon") spec.epsilon = std::stod(single());
    else if (key == "top_k") spec.top_k = static_cast<std::uint32_t>(std::stoul(single()));
    else if (key == "methods") {
      saw_methods = true;
      for (const auto& p : parts) spec.methods.push_back(method_from_name(p));
    } else {
      throw ParseError(path, line_no, "unknown key '" + key + "'");
    }
  }
  if (!saw_models) spec.models = {ModelKind::sg, ModelKind::cbow};
  if (!saw_methods) spec.methods = {MethodKind::cosadd, MethodKind::cosmul};
  if (spec.corpus.empty()) throw Error("sweep spec: missing 'corpus'");
  if (spec.suite.empty()) throw Error("sweep spec: missing 'suite'");
  if (spec.out_root.empty()) throw Error("sweep spec: missing 'out'");
  return spec;
}

// Full cartesian product per model kind, in a fixed order (model, dim,
// window, min_count, negatives), so config ids and directory layouts are
// deterministic.
inline std::vector<TrainingConfig> expand_grid(const SweepSpec& spec) {
  auto require = [](const std::vector<int>& v, const char* name) {
    if (v.empty()) throw Error(std::string("sweep spec: empty value list for '") + name + "'");
  };
  if (spec.models.empty()) throw Error("sweep spec: empty value list for 'models'");
  require(spec.dims, "dim");
  require(spec.min_counts, "min_count");

  std::vector<TrainingConfig> out;
  for (ModelKind model : spec.models) {
    const auto& windows = spec.windows(model);
    const auto& negatives = spec.negatives(model);
    require(windows, model == ModelKind::sg ? "window.sg" : "window.cbow");
    require(negatives, model == ModelKind::sg ? "negatives.sg" : "negatives.cbow");
    for (int dim : spec.dims)
      for (int w : windows)
        for (int m : spec.min_counts)
          for (int n : negatives) {
            TrainingConfig cfg;
            cfg.model = model;
            cfg.dim = dim;
            cfg.window = w;
            cfg.min_count = m;
            cfg.negatives = n;
            cfg.epochs = spec.epochs;
            cfg.initial_lr = spec.initial_lr;
            cfg.subsample_threshold = spec.subsample_threshold;
            cfg.sampler_power = spec.sampler_power;
            cfg.seed = spec.seed;
            cfg.workers = spec.workers;
            cfg.validate();
            out.push_back(cfg);
          }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run manifests and sweep execution
// ---------------------------------------------------------------------------

enum class RunStatus { pending, trained, evaluated, failed };

inline const char* status_name(RunStatus s) {
  switch (s) {
    case RunStatus::pending: return "pending";
    case RunStatus::trained: return "trained";
    case RunStatus::evaluated: return "evaluated";
    default: return "failed";
  }
}

inline RunStatus status_from_name(const std::string& s) {
  if (s == "pending") return RunStatus::pending;
  if (s == "trained") return RunStatus::trained;
  if (s == "evaluated") return RunStatus::evaluated;
  if (s == "failed") return RunStatus::failed;
  throw Error("unknown run status: " + s);
}

struct RunManifest {
  std::string config_id;
  TrainingConfig config;
  RunStatus status = RunStatus::pending;
  std::string dir;  // run directory; artifact paths below are relative to it
  std::string vectors_txt = "vectors.txt";
  std::string vectors_bin = "vectors.vecbin";
  std::string vocab_file = "vocab.tsv";
  std::string train_log = "train.log.tsv";
  double duration_s = 0.0;
  std::string error;

  std::string eval_report_path(MethodKind m) const {
    return dir + "/eval-" + method_name(m) + ".json";
  }
  std::string error_records_path(MethodKind m) const {
    return dir + "/errors-" + method_name(m) + ".jsonl";
  }
  std::string manifest_path() const { return dir + "/manifest.json"; }
};

inline nlohmann::json config_to_json(const TrainingConfig& c) {
  return nlohmann::json{{"model", model_name(c.model)},
                        {"dim", c.dim},
                        {"window", c.window},
                        {"min_count", c.min_count},
                        {"negatives", c.negatives},
                        {"epochs", c.epochs},
                        {"initial_lr", c.initial_lr},
                        {"lr_floor_fraction", c.lr_floor_fraction},
                        {"subsample_threshold", c.subsample_threshold},
                        {"sampler_power", c.sampler_power},
                        {"seed", c.seed},
                        {"workers", c.workers}};
}

inline TrainingConfig config_from_json(const nlohmann::json& j) {
  TrainingConfig c;
  c.model = model_from_name(j.at("model").get<std::string>());
  c.dim = j.at("dim").get<int>();
  c.window = j.at("window").get<int>();
  c.min_count = j.at("min_count").get<int>();
  c.negatives = j.at("negatives").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.initial_lr = j.at("initial_lr").get<float>();
  c.lr_floor_fraction = j.at("lr_floor_fraction").get<float>();
  c.subsample_threshold = j.at("subsample_threshold").get<double>();
  c.sampler_power = j.at("sampler_power").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.workers = j.at("workers").get<int>();
  return c;
}

inline void save_manifest(const RunManifest& m) {
  nlohmann::json j{{"config_id", m.config_id},
                   {"status", status_name(m.status)},
                   {"config", config_to_json(m.config)},
                   {"artifacts",
                    {{"vectors_txt", m.vectors_txt},
                     {"vectors_bin", m.vectors_bin},
                     {"vocab", m.vocab_file},
                     {"train_log", m.train_log}}},
                   {"duration_s", m.duration_s},
                   {"error", m.error}};
  std::ofstream out(m.manifest_path(), std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + m.manifest_path());
  out << j.dump(2) << '\n';
}

inline RunManifest load_manifest(const std::string& dir) {
  std::string path = dir + "/manifest.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 0, std::string("invalid manifest: ") + e.what());
  }
  RunManifest m;
  m.dir = dir;
  m.config_id = j.at("config_id").get<std::string>();
  m.status = status_from_name(j.at("status").get<std::string>());
  m.config = config_from_json(j.at("config"));
  m.vectors_txt = j.at("artifacts").at("vectors_txt").get<std::string>();
  m.vectors_bin = j.at("artifacts").at("vectors_bin").get<std::string>();
  m.vocab_file = j.at("artifacts").at("vocab").get<std::string>();
  m.train_log = j.at("artifacts").at("train_log").get<std::string>();
  m.duration_s = j.at("duration_s").get<double>();
  m.error = j.at("error").get<std::string>();
  return m;
}

// Trains and evaluates every grid config. Failures are recorded in the
// config's manifest and do not stop the sweep; with resume=true, configs
// already marked evaluated are skipped.
template <class Progress>
std::vector<RunManifest> run_sweep(const SweepSpec& spec, bool resume, Progress&& progress,
                                   const TokenizerConfig& tok = {}) {
  namespace fs = std::filesystem;
  {
    std::error_code ec;
    fs::create_directories(spec.out_root, ec);
    std::string probe = spec.out_root + "/.write-probe";
    std::ofstream p(probe, std::ios::binary);
    if (ec || !p) throw IoError("output root is not writable: " + spec.out_root);
    p.close();
    fs::remove(probe, ec);
  }
  {
    std::ifstream c(spec.corpus, std::ios::binary);
    if (!c) throw IoError("cannot open corpus file: " + spec.corpus);
  }
  const AnalogySuite suite = parse_suite(spec.suite);

  std::vector<RunManifest> manifests;
  for (const TrainingConfig& cfg : expand_grid(spec)) {
    RunManifest m;
    m.config = cfg;
    m.config_id = cfg.config_id();
    m.dir = spec.out_root + "/" + m.config_id;

    if (resume && fs::exists(m.manifest_path())) {
      RunManifest prev = load_manifest(m.dir);
      if (prev.status == RunStatus::evaluated) {
        progress(prev, true);
        manifests.push_back(std::move(prev));
        continue;
      }
    }

    std::error_code ec;
    fs::create_directories(m.dir, ec);
    auto t0 = std::chrono::steady_clock::now();
    try {
      save_manifest(m);  // pending
      TrainResult r = train(spec.corpus, cfg, tok);
      r.vocab.save(m.dir + "/" + m.vocab_file);
      r.log.save_tsv(m.dir + "/" + m.train_log);
      EmbeddingSpace space(std::move(r.vocab), std::move(r.matrices.input));
      save_text(space, m.dir + "/" + m.vectors_txt);
      save_vecbin(space, m.dir + "/" + m.vectors_bin);
      m.status = RunStatus::trained;
      m.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      save_manifest(m);

      for (MethodKind method : spec.methods) {
        MethodConfig mc;
        mc.method = method;
        mc.epsilon = spec.epsilon;
        EvalRun run = evaluate(space, suite, mc, m.config_id, spec.top_k);
        save_report_json(run.report, m.eval_report_path(method));
        save_error_records(run.records, m.error_records_path(method));
      }
      m.status = RunStatus::evaluated;
    } catch (const std::exception& e) {
      m.status = RunStatus::failed;
      m.error = e.what();
    }
    m.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_manifest(m);
    progress(m, false);
    manifests.push_back(std::move(m));
  }
  return manifests;
}

inline std::vector<RunManifest> run_sweep(const SweepSpec& spec, bool resume = false,
                                          const TokenizerConfig& tok = {}) {
  return run_sweep(spec, resume, [](const RunManifest&, bool) {}, tok);
}

// ---------------------------------------------------------------------------
// Figure-style comparison report: one row per (config, method) with the
// morphosyntactic / semantic / overall accuracies and the not-given count,
// i.e. the data behind a stacked-bar rendering. Accuracies are over
// attempted questions; the per-run eval json carries both denominators.
// ---------------------------------------------------------------------------

struct FigureRow {
  std::string config_id;
  MethodKind method;
  std::optional<double> morph_accuracy;
  std::optional<double> semantic_accuracy;
  std::optional<double> overall_accuracy;
  std::uint32_t not_given = 0;
};

inline std::vector<FigureRow> figure_report(const std::vector<RunManifest>& manifests) {
  std::vector<FigureRow> rows;
  for (const auto& m : manifests) {
    if (m.status != RunStatus::evaluated)
      throw Error("config '" + m.config_id + "' has no evaluation report (status " +
                  status_name(m.status) + ")");
    for (MethodKind method : {MethodKind::cosadd, MethodKind::cosmul}) {
      const std::string path = m.eval_report_path(method);
      if (!std::filesystem::exists(path)) continue;
      EvalReport rep = load_report_json(path);
      FigureRow row;
      row.config_id = m.config_id;
      row.method = method;
      row.morph_accuracy = rep.totals(QuestionKind::morphosyntactic).accuracy_over_attempted();
      row.semantic_accuracy = rep.totals(QuestionKind::semantic).accuracy_over_attempted();
      row.overall_accuracy = rep.overall().accuracy_over_attempted();
      row.not_given = rep.overall().not_given;
      rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.back().config_id != m.config_id)
      throw Error("config '" + m.config_id + "' has no evaluation report on disk");
  }
  return rows;
}

inline void write_figure_tsv(const std::vector<FigureRow>& rows, std::ostream& out) {
  out << "config_id\tmethod\tmorphosyntactic_accuracy\tsemantic_accuracy"
         "\toverall_accuracy\tnot_given\n";
  auto cell = [](const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string("-");
  };
  for (const auto& r : rows)
    out << r.config_id << '\t' << method_name(r.method) << '\t' << cell(r.morph_accuracy)
        << '\t' << cell(r.semantic_accuracy) << '\t' << cell(r.overall_accuracy) << '\t'
        << r.not_given << '\n';
}

}  // namespace embedlab
