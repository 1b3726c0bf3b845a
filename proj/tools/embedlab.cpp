// embedlab command line: corpus stats, vocabulary building, embedding
// training, similarity queries, analogy evaluation, error analysis and
// hyperparameter sweeps.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "embedlab/embedlab.hpp"

namespace fs = std::filesystem;
using namespace embedlab;

namespace {

EmbeddingSpace load_vectors_any(const std::string& path) {
  if (path.size() > 7 && path.compare(path.size() - 7, 7, ".vecbin") == 0)
    return load_vecbin(path);
  return load_text(path);
}

EvalRun load_run_dir(const std::string& dir, MethodKind method) {
  EvalRun run;
  run.report = load_report_json(dir + "/eval-" + method_name(method) + ".json");
  run.records = load_error_records(dir + "/errors-" + method_name(method) + ".jsonl");
  return run;
}

void write_train_artifacts(const TrainResult& r, const EmbeddingSpace& space,
                           const std::string& out_dir) {
  fs::create_directories(out_dir);
  r.vocab.save(out_dir + "/vocab.tsv");
  r.log.save_tsv(out_dir + "/train.log.tsv");
  save_text(space, out_dir + "/vectors.txt");
  save_vecbin(space, out_dir + "/vectors.vecbin");
}

int run(int argc, char** argv) {
  CLI::App app{"word embedding training and analogy evaluation toolkit"};
  app.require_subcommand(1);

  // stats
  std::string stats_corpus;
  auto* stats = app.add_subcommand("stats", "print corpus sentence/token counts as TSV");
  stats->add_option("corpus", stats_corpus, "newline-delimited sentence file")->required();

  // build-vocab
  std::string bv_corpus, bv_out;
  int bv_min_count = 5;
  auto* bv = app.add_subcommand("build-vocab", "build a min-count-pruned vocabulary");
  bv->add_option("--corpus", bv_corpus)->required();
  bv->add_option("--min-count", bv_min_count, "minimum word frequency (m)");
  bv->add_option("--out", bv_out, "vocabulary file to write")->required();

  // train
  std::string tr_corpus, tr_model = "sg", tr_out;
  TrainingConfig tr_cfg;
  auto* tr = app.add_subcommand("train", "train skip-gram or CBOW embeddings");
  tr->add_option("--corpus", tr_corpus)->required();
  tr->add_option("--model", tr_model, "sg or cbow");
  tr->add_option("--dim", tr_cfg.dim, "vector dimensionality");
  tr->add_option("--window", tr_cfg.window, "maximum context offset (w)");
  tr->add_option("--min-count", tr_cfg.min_count, "vocabulary pruning threshold (m)");
  tr->add_option("--negatives", tr_cfg.negatives, "negative samples per pair (n)");
  tr->add_option("--epochs", tr_cfg.epochs);
  tr->add_option("--lr", tr_cfg.initial_lr, "initial learning rate (0 = model default)");
  tr->add_option("--subsample", tr_cfg.subsample_threshold,
                 "frequent-word subsampling threshold t (0 = off)");
  tr->add_option("--seed", tr_cfg.seed);
  tr->add_option("--workers", tr_cfg.workers, "training threads");
  tr->add_option("--out", tr_out, "output directory")->required();

  // neighbors
  std::string nb_vectors, nb_word;
  std::size_t nb_k = 10;
  auto* nb = app.add_subcommand("neighbors", "nearest neighbors of a word by cosine");
  nb->add_option("--vectors", nb_vectors, "vectors file (.txt or .vecbin)")->required();
  nb->add_option("--word", nb_word)->required();
  nb->add_option("--k", nb_k);

  // eval
  std::string ev_vectors, ev_suite, ev_method = "cosadd", ev_out;
  double ev_epsilon = 0.001;
  std::size_t ev_topk = 5;
  bool ev_no_exclude = false;
  auto* ev = app.add_subcommand("eval", "evaluate an analogy suite against vectors");
  ev->add_option("--vectors", ev_vectors)->required();
  ev->add_option("--suite", ev_suite, "analogy file in Google format")->required();
  ev->add_option("--method", ev_method, "cosadd or cosmul");
  ev->add_option("--epsilon", ev_epsilon, "cosmul denominator offset");
  ev->add_option("--top-k", ev_topk, "ranking depth stored in error records");
  ev->add_flag("--no-exclude-queries", ev_no_exclude,
               "keep a, a*, b among the candidates");
  ev->add_option("--out", ev_out, "output directory")->required();

  // analyze
  std::vector<std::string> an_runs;
  std::string an_report = "errors", an_method = "cosadd";
  std::size_t an_k = 5, an_top = 20;
  auto* an = app.add_subcommand("analyze", "error analysis over evaluated runs");
  an->add_option("--runs", an_runs, "run directories (sweep layout)")
      ->required()
      ->expected(-1);
  an->add_option("--report", an_report, "errors | solved | always-wrong | topk");
  an->add_option("--method", an_method, "which evaluation to analyze");
  an->add_option("--k", an_k, "ranking depth for topk");
  an->add_option("--top", an_top, "rows to print for the errors report");

  // sweep
  std::string sw_spec;
  bool sw_resume = false;
  auto* sw = app.add_subcommand("sweep", "run a hyperparameter grid end to end");
  sw->add_option("--spec", sw_spec, "sweep spec file")->required();
  sw->add_flag("--resume", sw_resume, "skip configs already evaluated");

  // report
  std::string rp_runs, rp_out;
  auto* rp = app.add_subcommand("report", "tabulate per-config accuracies");
  rp->add_option("--runs", rp_runs, "sweep output root")->required();
  rp->add_option("--out", rp_out, "TSV file (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  if (*stats) {
    CorpusStats st = corpus_stats_file(stats_corpus);
    std::cout << "sentences\ttokens\n" << st.sentence_count << '\t' << st.token_count << '\n';
    return 0;
  }

  if (*bv) {
    Vocabulary v = build_vocabulary_file(bv_corpus, static_cast<std::uint32_t>(bv_min_count));
    v.save(bv_out);
    std::cerr << "vocabulary: " << v.size() << " words, " << v.total_tokens()
              << " retained tokens\n";
    return 0;
  }

  if (*tr) {
    tr_cfg.model = model_from_name(tr_model);
    TrainResult r = train(tr_corpus, tr_cfg);
    for (const auto& e : r.log.epochs)
      std::cerr << "epoch " << e.epoch << ": pairs=" << e.pairs
                << " mean_loss=" << e.mean_pair_loss << " tokens/s=" << e.tokens_per_sec
                << '\n';
    EmbeddingSpace space(std::move(r.vocab), std::move(r.matrices.input));
    write_train_artifacts(r, space, tr_out);
    if (space.zero_vector_count() > 0)
      std::cerr << "warning: " << space.zero_vector_count() << " zero vectors\n";
    std::cerr << "wrote " << tr_out << "/vectors.txt (" << space.size() << " x "
              << space.dim() << ")\n";
    return 0;
  }

  if (*nb) {
    EmbeddingSpace space = load_vectors_any(nb_vectors);
    auto neighbors = nearest_neighbors(space, nb_word, nb_k, {nb_word});
    std::cout << "word\tcosine\n";
    for (const auto& n : neighbors) std::cout << n.word << '\t' << n.cosine << '\n';
    return 0;
  }

  if (*ev) {
    EmbeddingSpace space = load_vectors_any(ev_vectors);
    AnalogySuite suite = parse_suite(ev_suite);
    MethodConfig mc;
    mc.method = method_from_name(ev_method);
    mc.epsilon = ev_epsilon;
    mc.exclude_queries = !ev_no_exclude;
    EvalRun run = evaluate(space, suite, mc, fs::path(ev_vectors).stem().string(), ev_topk);
    fs::create_directories(ev_out);
    std::string base = ev_out + "/eval-" + method_name(mc.method);
    save_report_json(run.report, base + ".json");
    save_report_tsv(run.report, base + ".tsv");
    save_error_records(run.records, ev_out + "/errors-" + method_name(mc.method) + ".jsonl");
    write_report_tsv(run.report, std::cout);
    return 0;
  }

  if (*an) {
    MethodKind method = method_from_name(an_method);
    std::vector<EvalRun> runs;
    runs.reserve(an_runs.size());
    for (const auto& d : an_runs) runs.push_back(load_run_dir(d, method));

    if (an_report == "errors") {
      std::cout << "run\texpected_word\terrors\n";
      for (std::size_t i = 0; i < runs.size(); ++i) {
        ErrorSummary s = summarize_errors(runs[i]);
        std::cerr << an_runs[i] << ": " << s.total_errors << " errors over "
                  << s.distinct_expected_words << " distinct words\n";
        for (std::size_t r = 0; r < s.ranked_error_words.size() && r < an_top; ++r)
          std::cout << runs[i].report.config_id << '\t' << s.ranked_error_words[r].first
                    << '\t' << s.ranked_error_words[r].second << '\n';
      }
    } else if (an_report == "solved") {
      if (runs.size() != 2)
        throw Error("--report solved needs exactly two runs: base improved");
      auto solved = solved_errors(runs[0], runs[1]);
      std::cout << "a\ta_star\tb\tb_star\tcategory\n";
      for (const auto& q : solved)
        std::cout << q.a << '\t' << q.a_star << '\t' << q.b << '\t' << q.b_star << '\t'
                  << q.category << '\n';
      std::cerr << solved.size() << " errors solved\n";
    } else if (an_report == "always-wrong") {
      if (runs.size() < 2) throw Error("--report always-wrong needs at least two runs");
      auto words = always_wrong(std::span<const EvalRun>(runs));
      std::cout << "word\n";
      for (const auto& w : words) std::cout << w << '\n';
      std::cerr << words.size() << " words failed under every run\n";
    } else if (an_report == "topk") {
      std::cout << "run\terrors\tin_top" << an_k << "\tfraction\tat_rank2_fraction\n";
      for (std::size_t i = 0; i < runs.size(); ++i) {
        TopkRecovery t = topk_recovery(runs[i], an_k);
        std::cout << runs[i].report.config_id << '\t' << t.errors << '\t' << t.in_topk
                  << '\t' << t.fraction_in_topk << '\t'
                  << (t.fraction_at_rank2 ? std::to_string(*t.fraction_at_rank2)
                                          : std::string("-"))
                  << '\n';
      }
    } else {
      throw Error("unknown analyze report: " + an_report);
    }
    return 0;
  }

  if (*sw) {
    SweepSpec spec = parse_sweep_spec(sw_spec);
    auto manifests = run_sweep(
        spec, sw_resume,
        [](const RunManifest& m, bool skipped) {
          std::cerr << m.config_id << ": " << status_name(m.status)
                    << (skipped ? " (resumed)" : "")
                    << (m.error.empty() ? "" : " - " + m.error) << '\n';
        });
    std::size_t failed = 0;
    for (const auto& m : manifests)
      if (m.status == RunStatus::failed) ++failed;
    std::cerr << manifests.size() << " configs, " << failed << " failed\n";
    return failed == 0 ? 0 : 1;
  }

  if (*rp) {
    std::vector<std::string> dirs;
    for (const auto& entry : fs::directory_iterator(rp_runs))
      if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
        dirs.push_back(entry.path().string());
    std::sort(dirs.begin(), dirs.end());
    std::vector<RunManifest> manifests;
    for (const auto& d : dirs) manifests.push_back(load_manifest(d));
    auto rows = figure_report(manifests);
    if (rp_out.empty()) {
      write_figure_tsv(rows, std::cout);
    } else {
      std::ofstream out(rp_out, std::ios::binary);
      if (!out) throw IoError("cannot write report: " + rp_out);
      write_figure_tsv(rows, out);
      std::cerr << "wrote " << rp_out << " (" << rows.size() << " rows)\n";
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
