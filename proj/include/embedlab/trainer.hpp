#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "embedlab/common.hpp"
#include "embedlab/corpus.hpp"
#include "embedlab/vocab.hpp"

namespace embedlab {

enum class ModelKind { sg, cbow };

inline const char* model_name(ModelKind m) { return m == ModelKind::sg ? "sg" : "cbow"; }

inline ModelKind model_from_name(const std::string& s) {
  if (s == "sg" || s == "skipgram" || s == "skip-gram") return ModelKind::sg;
  if (s == "cbow") return ModelKind::cbow;
  throw Error("unknown model kind: '" + s + "' (expected sg or cbow)");
}

struct TrainingConfig {
  ModelKind model = ModelKind::sg;
  int dim = 200;
  int window = 5;
  int min_count = 5;
  int negatives = 5;
  int epochs = 5;
  float initial_lr = 0.0f;  // 0 = model default (0.025 sg, 0.05 cbow)
  float lr_floor_fraction = 1e-4f;
  double subsample_threshold = 0.0;  // 0 = off
  double sampler_power = 0.75;
  std::uint64_t seed = 1;
  int workers = 1;

  float resolved_lr() const {
    if (initial_lr > 0) return initial_lr;
    return model == ModelKind::sg ? 0.025f : 0.05f;
  }

  std::string config_id() const {
    return std::string(model_name(model)) + "-d" + std::to_string(dim) + "-w" +
           std::to_string(window) + "-m" + std::to_string(min_count) + "-n" +
           std::to_string(negatives);
  }

  void validate() const {
    if (dim < 1) throw Error("training config: dim must be >= 1");
    if (window < 1) throw Error("training config: window must be >= 1");
    if (min_count < 1) throw Error("training config: min_count must be >= 1");
    if (negatives < 1) throw Error("training config: negatives must be >= 1");
    if (epochs < 1) throw Error("training config: epochs must be >= 1");
    if (workers < 1) throw Error("training config: workers must be >= 1");
    if (initial_lr < 0) throw Error("training config: initial_lr must be > 0");
    if (!(lr_floor_fraction > 0) || lr_floor_fraction > 1)
      throw Error("training config: lr_floor_fraction must be in (0, 1]");
  }
};

// Input rows are the word vectors, output rows the context vectors.
template <class Real>
struct Matrices {
  Mat<Real> input;
  Mat<Real> output;

  std::uint32_t rows() const { return input.rows; }
  std::uint32_t dim() const { return input.cols; }
};

using MatricesF = Matrices<float>;
using MatricesD = Matrices<double>;

// Input entries iid uniform in [-0.5/dim, +0.5/dim]; output all zero.
template <class Real = float>
Matrices<Real> init_matrices(std::uint32_t vocab_size, int dim, std::uint64_t seed) {
  if (dim < 1) throw Error("init_matrices: dim must be >= 1");
  Matrices<Real> m;
  m.input = Mat<Real>(vocab_size, static_cast<std::uint32_t>(dim));
  m.output = Mat<Real>(vocab_size, static_cast<std::uint32_t>(dim));
  Rng rng(seed);
  for (auto& x : m.input.data)
    x = static_cast<Real>((rng.next_double() - 0.5) / dim);
  return m;
}

// ---------------------------------------------------------------------------
// Sigmoid
// ---------------------------------------------------------------------------

template <class Real>
Real exact_sigmoid_value(Real x) {
  if (x >= 0) {
    Real e = std::exp(-x);
    return Real(1) / (Real(1) + e);
  }
  Real e = std::exp(x);
  return e / (Real(1) + e);
}

// log sigma(x), computed as -log1p(exp(-|x|)) shifted; stable for large |x|.
template <class Real>
Real exact_log_sigmoid_value(Real x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

struct ExactSigmoid {
  float sigmoid(float x) const { return exact_sigmoid_value(x); }
  float log_sigmoid(float x) const { return exact_log_sigmoid_value(x); }
};

// 1000-entry lookup with the argument clamped to [-6, +6].
class SigmoidTable {
 public:
  static constexpr int kSize = 1000;
  static constexpr float kMaxX = 6.0f;

  SigmoidTable() {
    for (int i = 0; i < kSize; ++i) {
      double x = (2.0 * i / kSize - 1.0) * kMaxX;
      double s = 1.0 / (1.0 + std::exp(-x));
      sig_[i] = static_cast<float>(s);
      logsig_[i] = static_cast<float>(std::log(s));
    }
  }

  float sigmoid(float x) const { return sig_[index(x)]; }
  float log_sigmoid(float x) const { return logsig_[index(x)]; }

 private:
  static int index(float x) {
    if (x <= -kMaxX) return 0;
    if (x >= kMaxX) return kSize - 1;
    int i = static_cast<int>((x + kMaxX) * (kSize / (2.0f * kMaxX)));
    return i < kSize ? i : kSize - 1;
  }

  float sig_[kSize];
  float logsig_[kSize];
};

// ---------------------------------------------------------------------------
// Pair losses and gradients
//
// Skip-gram:  L = -log s(u_ctx . v_c) - sum_k log s(-u_k . v_c)
// CBOW:       h = mean of context input rows,
//             L = -log s(u_center . h) - sum_k log s(-u_k . h)
// Gradients are exact; the d_* lists accumulate per distinct row id, so
// repeated negative draws and repeated context words are handled.
// ---------------------------------------------------------------------------

template <class Real>
struct PairGradients {
  Real loss = 0;
  // (row id, dL/d row) against the input matrix / the output matrix
  std::vector<std::pair<std::uint32_t, std::vector<Real>>> d_input;
  std::vector<std::pair<std::uint32_t, std::vector<Real>>> d_output;
};

namespace detail {

template <class Real>
std::vector<Real>& grad_slot(std::vector<std::pair<std::uint32_t, std::vector<Real>>>& rows,
                             std::uint32_t id, std::uint32_t dim) {
  for (auto& [rid, v] : rows)
    if (rid == id) return v;
  rows.emplace_back(id, std::vector<Real>(dim, Real(0)));
  return rows.back().second;
}

template <class Real>
Real dot(const Real* a, const Real* b, std::uint32_t dim) {
  Real s = 0;
  for (std::uint32_t i = 0; i < dim; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

template <class Real>
PairGradients<Real> sg_pair_loss_and_grads(const Matrices<Real>& m, std::uint32_t center,
                                           std::uint32_t context,
                                           std::span<const std::uint32_t> negatives) {
  const std::uint32_t dim = m.dim();
  const Real* v = m.input.row(center);
  PairGradients<Real> g;
  std::vector<Real> d_center(dim, Real(0));

  auto accumulate = [&](std::uint32_t target, Real label) {
    const Real* u = m.output.row(target);
    Real z = detail::dot(v, u, dim);
    Real s = exact_sigmoid_value(z);
    g.loss -= label > 0 ? exact_log_sigmoid_value(z) : exact_log_sigmoid_value(-z);
    Real coef = s - label;  // dL/dz
    auto& du = detail::grad_slot(g.d_output, target, dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
      d_center[i] += coef * u[i];
      du[i] += coef * v[i];
    }
  };

  accumulate(context, Real(1));
  for (auto k : negatives) accumulate(k, Real(0));
  g.d_input.emplace_back(center, std::move(d_center));
  return g;
}

// Empty context windows are skipped, signalled by nullopt.
template <class Real>
std::optional<PairGradients<Real>> cbow_pair_loss_and_grads(
    const Matrices<Real>& m, std::span<const std::uint32_t> context_ids,
    std::uint32_t center, std::span<const std::uint32_t> negatives) {
  if (context_ids.empty()) return std::nullopt;
  const std::uint32_t dim = m.dim();
  const Real inv_n = Real(1) / static_cast<Real>(context_ids.size());

  std::vector<Real> h(dim, Real(0));
  for (auto c : context_ids) {
    const Real* row = m.input.row(c);
    for (std::uint32_t i = 0; i < dim; ++i) h[i] += row[i];
  }
  for (auto& x : h) x *= inv_n;

  PairGradients<Real> g;
  std::vector<Real> d_h(dim, Real(0));
  auto accumulate = [&](std::uint32_t target, Real label) {
    const Real* u = m.output.row(target);
    Real z = detail::dot(h.data(), u, dim);
    Real s = exact_sigmoid_value(z);
    g.loss -= label > 0 ? exact_log_sigmoid_value(z) : exact_log_sigmoid_value(-z);
    Real coef = s - label;
    auto& du = detail::grad_slot(g.d_output, target, dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
      d_h[i] += coef * u[i];
      du[i] += coef * h[i];
    }
  };

  accumulate(center, Real(1));
  for (auto k : negatives) accumulate(k, Real(0));

  // h averages the context rows, so each row receives d_h / |context|
  for (auto c : context_ids) {
    auto& dv = detail::grad_slot(g.d_input, c, dim);
    for (std::uint32_t i = 0; i < dim; ++i) dv[i] += d_h[i] * inv_n;
  }
  return g;
}

// One SGD step: theta -= lr * grad.
template <class Real>
void apply_gradients(Matrices<Real>& m, const PairGradients<Real>& g, Real lr) {
  for (const auto& [id, dv] : g.d_input) {
    Real* row = m.input.row(id);
    for (std::size_t i = 0; i < dv.size(); ++i) row[i] -= lr * dv[i];
  }
  for (const auto& [id, du] : g.d_output) {
    Real* row = m.output.row(id);
    for (std::size_t i = 0; i < du.size(); ++i) row[i] -= lr * du[i];
  }
}

// ---------------------------------------------------------------------------
// Fused training steps (hot path). Output rows are updated against the
// pre-step input row; the input update is accumulated in e_buf and applied
// last, which makes the step a plain simultaneous SGD update.
// ---------------------------------------------------------------------------

template <class Sig>
float sg_step(MatricesF& m, std::uint32_t center, std::uint32_t context,
              const std::uint32_t* negatives, int n_neg, float lr, const Sig& sig,
              float* e_buf) {
  const std::uint32_t dim = m.dim();
  float* v = m.input.row(center);
  for (std::uint32_t i = 0; i < dim; ++i) e_buf[i] = 0.0f;
  float loss = 0.0f;

  auto update = [&](std::uint32_t target, float label) {
    float* u = m.output.row(target);
    float z = detail::dot(v, u, dim);
    loss -= label > 0 ? sig.log_sigmoid(z) : sig.log_sigmoid(-z);
    float g = (label - sig.sigmoid(z)) * lr;
    for (std::uint32_t i = 0; i < dim; ++i) {
      e_buf[i] += g * u[i];
      u[i] += g * v[i];
    }
  };

  update(context, 1.0f);
  for (int k = 0; k < n_neg; ++k) update(negatives[k], 0.0f);
  for (std::uint32_t i = 0; i < dim; ++i) v[i] += e_buf[i];
  return loss;
}

template <class Sig>
float cbow_step(MatricesF& m, const std::uint32_t* context_ids, int n_ctx,
                std::uint32_t center, const std::uint32_t* negatives, int n_neg,
                float lr, const Sig& sig, float* h_buf, float* e_buf) {
  const std::uint32_t dim = m.dim();
  const float inv_n = 1.0f / static_cast<float>(n_ctx);
  for (std::uint32_t i = 0; i < dim; ++i) {
    h_buf[i] = 0.0f;
    e_buf[i] = 0.0f;
  }
  for (int c = 0; c < n_ctx; ++c) {
    const float* row = m.input.row(context_ids[c]);
    for (std::uint32_t i = 0; i < dim; ++i) h_buf[i] += row[i];
  }
  for (std::uint32_t i = 0; i < dim; ++i) h_buf[i] *= inv_n;

  float loss = 0.0f;
  auto update = [&](std::uint32_t target, float label) {
    float* u = m.output.row(target);
    float z = detail::dot(h_buf, u, dim);
    loss -= label > 0 ? sig.log_sigmoid(z) : sig.log_sigmoid(-z);
    float g = (label - sig.sigmoid(z)) * lr;
    for (std::uint32_t i = 0; i < dim; ++i) {
      e_buf[i] += g * u[i];
      u[i] += g * h_buf[i];
    }
  };

  update(center, 1.0f);
  for (int k = 0; k < n_neg; ++k) update(negatives[k], 0.0f);

  for (int c = 0; c < n_ctx; ++c) {
    float* row = m.input.row(context_ids[c]);
    for (std::uint32_t i = 0; i < dim; ++i) row[i] += e_buf[i] * inv_n;
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Window pair generation: per position an effective radius b is drawn
// uniformly from 1..window, and every in-bounds neighbor within +-b is
// paired with the center.
// ---------------------------------------------------------------------------

struct TrainingPair {
  std::uint32_t center;
  std::uint32_t context;
  bool operator==(const TrainingPair&) const = default;
};

inline void generate_pairs(std::span<const std::uint32_t> sentence, int window, Rng& rng,
                           std::vector<TrainingPair>& out) {
  out.clear();
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(sentence.size());
  for (std::ptrdiff_t pos = 0; pos < n; ++pos) {
    std::ptrdiff_t b = 1 + rng.below(static_cast<std::uint32_t>(window));
    std::ptrdiff_t lo = pos - b > 0 ? pos - b : 0;
    std::ptrdiff_t hi = pos + b < n - 1 ? pos + b : n - 1;
    for (std::ptrdiff_t j = lo; j <= hi; ++j)
      if (j != pos) out.push_back({sentence[pos], sentence[j]});
  }
}

inline std::vector<TrainingPair> generate_pairs(std::span<const std::uint32_t> sentence,
                                                int window, Rng& rng) {
  std::vector<TrainingPair> out;
  generate_pairs(sentence, window, rng, out);
  return out;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochStats {
  int epoch = 0;  // 1-based
  std::uint64_t pairs = 0;
  double mean_pair_loss = 0.0;
  std::uint64_t tokens = 0;
  double seconds = 0.0;
  double tokens_per_sec = 0.0;
  std::uint64_t skipped_windows = 0;  // cbow positions with an empty context
};

struct TrainingLog {
  std::vector<EpochStats> epochs;

  void save_tsv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write training log: " + path);
    out << "epoch\tpairs\tmean_pair_loss\ttokens\tseconds\ttokens_per_sec\tskipped_windows\n";
    for (const auto& e : epochs)
      out << e.epoch << '\t' << e.pairs << '\t' << e.mean_pair_loss << '\t' << e.tokens
          << '\t' << e.seconds << '\t' << e.tokens_per_sec << '\t' << e.skipped_windows
          << '\n';
  }
};

struct TrainResult {
  Vocabulary vocab;
  MatricesF matrices;
  TrainingLog log;
};

namespace detail {

struct WorkerTotals {
  double loss_sum = 0;
  std::uint64_t pairs = 0;
  std::uint64_t tokens = 0;
  std::uint64_t skipped = 0;
};

// Learning rate decays linearly with processed-token progress over all
// epochs, floored at initial_lr * lr_floor_fraction. Workers refresh from
// the shared token counter every couple thousand tokens.
class LrSchedule {
 public:
  LrSchedule(float initial, float floor_fraction, std::uint64_t token_budget)
      : initial_(initial), floor_(floor_fraction), budget_(token_budget ? token_budget : 1) {}

  float at(std::uint64_t tokens_done) const {
    double remaining = 1.0 - static_cast<double>(tokens_done) / static_cast<double>(budget_);
    if (remaining < floor_) remaining = floor_;
    return static_cast<float>(initial_ * remaining);
  }

 private:
  double initial_;
  double floor_;
  std::uint64_t budget_;
};

}  // namespace detail

// Runs cfg.epochs passes over the corpus, updating `m` in place. Workers
// partition the file by byte ranges and apply Hogwild updates without
// locking; results are bit-reproducible only at workers == 1.
inline TrainingLog train_epochs(const std::string& corpus_path, const Vocabulary& vocab,
                                MatricesF& m, const TrainingConfig& cfg,
                                const TokenizerConfig& tok = {}) {
  cfg.validate();
  if (vocab.empty()) throw TrainError("cannot train on an empty vocabulary");
  if (m.rows() != vocab.size())
    throw TrainError("matrix rows do not match vocabulary size");
  if (vocab.size() < 2) throw TrainError("vocabulary too small for negative sampling");

  const std::uint64_t fsize = file_size_bytes(corpus_path);
  const int workers = cfg.workers;
  const NegativeSampler sampler(vocab, cfg.sampler_power, cfg.seed);
  const SigmoidTable sigmoid;
  const detail::LrSchedule schedule(cfg.resolved_lr(), cfg.lr_floor_fraction,
                                    static_cast<std::uint64_t>(cfg.epochs) *
                                        vocab.total_tokens());

  std::atomic<std::uint64_t> global_tokens{0};
  std::atomic<bool> abort{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  TrainingLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<detail::WorkerTotals> totals(workers);
    auto t0 = std::chrono::steady_clock::now();

    auto run_worker = [&](int w) {
      try {
        Rng rng(Rng::mix(Rng::mix(cfg.seed, static_cast<std::uint64_t>(epoch)),
                         static_cast<std::uint64_t>(w)));
        FileRangeSentences src(corpus_path, tok, fsize * w / workers,
                               fsize * (w + 1) / workers);
        detail::WorkerTotals& tot = totals[w];
        std::vector<std::string> sent;
        std::vector<std::uint32_t> ids, ctx, negs;
        std::vector<float> e_buf(m.dim()), h_buf(m.dim());
        std::uint64_t pending_tokens = 0;
        float lr = schedule.at(global_tokens.load(std::memory_order_relaxed));

        auto check_finite = [&](float loss, std::uint32_t center, std::uint32_t context) {
          if (!std::isfinite(loss))
            throw TrainError("non-finite loss at pair center=" + std::to_string(center) +
                             " ('" + vocab.word(center) + "') context=" +
                             std::to_string(context) + " ('" + vocab.word(context) + "')");
        };

        while (src.next(sent)) {
          if (abort.load(std::memory_order_relaxed)) return;
          vocab.map_sentence(sent, ids);
          tot.tokens += ids.size();
          pending_tokens += ids.size();
          if (pending_tokens >= 2048) {
            lr = schedule.at(global_tokens.fetch_add(pending_tokens,
                                                     std::memory_order_relaxed) +
                             pending_tokens);
            pending_tokens = 0;
          }
          if (cfg.subsample_threshold > 0) {
            std::size_t kept = 0;
            for (std::size_t i = 0; i < ids.size(); ++i) {
              double keep = subsample_keep_probability(
                  vocab.count(ids[i]), vocab.total_tokens(), cfg.subsample_threshold);
              if (rng.next_double() < keep) ids[kept++] = ids[i];
            }
            ids.resize(kept);
          }

          const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(ids.size());
          for (std::ptrdiff_t pos = 0; pos < n; ++pos) {
            std::ptrdiff_t b = 1 + rng.below(static_cast<std::uint32_t>(cfg.window));
            std::ptrdiff_t lo = pos - b > 0 ? pos - b : 0;
            std::ptrdiff_t hi = pos + b < n - 1 ? pos + b : n - 1;
            if (cfg.model == ModelKind::sg) {
              for (std::ptrdiff_t j = lo; j <= hi; ++j) {
                if (j == pos) continue;
                sampler.sample_negatives(cfg.negatives, ids[j], rng, negs);
                float loss =
                    sg_step(m, ids[pos], ids[j], negs.data(),
                            static_cast<int>(negs.size()), lr, sigmoid, e_buf.data());
                check_finite(loss, ids[pos], ids[j]);
                tot.loss_sum += loss;
                tot.pairs += 1;
              }
            } else {
              ctx.clear();
              for (std::ptrdiff_t j = lo; j <= hi; ++j)
                if (j != pos) ctx.push_back(ids[j]);
              if (ctx.empty()) {
                tot.skipped += 1;
                continue;
              }
              sampler.sample_negatives(cfg.negatives, ids[pos], rng, negs);
              float loss = cbow_step(m, ctx.data(), static_cast<int>(ctx.size()),
                                     ids[pos], negs.data(), static_cast<int>(negs.size()),
                                     lr, sigmoid, h_buf.data(), e_buf.data());
              check_finite(loss, ids[pos], ids[pos]);
              tot.loss_sum += loss;
              tot.pairs += 1;
            }
          }
        }
        global_tokens.fetch_add(pending_tokens, std::memory_order_relaxed);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        abort.store(true, std::memory_order_relaxed);
      }
    };

    if (workers == 1) {
      run_worker(0);
    } else {
      std::vector<std::thread> threads;
      threads.reserve(workers);
      for (int w = 0; w < workers; ++w) threads.emplace_back(run_worker, w);
      for (auto& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    auto t1 = std::chrono::steady_clock::now();
    EpochStats st;
    st.epoch = epoch + 1;
    for (const auto& tot : totals) {
      st.pairs += tot.pairs;
      st.mean_pair_loss += tot.loss_sum;
      st.tokens += tot.tokens;
      st.skipped_windows += tot.skipped;
    }
    st.mean_pair_loss = st.pairs ? st.mean_pair_loss / static_cast<double>(st.pairs) : 0.0;
    st.seconds = std::chrono::duration<double>(t1 - t0).count();
    st.tokens_per_sec = st.seconds > 0 ? static_cast<double>(st.tokens) / st.seconds : 0.0;
    log.epochs.push_back(st);
  }
  return log;
}

inline TrainResult train(const std::string& corpus_path, const TrainingConfig& cfg,
                         const TokenizerConfig& tok = {}) {
  cfg.validate();
  TrainResult r;
  r.vocab = build_vocabulary_file(corpus_path, static_cast<std::uint32_t>(cfg.min_count), tok);
  if (r.vocab.empty())
    throw TrainError("vocabulary is empty after pruning (min_count=" +
                     std::to_string(cfg.min_count) + ")");
  r.matrices = init_matrices<float>(r.vocab.size(), cfg.dim, cfg.seed);
  r.log = train_epochs(corpus_path, r.vocab, r.matrices, cfg, tok);
  return r;
}

}  // namespace embedlab
