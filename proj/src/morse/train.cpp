#include "morse/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "morse/error.hpp"
#include "morse/rng.hpp"
#include "morse/text.hpp"

namespace morse::train {

namespace {

[[noreturn]] void invalid_config(const std::string& what) {
  throw Error(ErrorKind::Validation, "InvalidConfig", what);
}

std::uint64_t hash_window(const ImuWindow& w) {
  std::uint64_t h = 0x84222325CBF29CE4ull;
  for (double v : w.values()) h = mix_seed(h, std::bit_cast<std::uint64_t>(v));
  return h;
}

void check_disjoint(std::span<const LabeledWindow> a, std::span<const LabeledWindow> b) {
  std::unordered_multiset<std::uint64_t> seen;
  for (const auto& s : a) seen.insert(hash_window(s.window));
  for (const auto& s : b) {
    auto [lo, hi] = seen.equal_range(hash_window(s.window));
    for (auto it = lo; it != hi; ++it) {
      for (const auto& t : a) {
        if (t.window == s.window) {
          throw Error(ErrorKind::Validation, "OverlappingSplits",
                      "a validation window also appears in the training set");
        }
      }
    }
  }
}

struct Prepared {
  std::vector<ImuWindow> windows;
  std::vector<int> labels;
};

Prepared prepare(std::span<const LabeledWindow> set, const NormStats& norm) {
  Prepared p;
  p.windows.reserve(set.size());
  p.labels.reserve(set.size());
  for (const auto& s : set) {
    p.windows.push_back(normalize(s.window, norm));
    p.labels.push_back(label_code(s.label));
  }
  return p;
}

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalResult evaluate(const nn::Network& net, const Prepared& set, nn::Workspace& ws) {
  constexpr std::size_t kBatch = 256;
  EvalResult r;
  if (set.windows.empty()) return r;
  std::vector<const ImuWindow*> ptrs;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < set.windows.size(); start += kBatch) {
    const std::size_t end = std::min(set.windows.size(), start + kBatch);
    ptrs.clear();
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&set.windows[i]);
    const nn::Tensor& probs = net.forward(nn::pack_windows(ptrs), ws, false, nullptr);
    for (std::size_t j = 0; j < ptrs.size(); ++j) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < kNumClasses; ++c)
        if (probs.at(c, j, 0, 0) > probs.at(best, j, 0, 0)) best = c;
      const int y = set.labels[start + j];
      if (static_cast<int>(best) == y) ++correct;
      r.loss -= std::log(std::max(probs.at(static_cast<std::size_t>(y), j, 0, 0), 1e-300));
    }
  }
  r.loss /= static_cast<double>(set.windows.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(set.windows.size());
  return r;
}

double safe_div(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

}  // namespace

void AdamConfig::validate() const {
  if (!(lr > 0.0)) invalid_config("lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) invalid_config("beta1 must be in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) invalid_config("beta2 must be in [0,1)");
  if (!(epsilon > 0.0)) invalid_config("epsilon must be positive");
  if (!(decay >= 0.0)) invalid_config("decay must be non-negative");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw Error(ErrorKind::Validation, "ShapeMismatch", "adam: parameter/gradient size mismatch");
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double lr = cfg.lr / (1.0 + cfg.decay * (t - 1.0));
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.min_epochs = 2000;
  c.patience = 200;
  c.max_epochs = 10000;
  return c;
}

void TrainConfig::validate() const {
  if (patience < 1) invalid_config("patience must be at least 1");
  if (max_epochs < 1) invalid_config("max_epochs must be at least 1");
  if (max_epochs < min_epochs) invalid_config("max_epochs must not be below min_epochs");
}

nlohmann::json TrainResult::to_json() const {
  nlohmann::ordered_json j;
  j["epochs_run"] = epochs_run;
  j["best_epoch"] = best_epoch;
  j["best_val_accuracy"] = best_val_accuracy;
  j["best_val_loss"] = best_val_loss;
  nlohmann::json h = nlohmann::json::array();
  for (const auto& e : history) {
    h.push_back({{"epoch", e.epoch},
                 {"train_loss", e.train_loss},
                 {"train_accuracy", e.train_accuracy},
                 {"val_loss", e.val_loss},
                 {"val_accuracy", e.val_accuracy}});
  }
  j["history"] = h;
  return j;
}

TrainResult train(nn::Model& model, std::span<const LabeledWindow> train_set,
                  std::span<const LabeledWindow> val_set, const TrainConfig& cfg,
                  const AdamConfig& adam) {
  cfg.validate();
  adam.validate();
  if (train_set.empty()) throw Error(ErrorKind::Validation, "EmptyDataset", "empty training set");
  check_disjoint(train_set, val_set);

  nn::Network& net = model.network();
  const Prepared tr = prepare(train_set, model.norm());
  const Prepared va = prepare(val_set, model.norm());
  const std::size_t n = tr.windows.size();
  const std::size_t batch = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);
  const std::size_t n_layers = net.spec().layers.size();

  Rng rng(cfg.seed);
  AdamState state(net.param_count());
  nn::Workspace ws;
  nn::Tensor probs, dlogits;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const ImuWindow*> ptrs;
  std::vector<int> labels;

  TrainResult result;
  std::vector<double> best_params(net.params().values().begin(), net.params().values().end());
  bool have_best = false;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      ptrs.clear();
      labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        ptrs.push_back(&tr.windows[order[i]]);
        labels.push_back(tr.labels[order[i]]);
      }
      net.forward(nn::pack_windows(ptrs), ws, true, &rng);
      const double loss = nn::softmax_cross_entropy(ws.acts[n_layers - 1], labels, probs, dlogits);
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::Divergence, "NonFiniteLoss",
                    "training loss became non-finite at epoch " + std::to_string(epoch));
      }
      loss_sum += loss * static_cast<double>(labels.size());
      for (std::size_t j = 0; j < labels.size(); ++j) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < kNumClasses; ++c)
          if (probs.at(c, j, 0, 0) > probs.at(best, j, 0, 0)) best = c;
        if (static_cast<int>(best) == labels[j]) ++correct;
      }
      net.params().zero_grads();
      net.backward(ws, dlogits, n_layers - 2, net.params().grads());
      adam_step(net.params().values(), net.params().grads(), state, adam);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (cfg.eval_train_accuracy || cfg.stop_at_train_accuracy <= 1.0) {
      rec.train_accuracy = evaluate(net, tr, ws).accuracy;
    }
    const EvalResult v = evaluate(net, va, ws);
    rec.val_loss = v.loss;
    rec.val_accuracy = v.accuracy;
    result.history.push_back(rec);
    result.epochs_run = epoch;

    const bool improved = !have_best || v.accuracy > result.best_val_accuracy ||
                          (v.accuracy == result.best_val_accuracy && v.loss < result.best_val_loss);
    if (va.windows.empty() || improved) {
      have_best = true;
      since_best = 0;
      result.best_epoch = epoch;
      result.best_val_accuracy = v.accuracy;
      result.best_val_loss = v.loss;
      std::copy(net.params().values().begin(), net.params().values().end(), best_params.begin());
    } else {
      ++since_best;
    }
    if (rec.train_accuracy >= cfg.stop_at_train_accuracy) break;
    if (epoch >= cfg.min_epochs && since_best >= cfg.patience) break;
  }

  std::copy(best_params.begin(), best_params.end(), net.params().values().begin());
  model.round_to_storage_precision();
  model.training_summary() = {{"epochs_run", result.epochs_run},
                              {"best_epoch", result.best_epoch},
                              {"best_val_accuracy", result.best_val_accuracy},
                              {"best_val_loss", result.best_val_loss},
                              {"train_samples", n},
                              {"val_samples", va.windows.size()},
                              {"seed", cfg.seed}};
  return result;
}

double Metrics::random_to_goi_rate() const {
  const std::size_t rnd = label_code(GestureLabel::Random);
  std::uint64_t row = 0;
  for (auto v : confusion[rnd]) row += v;
  return safe_div(static_cast<double>(row - confusion[rnd][rnd]), static_cast<double>(row));
}

nlohmann::json Metrics::to_json() const {
  nlohmann::ordered_json j;
  j["total"] = total;
  j["accuracy"] = accuracy;
  j["macro_f1"] = macro_f1;
  nlohmann::ordered_json pc;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    pc[std::string(to_string(kAllGestures[c]))] = {{"precision", per_class[c].precision},
                                                   {"recall", per_class[c].recall},
                                                   {"f1", per_class[c].f1},
                                                   {"support", per_class[c].support}};
  }
  j["per_class"] = pc;
  j["confusion"] = confusion;
  j["random_to_goi_rate"] = random_to_goi_rate();
  j["fp_per_hour"] = project_false_positives(*this);
  return j;
}

Metrics metrics_from_confusion(const Confusion& confusion) {
  Metrics m;
  m.confusion = confusion;
  std::uint64_t trace = 0;
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    trace += confusion[t][t];
    for (std::size_t p = 0; p < kNumClasses; ++p) m.total += confusion[t][p];
  }
  m.accuracy = safe_div(static_cast<double>(trace), static_cast<double>(m.total));
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      row += confusion[c][k];
      col += confusion[k][c];
    }
    auto& pc = m.per_class[c];
    pc.support = row;
    pc.precision = safe_div(static_cast<double>(confusion[c][c]), static_cast<double>(col));
    pc.recall = safe_div(static_cast<double>(confusion[c][c]), static_cast<double>(row));
    pc.f1 = safe_div(2.0 * pc.precision * pc.recall, pc.precision + pc.recall);
    m.macro_f1 += pc.f1 / static_cast<double>(kNumClasses);
  }
  return m;
}

Metrics confusion_and_f1(std::span<const GestureLabel> truth,
                         std::span<const GestureLabel> predicted) {
  if (truth.size() != predicted.size()) {
    throw Error(ErrorKind::Validation, "ShapeMismatch", "truth and predictions differ in length");
  }
  Confusion c{};
  for (std::size_t i = 0; i < truth.size(); ++i) ++c[label_code(truth[i])][label_code(predicted[i])];
  return metrics_from_confusion(c);
}

double project_false_positives(double random_to_goi_rate, double windows_per_hour) {
  return random_to_goi_rate * windows_per_hour;
}

double project_false_positives(const Metrics& m, double windows_per_hour) {
  return project_false_positives(m.random_to_goi_rate(), windows_per_hour);
}

std::vector<FoldData> make_folds(const Dataset& data) {
  const std::vector<int> subjects = data.subjects();
  if (subjects.size() < 3) {
    throw Error(ErrorKind::Validation, "InsufficientSubjects",
                "cross-validation needs at least 3 subjects, found " +
                    std::to_string(subjects.size()));
  }
  std::vector<FoldData> folds(subjects.size());
  for (std::size_t f = 0; f < subjects.size(); ++f) {
    FoldData& fd = folds[f];
    fd.fold = f;
    fd.test_subject = subjects[f];
    fd.val_subject = subjects[(f + 1) % subjects.size()];
    for (int s : subjects)
      if (s != fd.test_subject && s != fd.val_subject) fd.train_subjects.push_back(s);
    for (const auto& s : data.samples) {
      if (s.subject_id == fd.test_subject) fd.test.push_back(s);
      else if (s.subject_id == fd.val_subject) fd.val.push_back(s);
      else fd.train.push_back(s);
    }
  }
  return folds;
}

std::uint64_t run_seed(std::uint64_t master, std::size_t fold, std::size_t run) {
  return mix_seed(mix_seed(master, fold), run);
}

LosoReport loso_cv(const Dataset& data, const std::string& model_name, const FoldRunner& runner,
                   const LosoConfig& cfg) {
  if (cfg.runs < 1) invalid_config("runs must be at least 1");
  const std::vector<FoldData> folds = make_folds(data);
  const std::size_t n_tasks = folds.size() * cfg.runs;
  std::vector<RunOutcome> outcomes(n_tasks);
  std::vector<std::exception_ptr> errors(n_tasks);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < n_tasks; t = next++) {
      const std::size_t f = t / cfg.runs, r = t % cfg.runs;
      try {
        outcomes[t] = runner(folds[f], run_seed(cfg.master_seed, f, r));
        if (outcomes[t].predictions.size() != folds[f].test.size()) {
          throw Error(ErrorKind::Validation, "ShapeMismatch", "runner returned wrong count");
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(cfg.threads, 1, n_tasks);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  LosoReport rep;
  rep.model = model_name;
  rep.config = cfg.echo;
  rep.config["runs"] = cfg.runs;
  rep.config["master_seed"] = cfg.master_seed;
  Confusion pooled{};
  for (const auto& fd : folds) {
    FoldResult fr;
    fr.fold = fd.fold;
    fr.test_subject = fd.test_subject;
    fr.val_subject = fd.val_subject;
    fr.test_size = fd.test.size();
    std::vector<GestureLabel> truth;
    for (const auto& s : fd.test) truth.push_back(s.label);
    for (std::size_t r = 0; r < cfg.runs; ++r) {
      const RunOutcome& o = outcomes[fd.fold * cfg.runs + r];
      const Metrics m = confusion_and_f1(truth, o.predictions);
      fr.run_accuracies.push_back(m.accuracy);
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        fr.mean_f1[c] += m.per_class[c].f1 / static_cast<double>(cfg.runs);
        for (std::size_t k = 0; k < kNumClasses; ++k) {
          fr.confusion[c][k] += m.confusion[c][k];
          pooled[c][k] += m.confusion[c][k];
        }
      }
      fr.run_info.push_back(o.info);
    }
    fr.mean_accuracy = std::accumulate(fr.run_accuracies.begin(), fr.run_accuracies.end(), 0.0) /
                       static_cast<double>(cfg.runs);
    rep.folds.push_back(std::move(fr));
  }
  for (const auto& fr : rep.folds) rep.mean_accuracy += fr.mean_accuracy;
  rep.mean_accuracy /= static_cast<double>(rep.folds.size());
  for (const auto& fr : rep.folds) {
    const double d = fr.mean_accuracy - rep.mean_accuracy;
    rep.std_accuracy += d * d;
  }
  rep.std_accuracy = std::sqrt(rep.std_accuracy / static_cast<double>(rep.folds.size()));
  rep.pooled = metrics_from_confusion(pooled);
  rep.fp_per_hour = project_false_positives(rep.pooled);
  return rep;
}

nlohmann::json LosoReport::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["config"] = config;
  nlohmann::ordered_json pf = nlohmann::ordered_json::array();
  for (const auto& f : folds) {
    nlohmann::ordered_json fj;
    fj["fold"] = f.fold + 1;
    fj["test_subject"] = f.test_subject;
    fj["val_subject"] = f.val_subject;
    fj["test_size"] = f.test_size;
    fj["accuracy"] = f.mean_accuracy;
    fj["run_accuracies"] = f.run_accuracies;
    nlohmann::ordered_json f1;
    for (std::size_t c = 0; c < kNumClasses; ++c) f1[std::string(to_string(kAllGestures[c]))] = f.mean_f1[c];
    fj["per_class_f1"] = f1;
    fj["confusion"] = f.confusion;
    fj["runs"] = f.run_info;
    pf.push_back(fj);
  }
  j["per_fold"] = pf;
  j["mean_accuracy"] = mean_accuracy;
  j["std_accuracy"] = std_accuracy;
  nlohmann::ordered_json f1;
  for (std::size_t c = 0; c < kNumClasses; ++c) f1[std::string(to_string(kAllGestures[c]))] = pooled.per_class[c].f1;
  j["per_class_f1"] = f1;
  j["macro_f1"] = pooled.macro_f1;
  j["confusion"] = pooled.confusion;
  j["random_to_goi_rate"] = pooled.random_to_goi_rate();
  j["fp_per_hour"] = fp_per_hour;
  j["unimplemented"] = {"conv-lstm"};
  return j;
}

std::string LosoReport::table() const {
  std::ostringstream os;
  char line[160];
  os << "model " << model << '\n';
  std::snprintf(line, sizeof line, "%-5s %-5s %-5s %-6s %-9s", "fold", "test", "val", "n", "accuracy");
  os << line;
  for (GestureLabel g : kAllGestures) {
    std::snprintf(line, sizeof line, " %-6s", ("F1_" + std::string(to_string(g))).c_str());
    os << line;
  }
  os << '\n';
  for (const auto& f : folds) {
    std::snprintf(line, sizeof line, "%-5zu %-5d %-5d %-6zu %-9.4f", f.fold + 1, f.test_subject,
                  f.val_subject, f.test_size, f.mean_accuracy);
    os << line;
    for (double v : f.mean_f1) {
      std::snprintf(line, sizeof line, " %-6.3f", v);
      os << line;
    }
    os << '\n';
  }
  std::snprintf(line, sizeof line, "mean accuracy %.4f (std %.4f), macro F1 %.4f, FP/hour %.1f\n",
                mean_accuracy, std_accuracy, pooled.macro_f1, fp_per_hour);
  os << line;
  return os.str();
}

FoldRunner make_cnn_runner(nn::ModelSpec spec, const TrainConfig& train_cfg,
                           const AdamConfig& adam) {
  train_cfg.validate();
  adam.validate();
  return [spec, train_cfg, adam](const FoldData& fold, std::uint64_t seed) {
    const NormStats norm = compute_norm_stats(fold.train);
    nn::Model model(spec, norm, mix_seed(seed, 1));
    TrainConfig tc = train_cfg;
    tc.seed = mix_seed(seed, 2);
    const TrainResult tr = train(model, fold.train, fold.val, tc, adam);
    RunOutcome out;
    std::vector<ImuWindow> windows;
    windows.reserve(fold.test.size());
    for (const auto& s : fold.test) windows.push_back(s.window);
    for (const auto& p : model.probabilities(windows, 256)) out.predictions.push_back(nn::decide(p).label);
    out.info = {{"epochs_run", tr.epochs_run},
                {"best_epoch", tr.best_epoch},
                {"best_val_accuracy", tr.best_val_accuracy}};
    return out;
  };
}

nlohmann::json BenchStats::to_json() const {
  return {{"n", n}, {"mean_ms", mean_ms}, {"p95_ms", p95_ms}, {"min_ms", min_ms}, {"max_ms", max_ms}};
}

BenchStats benchmark_inference(const nn::Model& model, std::span<const ImuWindow> windows,
                               std::size_t n) {
  if (n == 0 || windows.empty()) {
    throw Error(ErrorKind::Validation, "EmptyBenchmark", "benchmark needs at least one window");
  }
  using clock = std::chrono::steady_clock;
  std::vector<double> times(n);
  volatile double sink = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto t0 = clock::now();
    sink = sink + nn::predict(model, windows[i % windows.size()]).confidence;
    times[i] = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  }
  BenchStats s;
  s.n = n;
  s.mean_ms = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(n);
  std::sort(times.begin(), times.end());
  s.min_ms = times.front();
  s.max_ms = times.back();
  const std::size_t idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1;
  s.p95_ms = times[std::min(idx, n - 1)];
  return s;
}

}  // namespace morse::train
