#include "morse/morse.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <variant>

#include "morse/baselines.hpp"
#include "morse/dataset_io.hpp"
#include "morse/error.hpp"
#include "morse/features.hpp"
#include "morse/mesh.hpp"
#include "morse/morse_code.hpp"
#include "morse/nn_io.hpp"
#include "morse/synth.hpp"
#include "morse/text.hpp"
#include "morse/train.hpp"

using morse::Error;
using morse::ErrorKind;

struct morse_dataset {
  morse::Dataset data;
};

struct morse_model {
  std::variant<morse::nn::Model, morse::baselines::Classifier> m;
};

struct morse_sim {
  morse::mesh::Simulator sim;
};

namespace {

thread_local std::string g_error_code;
thread_local std::string g_error_message;

morse_status status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage: return MORSE_ERR_USAGE;
    case ErrorKind::Io: return MORSE_ERR_IO;
    case ErrorKind::Format: return MORSE_ERR_FORMAT;
    case ErrorKind::Validation: return MORSE_ERR_VALIDATION;
    case ErrorKind::Divergence: return MORSE_ERR_DIVERGENCE;
  }
  return MORSE_ERR_INTERNAL;
}

template <typename F>
morse_status guard(F&& f) {
  try {
    f();
    return MORSE_OK;
  } catch (const Error& e) {
    g_error_code = e.code();
    g_error_message = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_error_code = "OutOfMemory";
    g_error_message = "out of memory";
  } catch (const std::exception& e) {
    g_error_code = "Internal";
    g_error_message = e.what();
  } catch (...) {
    g_error_code = "Internal";
    g_error_message = "unknown error";
  }
  return MORSE_ERR_INTERNAL;
}

void need(const void* p, const char* name) {
  if (p == nullptr) throw Error(ErrorKind::Usage, "NullArgument", std::string(name) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put_string(char** out, const std::string& s) {
  if (out != nullptr) *out = dup_string(s);
}

morse::ImuWindow window_from(const double* values) {
  need(values, "window");
  return morse::ImuWindow::from_values(std::span<const double>(values, morse::kWindowValues));
}

bool is_cnn_name(std::string_view s) { return s == "cnn-lp" || s == "cnn-max"; }

morse::train::TrainConfig train_config(const morse_train_options& o) {
  morse::train::TrainConfig c;
  c.min_epochs = o.min_epochs;
  c.patience = o.patience;
  c.max_epochs = o.max_epochs;
  c.batch_size = o.batch_size;
  c.seed = o.seed;
  c.validate();
  return c;
}

morse::baselines::Options baseline_options(const morse_train_options& o) {
  morse::baselines::Options b;
  b.knn_k = o.knn_k;
  b.lr.epochs = o.lr_epochs;
  b.dt.max_depth = o.max_depth;
  b.dt.min_samples_leaf = o.min_samples_leaf;
  b.rf.n_trees = o.trees;
  b.rf.tree.max_depth = o.max_depth;
  b.rf.tree.min_samples_leaf = o.min_samples_leaf;
  return b;
}

morse::nn::ModelSpec cnn_spec(std::string_view variant, bool max_pool) {
  return morse::nn::make_spec(morse::nn::parse_variant(variant),
                              max_pool ? morse::nn::GlobalPoolMode::Max
                                       : morse::nn::GlobalPoolMode::Average);
}

nlohmann::json options_json(const morse_train_options& o) {
  nlohmann::ordered_json j;
  j["model"] = o.model;
  if (is_cnn_name(o.model)) {
    j["min_epochs"] = o.min_epochs;
    j["patience"] = o.patience;
    j["max_epochs"] = o.max_epochs;
    j["batch_size"] = o.batch_size;
    j["global_pool"] = o.global_max_pool ? "max" : "avg";
  } else {
    j["knn_k"] = o.knn_k;
    j["lr_epochs"] = o.lr_epochs;
    j["trees"] = o.trees;
    j["max_depth"] = o.max_depth;
    j["min_samples_leaf"] = o.min_samples_leaf;
  }
  j["seed"] = o.seed;
  return j;
}

morse::nn::Prediction predict_any(const morse_model& m, const morse::ImuWindow& w,
                                  double threshold) {
  if (const auto* cnn = std::get_if<morse::nn::Model>(&m.m)) {
    return morse::nn::predict(*cnn, w, threshold);
  }
  if (threshold != 0.0) {
    throw Error(ErrorKind::Usage, "InvalidThreshold", "thresholds apply to CNN models only");
  }
  return morse::baselines::predict(std::get<morse::baselines::Classifier>(m.m), w);
}

const morse::nn::Model& cnn_of(const morse_model* m) {
  need(m, "model");
  const auto* cnn = std::get_if<morse::nn::Model>(&m->m);
  if (cnn == nullptr) {
    throw Error(ErrorKind::Usage, "NotSupported", "operation needs a CNN model");
  }
  return *cnn;
}

std::vector<morse::ImuSample> read_samples_csv(const char* path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "IoError", std::string("cannot open ") + path);
  std::vector<morse::ImuSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (morse::text::trim(line).empty()) continue;
    const auto cells = morse::text::split(line, ',');
    if (lineno == 1 && !cells.empty() && morse::text::trim(cells[0]) == "t_ms") continue;
    if (cells.size() != 7) {
      throw Error(ErrorKind::Format, "ParseError",
                  "line " + std::to_string(lineno) + ": expected t_ms,ax,ay,az,gx,gy,gz");
    }
    double v[7];
    for (std::size_t i = 0; i < 7; ++i) {
      if (!morse::text::parse_double(morse::text::trim(cells[i]), v[i]) || !std::isfinite(v[i])) {
        throw Error(ErrorKind::Format, "ParseError",
                    "line " + std::to_string(lineno) + ": bad number '" + std::string(cells[i]) + "'");
      }
    }
    out.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6]});
  }
  return out;
}

}  // namespace

extern "C" {

const char* morse_version(void) { return "morse 1.0.0 (model format 1)"; }

uint32_t morse_model_format_version(void) { return morse::nn::kModelFormatVersion; }

const char* morse_last_error_code(void) { return g_error_code.c_str(); }

const char* morse_last_error_message(void) { return g_error_message.c_str(); }

void morse_string_free(char* s) { std::free(s); }

const char* morse_label_name(int code) {
  if (code < 0 || code >= static_cast<int>(morse::kNumClasses)) return nullptr;
  return morse::to_string(morse::label_from_code(code)).data();
}

morse_status morse_label_parse(const char* name, int* code) {
  return guard([&] {
    need(name, "name");
    need(code, "code");
    *code = morse::label_code(morse::parse_gesture(name));
  });
}

morse_gen_options morse_gen_options_default(void) {
  const morse::synth::GenOptions d;
  return {d.n_subjects, d.per_class, d.table3 ? 1 : 0, d.noise_std, d.master_seed};
}

morse_status morse_dataset_generate(const morse_gen_options* opt, morse_dataset** out) {
  return guard([&] {
    need(opt, "options");
    need(out, "out");
    morse::synth::GenOptions g;
    g.n_subjects = opt->subjects;
    g.per_class = opt->per_class;
    g.table3 = opt->table3 != 0;
    g.noise_std = opt->noise_std;
    g.master_seed = opt->seed;
    auto ds = std::make_unique<morse_dataset>();
    ds->data = morse::synth::gen_dataset(g);
    *out = ds.release();
  });
}

morse_status morse_dataset_load(const char* path, morse_dataset** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto ds = std::make_unique<morse_dataset>();
    ds->data = morse::load_dataset(path);
    *out = ds.release();
  });
}

morse_status morse_dataset_save(const morse_dataset* ds, const char* path) {
  return guard([&] {
    need(ds, "dataset");
    need(path, "path");
    morse::save_dataset(path, ds->data);
  });
}

void morse_dataset_free(morse_dataset* ds) { delete ds; }

morse_status morse_dataset_size(const morse_dataset* ds, size_t* n) {
  return guard([&] {
    need(ds, "dataset");
    need(n, "n");
    *n = ds->data.samples.size();
  });
}

morse_status morse_dataset_sample(const morse_dataset* ds, size_t index, int* subject, char* hand,
                                  int* label, double* values) {
  return guard([&] {
    need(ds, "dataset");
    if (index >= ds->data.samples.size()) {
      throw Error(ErrorKind::Usage, "OutOfRange", "sample index out of range");
    }
    const auto& s = ds->data.samples[index];
    if (subject) *subject = s.subject_id;
    if (hand) *hand = morse::hand_code(s.hand);
    if (label) *label = morse::label_code(s.label);
    if (values) std::copy(s.window.values().begin(), s.window.values().end(), values);
  });
}

morse_status morse_features_save(const morse_dataset* ds, const char* path, int raw_kurtosis) {
  return guard([&] {
    need(ds, "dataset");
    need(path, "path");
    const auto rows = morse::features::extract_all(
        ds->data, raw_kurtosis ? morse::features::KurtosisConvention::Raw
                               : morse::features::KurtosisConvention::Excess);
    morse::features::save_features_csv(path, rows);
  });
}

morse_train_options morse_train_options_default(void) {
  const morse::train::TrainConfig t;
  const morse::baselines::Options b;
  morse_train_options o{};
  o.model = "cnn-lp";
  o.min_epochs = t.min_epochs;
  o.patience = t.patience;
  o.max_epochs = t.max_epochs;
  o.batch_size = t.batch_size;
  o.seed = 1;
  o.global_max_pool = 0;
  o.val_subject = 0;
  o.knn_k = b.knn_k;
  o.lr_epochs = b.lr.epochs;
  o.trees = b.rf.n_trees;
  o.max_depth = b.dt.max_depth;
  o.min_samples_leaf = b.dt.min_samples_leaf;
  o.runs = 5;
  o.threads = 1;
  return o;
}

void morse_train_options_paper_epochs(morse_train_options* opt) {
  if (opt == nullptr) return;
  const auto p = morse::train::TrainConfig::paper();
  opt->min_epochs = p.min_epochs;
  opt->patience = p.patience;
  opt->max_epochs = p.max_epochs;
}

morse_status morse_model_train(const morse_dataset* ds, const morse_train_options* opt,
                               morse_model** out, char** summary_json) {
  return guard([&] {
    need(ds, "dataset");
    need(opt, "options");
    need(opt->model, "options.model");
    need(out, "out");
    const auto& data = ds->data;
    const auto subjects = data.subjects();
    if (subjects.empty()) throw Error(ErrorKind::Validation, "EmptyDataset", "dataset is empty");
    nlohmann::ordered_json summary;
    summary["config"] = options_json(*opt);

    if (is_cnn_name(opt->model)) {
      if (subjects.size() < 2) {
        throw Error(ErrorKind::Validation, "InsufficientSubjects",
                    "training needs a separate validation subject");
      }
      const int val = opt->val_subject == 0 ? subjects.back() : opt->val_subject;
      if (std::find(subjects.begin(), subjects.end(), val) == subjects.end()) {
        throw Error(ErrorKind::Usage, "UnknownSubject", "validation subject not in dataset");
      }
      std::vector<morse::LabeledWindow> tr, va;
      for (const auto& s : data.samples) (s.subject_id == val ? va : tr).push_back(s);
      const auto tc = train_config(*opt);
      morse::nn::Model model(cnn_spec(opt->model, opt->global_max_pool != 0),
                             morse::compute_norm_stats(tr), morse::mix_seed(opt->seed, 1));
      morse::train::TrainConfig run = tc;
      run.seed = morse::mix_seed(opt->seed, 2);
      const auto result = morse::train::train(model, tr, va, run);
      summary["val_subject"] = val;
      summary["result"] = result.to_json();
      model.training_summary()["val_subject"] = val;
      *out = new morse_model{std::move(model)};
    } else {
      const auto kind = morse::baselines::parse_kind(opt->model);
      auto c = morse::baselines::fit(kind, data.samples, baseline_options(*opt), opt->seed);
      summary["train_samples"] = data.samples.size();
      *out = new morse_model{std::move(c)};
    }
    put_string(summary_json, summary.dump(2));
  });
}

morse_status morse_loso(const morse_dataset* ds, const morse_train_options* opt, char** report_json,
                        char** table) {
  return guard([&] {
    need(ds, "dataset");
    need(opt, "options");
    need(opt->model, "options.model");
    morse::train::LosoConfig lc;
    lc.runs = opt->runs;
    lc.master_seed = opt->seed;
    lc.threads = opt->threads;
    lc.echo = options_json(*opt);
    lc.echo["threads"] = opt->threads;
    morse::train::FoldRunner runner;
    if (is_cnn_name(opt->model)) {
      runner = morse::train::make_cnn_runner(cnn_spec(opt->model, opt->global_max_pool != 0),
                                             train_config(*opt));
    } else {
      runner = morse::baselines::make_runner(morse::baselines::parse_kind(opt->model),
                                             baseline_options(*opt));
    }
    const auto rep = morse::train::loso_cv(ds->data, opt->model, runner, lc);
    put_string(report_json, rep.to_json().dump(2));
    put_string(table, rep.table());
  });
}

morse_status morse_model_create(const char* variant, uint64_t init_seed, int global_max_pool,
                                morse_model** out) {
  return guard([&] {
    need(variant, "variant");
    need(out, "out");
    morse::NormStats identity;
    identity.std.fill(1.0);
    *out = new morse_model{morse::nn::Model(cnn_spec(variant, global_max_pool != 0), identity, init_seed)};
  });
}

morse_status morse_model_load(const char* path, morse_model** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    if (morse::nn::is_model_file(path)) {
      *out = new morse_model{morse::nn::load_model(path)};
    } else {
      *out = new morse_model{morse::baselines::load_classifier(path)};
    }
  });
}

morse_status morse_model_save(const morse_model* m, const char* path) {
  return guard([&] {
    need(m, "model");
    need(path, "path");
    if (const auto* cnn = std::get_if<morse::nn::Model>(&m->m)) {
      morse::nn::save_model(path, *cnn);
    } else {
      morse::baselines::save_classifier(path, std::get<morse::baselines::Classifier>(m->m));
    }
  });
}

void morse_model_free(morse_model* m) { delete m; }

const char* morse_model_kind(const morse_model* m) {
  if (m == nullptr) return nullptr;
  if (const auto* cnn = std::get_if<morse::nn::Model>(&m->m)) {
    return morse::nn::to_string(cnn->network().spec().variant).data();
  }
  return morse::baselines::to_string(std::get<morse::baselines::Classifier>(m->m).kind).data();
}

morse_status morse_model_param_count(const morse_model* m, size_t* n) {
  return guard([&] {
    need(n, "n");
    *n = cnn_of(m).param_count();
  });
}

morse_status morse_model_predict(const morse_model* m, const double* window, double threshold,
                                 int* label, double* confidence) {
  return guard([&] {
    need(m, "model");
    const auto p = predict_any(*m, window_from(window), threshold);
    if (label) *label = morse::label_code(p.label);
    if (confidence) *confidence = p.confidence;
  });
}

morse_status morse_model_probabilities(const morse_model* m, const double* window, double* probs) {
  return guard([&] {
    need(probs, "probs");
    const auto p = cnn_of(m).probabilities(window_from(window));
    std::copy(p.begin(), p.end(), probs);
  });
}

morse_status morse_model_evaluate(const morse_model* m, const morse_dataset* ds,
                                  char** metrics_json) {
  return guard([&] {
    need(m, "model");
    need(ds, "dataset");
    std::vector<morse::GestureLabel> truth, pred;
    if (const auto* cnn = std::get_if<morse::nn::Model>(&m->m)) {
      std::vector<morse::ImuWindow> windows;
      for (const auto& s : ds->data.samples) windows.push_back(s.window);
      for (const auto& p : cnn->probabilities(windows, 256)) pred.push_back(morse::nn::decide(p).label);
    } else {
      for (const auto& s : ds->data.samples) pred.push_back(predict_any(*m, s.window, 0.0).label);
    }
    for (const auto& s : ds->data.samples) truth.push_back(s.label);
    nlohmann::ordered_json j;
    j["model"] = morse_model_kind(m);
    j["samples"] = truth.size();
    j["metrics"] = morse::train::confusion_and_f1(truth, pred).to_json();
    put_string(metrics_json, j.dump(2));
  });
}

morse_status morse_model_dump_activations(const morse_model* m, const double* window, size_t layer,
                                          size_t row, const char* path) {
  return guard([&] {
    need(path, "path");
    const auto dump = morse::nn::dump_activations(cnn_of(m), window_from(window), layer, row);
    morse::nn::save_activation_csv(path, dump);
  });
}

morse_status morse_model_describe(const morse_model* m, char** json) {
  return guard([&] {
    need(json, "json");
    const auto& net = cnn_of(m).network();
    nlohmann::ordered_json j;
    j["variant"] = morse::nn::to_string(net.spec().variant);
    j["param_count"] = net.param_count();
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t i = 0; i < net.spec().layers.size(); ++i) {
      auto l = morse::nn::layer_to_json(net.spec().layers[i], net.shapes()[i]);
      l["index"] = i;
      layers.push_back(l);
    }
    j["layers"] = layers;
    j["training_summary"] = cnn_of(m).training_summary();
    *json = dup_string(j.dump(2));
  });
}

morse_status morse_bench(const morse_model* m, size_t n, uint64_t seed, char** json) {
  return guard([&] {
    const auto& model = cnn_of(m);
    if (n == 0) throw Error(ErrorKind::Validation, "EmptyBenchmark", "n must be positive");
    const auto profile = morse::synth::make_profile(1, seed, morse::synth::kDefaultNoiseStd);
    morse::Rng rng(seed);
    std::vector<morse::ImuWindow> windows;
    for (std::size_t i = 0; i < std::min<std::size_t>(n, 64); ++i) {
      windows.push_back(morse::synth::gen_window(
          morse::kAllGestures[i % morse::kNumClasses], profile, rng));
    }
    const auto stats = morse::train::benchmark_inference(model, windows, n);
    nlohmann::ordered_json j;
    j["model"] = morse::nn::to_string(model.network().spec().variant);
    j["param_count"] = model.param_count();
    j["latency"] = stats.to_json();
    put_string(json, j.dump(2));
  });
}

morse_status morse_infer_stream(const morse_model* m, const char* samples_csv, double threshold,
                                morse_prediction_cb cb, void* user) {
  return guard([&] {
    need(m, "model");
    need(samples_csv, "path");
    need(reinterpret_cast<const void*>(cb), "callback");
    const auto samples = read_samples_csv(samples_csv);
    for (const auto& tw : morse::sliding_windows(samples)) {
      const auto p = predict_any(*m, tw.window, threshold);
      cb(user, tw.end_ms, morse::label_code(p.label), p.confidence);
    }
  });
}

namespace {
morse::code::Timing timing_with_gap(int intra_gap_ms) {
  if (intra_gap_ms < 0) throw Error(ErrorKind::Usage, "InvalidTiming", "intra gap must be positive");
  morse::code::Timing t;
  if (intra_gap_ms > 0) t.intra_gap_ms = intra_gap_ms;
  t.validate();
  return t;
}
}  // namespace

morse_status morse_gesture_code(const char* gesture, char** code) {
  return guard([&] {
    need(gesture, "gesture");
    need(code, "code");
    *code = dup_string(morse::code::gesture_to_morse(morse::parse_gesture(gesture)).str());
  });
}

morse_status morse_code_timeline(const char* code, int intra_gap_ms, char** timeline) {
  return guard([&] {
    need(code, "code");
    need(timeline, "timeline");
    const auto t = morse::code::morse_to_timeline(morse::code::MorseCode::parse(code),
                                                  timing_with_gap(intra_gap_ms));
    *timeline = dup_string(morse::code::format_timeline(t));
  });
}

morse_status morse_timeline_decode(const char* timeline, int intra_gap_ms, char** code) {
  return guard([&] {
    need(timeline, "timeline");
    need(code, "code");
    morse::code::VibrationTimeline t;
    std::istringstream is(timeline);
    std::string state;
    std::string ms;
    std::size_t line = 0;
    while (is >> state) {
      ++line;
      if (!(is >> ms)) throw Error(ErrorKind::Format, "ParseError", "timeline: missing duration");
      long long v = 0;
      if ((state != "ON" && state != "OFF") || !morse::text::parse_int(ms, v)) {
        throw Error(ErrorKind::Format, "ParseError",
                    "timeline segment " + std::to_string(line) + ": expected ON|OFF <ms>");
      }
      t.push_back({state == "ON" ? morse::code::Vibration::On : morse::code::Vibration::Off,
                   static_cast<int>(v)});
    }
    *code = dup_string(morse::code::timeline_to_morse(t, timing_with_gap(intra_gap_ms)).str());
  });
}

morse_sim_options morse_sim_options_default(void) {
  const morse::mesh::SimConfig c;
  return {c.radio_range_m, c.drop_probability, c.latency_ms, c.broadcast_ms, -1, c.seed};
}

morse_status morse_sim_create(const morse_sim_options* opt, morse_sim** out) {
  return guard([&] {
    need(opt, "options");
    need(out, "out");
    morse::mesh::SimConfig c;
    c.radio_range_m = opt->radio_range_m;
    c.drop_probability = opt->drop_probability;
    c.latency_ms = opt->latency_ms;
    c.broadcast_ms = opt->broadcast_ms;
    c.seed = opt->seed;
    if (opt->dedup_timeout_ms >= 0) c.dedup_timeout_ms = opt->dedup_timeout_ms;
    if (!(c.radio_range_m >= 0.0) || !(c.drop_probability >= 0.0 && c.drop_probability <= 1.0) ||
        c.latency_ms < 0 || c.broadcast_ms < 1) {
      throw Error(ErrorKind::Usage, "InvalidConfig", "invalid simulation options");
    }
    *out = new morse_sim{morse::mesh::Simulator(c)};
  });
}

void morse_sim_free(morse_sim* sim) { delete sim; }

morse_status morse_sim_load_script(morse_sim* sim, const char* text) {
  return guard([&] {
    need(sim, "sim");
    need(text, "text");
    const auto actions = morse::mesh::parse_script(text);
    sim->sim.load(actions);
  });
}

morse_status morse_sim_schedule_gesture(morse_sim* sim, const char* node, int64_t t_ms, int label,
                                        double confidence) {
  return guard([&] {
    need(sim, "sim");
    need(node, "node");
    const std::string line = std::to_string(t_ms) + " " + node + " gesture " +
                             std::string(morse::to_string(morse::label_from_code(label))) + " " +
                             morse::text::format_double(confidence);
    sim->sim.load(morse::mesh::parse_script(line));
  });
}

morse_status morse_sim_run(morse_sim* sim) {
  return guard([&] {
    need(sim, "sim");
    sim->sim.run();
  });
}

morse_status morse_sim_log(const morse_sim* sim, char** text) {
  return guard([&] {
    need(sim, "sim");
    need(text, "text");
    *text = dup_string(sim->sim.log_text());
  });
}

morse_status morse_sim_watch(const morse_sim* sim, const char* node, char** text) {
  return guard([&] {
    need(sim, "sim");
    need(node, "node");
    need(text, "text");
    *text = dup_string(sim->sim.watch_panel(node));
  });
}

}  // extern "C"
