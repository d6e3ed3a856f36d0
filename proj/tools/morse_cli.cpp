// Command-line front end. Talks to the library only through morse/morse.h.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "morse/morse.h"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitInvalid = 4;
constexpr int kExitDivergence = 5;

struct Failure {
  int exit_code;
  std::string code;
  std::string message;
};

int exit_code_for(morse_status s) {
  switch (s) {
    case MORSE_OK: return 0;
    case MORSE_ERR_USAGE: return kExitUsage;
    case MORSE_ERR_IO: return kExitIo;
    case MORSE_ERR_FORMAT:
    case MORSE_ERR_VALIDATION: return kExitInvalid;
    case MORSE_ERR_DIVERGENCE: return kExitDivergence;
    case MORSE_ERR_INTERNAL: break;
  }
  return 1;
}

void check(morse_status s) {
  if (s != MORSE_OK) throw Failure{exit_code_for(s), morse_last_error_code(), morse_last_error_message()};
}

[[noreturn]] void usage_error(const std::string& code, const std::string& msg) {
  throw Failure{kExitUsage, code, msg};
}

// Owns a string returned by the library.
struct LibString {
  char* p = nullptr;
  ~LibString() { morse_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  ~Handle() { Free(p); }
};
using Dataset = Handle<morse_dataset, morse_dataset_free>;
using Model = Handle<morse_model, morse_model_free>;
using Sim = Handle<morse_sim, morse_sim_free>;

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path);
  if (!os) throw Failure{kExitIo, "IoError", "cannot open " + path + " for writing"};
  os << text;
  if (!os) throw Failure{kExitIo, "IoError", "write failed: " + path};
}

std::string read_text(const std::string& path) {
  std::ostringstream ss;
  if (path == "-") {
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream is(path);
  if (!is) throw Failure{kExitIo, "IoError", "cannot open " + path};
  ss << is.rdbuf();
  return ss.str();
}

int verbosity = 0;

void info(const std::string& msg) {
  if (verbosity > 0) std::cerr << msg << '\n';
}

// ---------------------------------------------------------------- config merging

struct ConfigFile {
  std::map<std::string, std::string> values;
};

// key = value lines; '#' starts a comment. Keys are long option names
// without the leading dashes.
ConfigFile read_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Failure{kExitIo, "IoError", "cannot open config " + path};
  ConfigFile cfg;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Failure{kExitInvalid, "ParseError",
                    "config line " + std::to_string(lineno) + ": expected key = value"};
    }
    cfg.values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

bool has_flag(const std::vector<std::string>& args, const std::string& name) {
  for (const auto& a : args) {
    if (a == name || a.rfind(name + "=", 0) == 0) return true;
  }
  return false;
}

// Adds environment and config-file values for options the command line left
// unset, in that order of priority.
std::vector<std::string> merge_sources(CLI::App& app, std::vector<std::string> args) {
  CLI::App* sub = nullptr;
  std::size_t sub_pos = 0;
  for (std::size_t i = 1; i < args.size(); ++i) {
    for (auto* s : app.get_subcommands({})) {
      if (s->get_name() == args[i]) {
        sub = s;
        sub_pos = i;
        break;
      }
    }
    if (sub) break;
  }
  if (sub == nullptr) return args;

  std::optional<ConfigFile> cfg;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) cfg = read_config(args[i + 1]);
    else if (args[i].rfind("--config=", 0) == 0) cfg = read_config(args[i].substr(9));
  }

  std::vector<std::string> extra;
  auto supply = [&](const std::string& key, const std::string& value) {
    const std::string flag = "--" + key;
    if (has_flag(args, flag) || has_flag(extra, flag)) return;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr) return;
    extra.push_back(flag);
    if (opt->get_type_size() != 0) extra.push_back(value);
  };
  for (const auto& [env, key] : {std::pair{"MORSE_SEED", "seed"}, std::pair{"MORSE_THREADS", "threads"}}) {
    if (const char* v = std::getenv(env)) supply(key, v);
  }
  if (cfg) {
    for (const auto& [key, value] : cfg->values) {
      if (sub->get_option_no_throw("--" + key) == nullptr && key != "seed" && key != "threads") {
        throw Failure{kExitUsage, "UnknownConfigKey",
                      "config key '" + key + "' is not an option of '" + sub->get_name() + "'"};
      }
      if (const CLI::Option* opt = sub->get_option_no_throw("--" + key);
          opt && opt->get_type_size() == 0) {
        if (value == "true" || value == "1") supply(key, value);
        continue;
      }
      supply(key, value);
    }
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos + 1), extra.begin(), extra.end());
  return args;
}

// ---------------------------------------------------------------- shared option groups

struct TrainFlags {
  std::string model = "cnn-lp";
  std::size_t min_epochs = 0, patience = 0, max_epochs = 0, batch_size = 0;
  bool paper_epochs = false;
  std::string global_pool = "avg";
  std::uint64_t seed = 1;
  std::size_t knn_k = 0, lr_epochs = 0, trees = 0, max_depth = 0, min_leaf = 0;
  std::size_t runs = 5, threads = 1;
  int val_subject = 0;
};

void add_train_flags(CLI::App* c, TrainFlags& f, const morse_train_options& d) {
  f.min_epochs = d.min_epochs;
  f.patience = d.patience;
  f.max_epochs = d.max_epochs;
  f.batch_size = d.batch_size;
  f.knn_k = d.knn_k;
  f.lr_epochs = d.lr_epochs;
  f.trees = d.trees;
  f.max_depth = d.max_depth;
  f.min_leaf = d.min_samples_leaf;
  c->add_option("--model", f.model, "cnn-lp | cnn-max | lr | knn | dt | rf")
      ->check(CLI::IsMember({"cnn-lp", "cnn-max", "lr", "knn", "dt", "rf"}))
      ->capture_default_str();
  c->add_option("--seed", f.seed, "master seed (env MORSE_SEED)")->capture_default_str();
  c->add_option("--min-epochs", f.min_epochs, "CNN: minimum epochs")->capture_default_str();
  c->add_option("--patience", f.patience, "CNN: epochs without validation gain before stopping")
      ->capture_default_str();
  c->add_option("--max-epochs", f.max_epochs, "CNN: hard epoch cap")->capture_default_str();
  c->add_option("--batch-size", f.batch_size, "CNN: mini-batch size, 0 = full batch")
      ->capture_default_str();
  c->add_flag("--paper-epochs", f.paper_epochs, "CNN: 2000 minimum epochs, patience 200");
  c->add_option("--global-pool", f.global_pool, "CNN: avg | max")
      ->check(CLI::IsMember({"avg", "max"}))
      ->capture_default_str();
  c->add_option("--knn-k", f.knn_k, "kNN neighbours")->capture_default_str();
  c->add_option("--lr-epochs", f.lr_epochs, "logistic regression epochs")->capture_default_str();
  c->add_option("--trees", f.trees, "random forest size")->capture_default_str();
  c->add_option("--max-depth", f.max_depth, "tree depth limit")->capture_default_str();
  c->add_option("--min-leaf", f.min_leaf, "minimum samples per tree leaf")->capture_default_str();
}

morse_train_options to_options(const TrainFlags& f) {
  morse_train_options o = morse_train_options_default();
  o.model = f.model.c_str();
  o.min_epochs = f.min_epochs;
  o.patience = f.patience;
  o.max_epochs = f.max_epochs;
  o.batch_size = f.batch_size;
  if (f.paper_epochs) morse_train_options_paper_epochs(&o);
  o.seed = f.seed;
  o.global_max_pool = f.global_pool == "max";
  o.val_subject = f.val_subject;
  o.knn_k = f.knn_k;
  o.lr_epochs = f.lr_epochs;
  o.trees = f.trees;
  o.max_depth = f.max_depth;
  o.min_samples_leaf = f.min_leaf;
  o.runs = f.runs;
  o.threads = f.threads;
  return o;
}

void load_dataset(const std::string& path, Dataset& ds) { check(morse_dataset_load(path.c_str(), &ds.p)); }

void load_or_create_model(const std::string& path, const std::string& variant, std::uint64_t seed,
                          Model& m) {
  if (!path.empty()) {
    check(morse_model_load(path.c_str(), &m.p));
  } else if (!variant.empty()) {
    check(morse_model_create(variant.c_str(), seed, 0, &m.p));
  } else {
    usage_error("MissingModel", "give --model <file> or --variant <cnn-lp|cnn-max>");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Arm-gesture recognition, vibration codes and mesh messaging"};
  app.set_version_flag("--version", std::string(morse_version()));
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key = value file (lowest precedence)");
  app.add_flag("-v,--verbose", verbosity, "progress messages on stderr");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic labelled dataset");
  morse_gen_options g = morse_gen_options_default();
  std::string gen_out;
  bool table3 = false;
  gen->add_option("--subjects", g.subjects, "number of subjects")->capture_default_str();
  gen->add_option("--per-class", g.per_class, "windows per class and subject")->capture_default_str();
  gen->add_flag("--table3", table3, "per-subject counts of the recorded dataset");
  gen->add_option("--noise", g.noise_std, "sensor noise standard deviation")->capture_default_str();
  gen->add_option("--seed", g.seed, "master seed (env MORSE_SEED)")->capture_default_str();
  gen->add_option("--out", gen_out, "output CSV")->required();

  // features
  auto* feat = app.add_subcommand("features", "write the 42 statistical features per window");
  std::string feat_in, feat_out, kurtosis = "excess";
  feat->add_option("--in", feat_in, "dataset CSV")->required();
  feat->add_option("--out", feat_out, "features CSV")->required();
  feat->add_option("--kurtosis", kurtosis, "excess | raw")
      ->check(CLI::IsMember({"excess", "raw"}))
      ->capture_default_str();

  const morse_train_options defaults = morse_train_options_default();

  // train
  auto* trn = app.add_subcommand("train", "train one model and save it");
  TrainFlags tf;
  std::string trn_in, trn_out, trn_summary;
  add_train_flags(trn, tf, defaults);
  trn->add_option("--in", trn_in, "dataset CSV")->required();
  trn->add_option("--out", trn_out, "model file")->required();
  trn->add_option("--val-subject", tf.val_subject, "CNN early-stopping subject (default: last)");
  trn->add_option("--summary", trn_summary, "write the training history JSON here");

  // loso
  auto* loso = app.add_subcommand("loso", "leave-one-subject-out cross-validation");
  TrainFlags lf;
  std::string loso_in, loso_report;
  add_train_flags(loso, lf, defaults);
  loso->add_option("--in", loso_in, "dataset CSV")->required();
  loso->add_option("--runs", lf.runs, "runs per fold")->capture_default_str();
  loso->add_option("--threads", lf.threads, "parallel runs (env MORSE_THREADS)")->capture_default_str();
  loso->add_option("--report", loso_report, "write the JSON report here");

  // eval
  auto* ev = app.add_subcommand("eval", "metrics of a saved model on a dataset");
  std::string ev_model, ev_in, ev_out = "-";
  ev->add_option("--model", ev_model, "model file")->required();
  ev->add_option("--in", ev_in, "dataset CSV")->required();
  ev->add_option("--out", ev_out, "metrics JSON destination")->capture_default_str();

  // infer
  auto* inf = app.add_subcommand("infer", "one prediction per second of a sensor stream");
  std::string inf_model, inf_in, inf_node, inf_scenario;
  double inf_threshold = 0.0;
  std::uint64_t inf_seed = 1;
  inf->add_option("--model", inf_model, "model file")->required();
  inf->add_option("--in", inf_in, "t_ms,ax,ay,az,gx,gy,gz CSV")->required();
  inf->add_option("--threshold", inf_threshold, "confidence below which gestures count as Random")
      ->capture_default_str();
  inf->add_option("--mesh-node", inf_node, "feed predictions to this node of a simulated mesh");
  inf->add_option("--scenario", inf_scenario, "mesh script for the other nodes");
  inf->add_option("--seed", inf_seed, "mesh seed (env MORSE_SEED)")->capture_default_str();

  // inspect
  auto* ins = app.add_subcommand("inspect", "network layout or per-layer activations");
  std::string ins_model, ins_variant, ins_in, ins_out;
  std::size_t ins_index = 0, ins_row = 0;
  std::optional<std::size_t> ins_layer;
  std::uint64_t ins_seed = 1;
  ins->add_option("--model", ins_model, "model file");
  ins->add_option("--variant", ins_variant, "untrained cnn-lp | cnn-max")
      ->check(CLI::IsMember({"cnn-lp", "cnn-max"}));
  ins->add_option("--seed", ins_seed, "init seed for --variant")->capture_default_str();
  ins->add_option("--in", ins_in, "dataset CSV holding the window to run");
  ins->add_option("--index", ins_index, "sample index in --in")->capture_default_str();
  ins->add_option("--layer", ins_layer, "layer whose output to dump");
  ins->add_option("--row", ins_row, "height index (sensor axis) to dump")->capture_default_str();
  ins->add_option("--out", ins_out, "activation CSV");

  // morse
  auto* mc = app.add_subcommand("morse", "vibration code of a gesture");
  std::string mc_gesture, mc_decode;
  bool mc_timeline = false;
  int mc_gap = 200;
  mc->add_option("--gesture", mc_gesture, "RS | RE | EC | F | DS");
  mc->add_flag("--timeline", mc_timeline, "also print the vibration timeline");
  mc->add_option("--decode", mc_decode, "timeline file to decode ('-' for stdin)");
  mc->add_option("--intra-gap-ms", mc_gap, "Off time between symbols of one letter")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a scripted mesh scenario");
  morse_sim_options so = morse_sim_options_default();
  std::string sim_script, sim_watch, sim_log;
  sim->add_option("--script", sim_script, "scenario file ('-' for stdin)")->required();
  sim->add_option("--watch", sim_watch, "print this node's message screen afterwards");
  sim->add_option("--seed", so.seed, "drop-decision seed (env MORSE_SEED)")->capture_default_str();
  sim->add_option("--range", so.radio_range_m, "radio range in metres")->capture_default_str();
  sim->add_option("--drop", so.drop_probability, "per-reception drop probability")->capture_default_str();
  sim->add_option("--latency", so.latency_ms, "delivery latency in ms")->capture_default_str();
  sim->add_option("--broadcast-ms", so.broadcast_ms, "on-air time per gesture")->capture_default_str();
  sim->add_option("--dedup-timeout", so.dedup_timeout_ms,
                  "allow re-sending the last gesture after this many ms (-1: never)")
      ->capture_default_str();
  sim->add_option("--log", sim_log, "write the event log here instead of stdout");

  // bench
  auto* bn = app.add_subcommand("bench", "single-window inference latency");
  std::string bn_model, bn_variant = "cnn-lp", bn_out = "-";
  std::size_t bn_n = 1000;
  std::uint64_t bn_seed = 1;
  bn->add_option("--model", bn_model, "model file (default: untrained --variant)");
  bn->add_option("--variant", bn_variant, "cnn-lp | cnn-max")
      ->check(CLI::IsMember({"cnn-lp", "cnn-max"}))
      ->capture_default_str();
  bn->add_option("--n", bn_n, "windows to time")->capture_default_str();
  bn->add_option("--seed", bn_seed, "seed of the timed windows (env MORSE_SEED)")->capture_default_str();
  bn->add_option("--out", bn_out, "JSON destination")->capture_default_str();

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = merge_sources(app, args);
    std::vector<const char*> cargs;
    for (const auto& a : args) cargs.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      std::cerr << "error: Usage: " << e.what() << '\n';
      return kExitUsage;
    }

    if (gen->parsed()) {
      g.table3 = table3 ? 1 : 0;
      Dataset ds;
      check(morse_dataset_generate(&g, &ds.p));
      check(morse_dataset_save(ds.p, gen_out.c_str()));
      std::size_t n = 0;
      check(morse_dataset_size(ds.p, &n));
      info("wrote " + std::to_string(n) + " windows to " + gen_out);
    } else if (feat->parsed()) {
      Dataset ds;
      load_dataset(feat_in, ds);
      check(morse_features_save(ds.p, feat_out.c_str(), kurtosis == "raw"));
    } else if (trn->parsed()) {
      Dataset ds;
      load_dataset(trn_in, ds);
      const auto opt = to_options(tf);
      Model m;
      LibString summary;
      info("training " + tf.model);
      check(morse_model_train(ds.p, &opt, &m.p, &summary.p));
      check(morse_model_save(m.p, trn_out.c_str()));
      if (!trn_summary.empty()) write_text(trn_summary, summary.str() + "\n");
      const auto j = nlohmann::json::parse(summary.str());
      std::cout << "model " << tf.model << " saved to " << trn_out;
      if (j.contains("result")) {
        std::cout << " (epochs " << j["result"]["epochs_run"] << ", best epoch "
                  << j["result"]["best_epoch"] << ", val accuracy "
                  << j["result"]["best_val_accuracy"] << ")";
      }
      std::cout << '\n';
    } else if (loso->parsed()) {
      Dataset ds;
      load_dataset(loso_in, ds);
      const auto opt = to_options(lf);
      LibString report, table;
      info("cross-validating " + lf.model);
      check(morse_loso(ds.p, &opt, &report.p, &table.p));
      std::cout << table.str();
      if (!loso_report.empty()) write_text(loso_report, report.str() + "\n");
    } else if (ev->parsed()) {
      Model m;
      check(morse_model_load(ev_model.c_str(), &m.p));
      Dataset ds;
      load_dataset(ev_in, ds);
      LibString metrics;
      check(morse_model_evaluate(m.p, ds.p, &metrics.p));
      auto j = nlohmann::ordered_json::parse(metrics.str());
      j["config"] = {{"model", ev_model}, {"in", ev_in}};
      write_text(ev_out, j.dump(2) + "\n");
    } else if (inf->parsed()) {
      Model m;
      check(morse_model_load(inf_model.c_str(), &m.p));
      struct Collected {
        std::vector<std::tuple<double, int, double>> rows;
      } collected;
      auto cb = [](void* user, double t_ms, int label, double conf) {
        static_cast<Collected*>(user)->rows.emplace_back(t_ms, label, conf);
        char line[96];
        std::snprintf(line, sizeof line, "%.0f %s %.4f\n", t_ms, morse_label_name(label), conf);
        std::cout << line;
      };
      check(morse_infer_stream(m.p, inf_in.c_str(), inf_threshold, cb, &collected));
      if (!inf_node.empty()) {
        morse_sim_options o = morse_sim_options_default();
        o.seed = inf_seed;
        Sim s;
        check(morse_sim_create(&o, &s.p));
        if (!inf_scenario.empty()) check(morse_sim_load_script(s.p, read_text(inf_scenario).c_str()));
        for (const auto& [t, label, conf] : collected.rows) {
          check(morse_sim_schedule_gesture(s.p, inf_node.c_str(), static_cast<int64_t>(t), label, conf));
        }
        check(morse_sim_run(s.p));
        LibString log;
        check(morse_sim_log(s.p, &log.p));
        std::cout << "# mesh\n" << log.str();
      }
    } else if (ins->parsed()) {
      Model m;
      load_or_create_model(ins_model, ins_variant, ins_seed, m);
      if (!ins_layer) {
        LibString j;
        check(morse_model_describe(m.p, &j.p));
        std::cout << j.str() << '\n';
      } else {
        if (ins_in.empty() || ins_out.empty()) {
          usage_error("MissingArgument", "--layer needs --in and --out");
        }
        Dataset ds;
        load_dataset(ins_in, ds);
        std::vector<double> window(MORSE_WINDOW_VALUES);
        int label = 0;
        check(morse_dataset_sample(ds.p, ins_index, nullptr, nullptr, &label, window.data()));
        check(morse_model_dump_activations(m.p, window.data(), *ins_layer, ins_row, ins_out.c_str()));
        info(std::string("dumped layer ") + std::to_string(*ins_layer) + " for a " +
             morse_label_name(label) + " window");
      }
    } else if (mc->parsed()) {
      if (mc_gesture.empty() == mc_decode.empty()) {
        usage_error("MissingArgument", "give exactly one of --gesture or --decode");
      }
      if (!mc_gesture.empty()) {
        LibString code;
        check(morse_gesture_code(mc_gesture.c_str(), &code.p));
        std::cout << code.str() << '\n';
        if (mc_timeline) {
          LibString t;
          check(morse_code_timeline(code.p, mc_gap, &t.p));
          std::cout << t.str();
        }
      } else {
        LibString code;
        check(morse_timeline_decode(read_text(mc_decode).c_str(), mc_gap, &code.p));
        std::cout << code.str() << '\n';
      }
    } else if (sim->parsed()) {
      Sim s;
      check(morse_sim_create(&so, &s.p));
      check(morse_sim_load_script(s.p, read_text(sim_script).c_str()));
      check(morse_sim_run(s.p));
      LibString log;
      check(morse_sim_log(s.p, &log.p));
      if (sim_log.empty()) std::cout << log.str();
      else write_text(sim_log, log.str());
      if (!sim_watch.empty()) {
        LibString panel;
        check(morse_sim_watch(s.p, sim_watch.c_str(), &panel.p));
        std::cout << panel.str();
      }
    } else if (bn->parsed()) {
      Model m;
      load_or_create_model(bn_model, bn_model.empty() ? bn_variant : "", bn_seed, m);
      LibString j;
      check(morse_bench(m.p, bn_n, bn_seed, &j.p));
      auto out = nlohmann::ordered_json::parse(j.str());
      out["config"] = {{"model", bn_model.empty() ? "untrained " + bn_variant : bn_model},
                       {"n", bn_n},
                       {"seed", bn_seed}};
      write_text(bn_out, out.dump(2) + "\n");
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.code << ": " << f.message << '\n';
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
