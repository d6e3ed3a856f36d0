#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "morse/core.hpp"
#include "morse/nn_model.hpp"

namespace morse::train {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay = 0.0;  // no learning-rate decay term when 0
  /// Throws Validation/InvalidConfig.
  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update. Throws Validation/ShapeMismatch when the
/// three arrays disagree in length.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg);

struct TrainConfig {
  // Sized so a seven-fold cross-validation of both CNNs fits in half an hour
  // on one core; paper() holds the full-length schedule.
  std::size_t min_epochs = 20;
  std::size_t patience = 10;
  std::size_t max_epochs = 200;
  std::size_t batch_size = 32;  // 0 means full batch
  std::uint64_t seed = 1;
  /// Also measure accuracy on the training set in evaluation mode each epoch.
  bool eval_train_accuracy = false;
  /// Stop as soon as eval-mode training accuracy reaches this value (> 1 disables).
  double stop_at_train_accuracy = 2.0;

  static TrainConfig paper();
  /// Throws Validation/InvalidConfig.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;  // eval mode if requested, else running training-mode value
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
  double best_val_loss = 0.0;
  std::size_t epochs_run = 0;
  nlohmann::json to_json() const;
};

/// Trains `model` on raw windows, normalizing with the model's stored
/// statistics. After at least min_epochs, stops once validation accuracy has
/// not improved for `patience` epochs (or at max_epochs) and leaves the
/// checkpoint with the best validation accuracy, ties going to lower
/// validation loss. An empty validation set keeps the last epoch. The final
/// parameters are rounded to storage precision.
///
/// Throws Validation/OverlappingSplits if a window appears in both sets and
/// Divergence/NonFiniteLoss if the loss stops being finite.
TrainResult train(nn::Model& model, std::span<const LabeledWindow> train_set,
                  std::span<const LabeledWindow> val_set, const TrainConfig& cfg,
                  const AdamConfig& adam = {});

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

using Confusion = std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses>;

struct Metrics {
  std::uint64_t total = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::array<ClassMetrics, kNumClasses> per_class{};
  Confusion confusion{};  // rows = truth, columns = prediction

  /// Share of true-Random windows predicted as any gesture of interest.
  double random_to_goi_rate() const;
  nlohmann::json to_json() const;
};

Metrics metrics_from_confusion(const Confusion& confusion);
/// Throws Validation/ShapeMismatch when lengths differ.
Metrics confusion_and_f1(std::span<const GestureLabel> truth,
                         std::span<const GestureLabel> predicted);

double project_false_positives(double random_to_goi_rate, double windows_per_hour = 3600.0);
double project_false_positives(const Metrics& m, double windows_per_hour = 3600.0);

struct FoldData {
  std::size_t fold = 0;  // 0-based
  int test_subject = 0;
  int val_subject = 0;
  std::vector<int> train_subjects;
  std::vector<LabeledWindow> train;
  std::vector<LabeledWindow> val;
  std::vector<LabeledWindow> test;
};

struct RunOutcome {
  std::vector<GestureLabel> predictions;  // one per test window
  nlohmann::json info = nlohmann::json::object();
};

/// Fits a fresh classifier on fold.train (validation optional) and predicts
/// fold.test. Must be safe to call concurrently.
using FoldRunner = std::function<RunOutcome(const FoldData& fold, std::uint64_t run_seed)>;

struct LosoConfig {
  std::size_t runs = 5;
  std::uint64_t master_seed = 1;
  std::size_t threads = 1;
  nlohmann::json echo = nlohmann::json::object();  // copied into the report
};

/// Test subject f is subjects[f]; validation is the next subject cyclically.
/// Throws Validation/InsufficientSubjects below three subjects.
std::vector<FoldData> make_folds(const Dataset& data);

std::uint64_t run_seed(std::uint64_t master, std::size_t fold, std::size_t run);

struct FoldResult {
  std::size_t fold = 0;
  int test_subject = 0;
  int val_subject = 0;
  std::size_t test_size = 0;
  std::vector<double> run_accuracies;
  double mean_accuracy = 0.0;
  std::array<double, kNumClasses> mean_f1{};
  Confusion confusion{};  // summed over runs
  std::vector<nlohmann::json> run_info;
};

struct LosoReport {
  std::string model;
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // population spread of per-fold means
  Metrics pooled;             // every run of every fold
  double fp_per_hour = 0.0;
  nlohmann::json config = nlohmann::json::object();

  nlohmann::json to_json() const;
  std::string table() const;
};

LosoReport loso_cv(const Dataset& data, const std::string& model_name, const FoldRunner& runner,
                   const LosoConfig& cfg);

/// CNN runner: normalization statistics from fold.train, He init and data
/// order both derived from the run seed.
FoldRunner make_cnn_runner(nn::ModelSpec spec, const TrainConfig& train_cfg,
                           const AdamConfig& adam = {});

struct BenchStats {
  std::size_t n = 0;
  double mean_ms = 0.0;
  double p95_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  nlohmann::json to_json() const;
};

/// Times `n` single-window evaluation-mode predictions, cycling through
/// `windows`. Throws Validation/EmptyBenchmark when n or windows is empty.
BenchStats benchmark_inference(const nn::Model& model, std::span<const ImuWindow> windows,
                               std::size_t n);

}  // namespace morse::train
