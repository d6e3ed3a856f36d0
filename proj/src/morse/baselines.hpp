#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "morse/core.hpp"
#include "morse/nn_model.hpp"
#include "morse/train.hpp"

namespace morse::baselines {

/// Row-major sample matrix of arbitrary feature dimension.
struct Table {
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<GestureLabel> labels;

  std::size_t rows() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  void add(std::span<const double> x, GestureLabel y);
};

/// Per-feature z-score with population std; constant features keep scale 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;
  static Standardizer fit(const Table& t);
  std::vector<double> apply(std::span<const double> x) const;
  Table apply(const Table& t) const;
};

using Probs = std::array<double, kNumClasses>;

/// Argmax of a score vector, ties to the smallest label code.
nn::Prediction argmax_prediction(const Probs& p);

// ---------------------------------------------------------------- logistic regression

struct LrConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  bool standardize = true;
  train::AdamConfig adam{};
};

struct LrModel {
  std::size_t dim = 0;
  std::vector<double> params;  // kNumClasses x dim weights, then kNumClasses biases
  bool standardize = true;
  Standardizer scaler;

  explicit LrModel(std::size_t d = 0) : dim(d), params((d + 1) * kNumClasses, 0.0) {}
  double weight(std::size_t cls, std::size_t f) const { return params[cls * dim + f]; }
  double bias(std::size_t cls) const { return params[kNumClasses * dim + cls]; }
};

/// Mean softmax cross-entropy over `t` (already standardized) and its gradient.
double lr_loss_and_grad(const LrModel& m, const Table& t, std::span<double> grad);
Probs lr_probabilities(const LrModel& m, std::span<const double> x);
LrModel lr_train(const Table& t, const LrConfig& cfg);
nn::Prediction lr_predict(const LrModel& m, std::span<const double> x);

// ---------------------------------------------------------------- k nearest neighbours

struct KnnModel {
  std::size_t k = 5;
  bool standardize = true;
  Standardizer scaler;
  Table train;  // standardized copy when standardize is set
};

/// Throws Validation/InvalidConfig unless 1 <= k <= rows.
KnnModel knn_fit(const Table& t, std::size_t k = 5, bool standardize = true);
/// Majority among the k nearest (distance, then training order); vote ties go
/// to the smaller summed distance, then the smaller label code.
nn::Prediction knn_predict(const KnnModel& m, std::span<const double> x);

// ---------------------------------------------------------------- trees

struct TreeConfig {
  std::size_t max_depth = 12;
  std::size_t min_samples_leaf = 2;
  std::size_t max_features = 0;  // per split; 0 = all
  std::uint64_t seed = 1;
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;  // x <= threshold goes left
  int left = -1;
  int right = -1;
  std::array<std::uint32_t, kNumClasses> hist{};
};

struct TreeModel {
  std::size_t dim = 0;
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t depth() const;
};

double gini(const std::array<std::uint32_t, kNumClasses>& hist);

/// CART with Gini impurity. A split is kept only if it strictly lowers the
/// weighted impurity; its threshold is the largest left-side value, so
/// predictions are unchanged by increasing transforms of a feature.
TreeModel dt_train(const Table& t, const TreeConfig& cfg);
TreeModel dt_train(const Table& t, std::span<const std::size_t> rows, const TreeConfig& cfg);
nn::Prediction dt_predict(const TreeModel& m, std::span<const double> x);

struct ForestConfig {
  std::size_t n_trees = 100;
  bool bootstrap = true;
  TreeConfig tree{12, 2, 0, 1};  // max_features 0 here means ceil(sqrt(dim))
  std::uint64_t seed = 1;
};

struct ForestModel {
  std::vector<TreeModel> trees;
};

ForestModel rf_train(const Table& t, const ForestConfig& cfg);
/// Majority vote, ties to the smallest label code; confidence = vote share.
nn::Prediction rf_predict(const ForestModel& m, std::span<const double> x);

// ---------------------------------------------------------------- window-level wrapper

enum class Kind { Lr, Knn, Dt, Rf };
std::string_view to_string(Kind k);
Kind parse_kind(std::string_view s);

struct Options {
  LrConfig lr{};
  std::size_t knn_k = 5;
  TreeConfig dt{};
  ForestConfig rf{};
};

/// A feature classifier bundled with the window normalization it was fit on.
struct Classifier {
  Kind kind = Kind::Lr;
  NormStats norm;
  std::variant<LrModel, KnnModel, TreeModel, ForestModel> model;
};

/// Features of windows normalized with `norm`.
Table feature_table(std::span<const LabeledWindow> samples, const NormStats& norm);

/// Normalization statistics come from `train_set`. `seed` drives LR batch
/// order and forest bootstraps.
Classifier fit(Kind kind, std::span<const LabeledWindow> train_set, const Options& opt,
               std::uint64_t seed);
nn::Prediction predict(const Classifier& c, const ImuWindow& raw);

inline constexpr int kBaselineFormatVersion = 1;
nlohmann::json to_json(const Classifier& c);
/// Throws Format/UnsupportedVersion or Format/SchemaMismatch.
Classifier from_json(const nlohmann::json& j);
void save_classifier(const std::filesystem::path& path, const Classifier& c);
Classifier load_classifier(const std::filesystem::path& path);

/// Fold runner for the cross-validation harness; the validation subject is
/// not used.
train::FoldRunner make_runner(Kind kind, const Options& opt);

}  // namespace morse::baselines
