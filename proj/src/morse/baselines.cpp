#include "morse/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "morse/error.hpp"
#include "morse/features.hpp"
#include "morse/rng.hpp"

namespace morse::baselines {

namespace {

[[noreturn]] void invalid_config(const std::string& what) {
  throw Error(ErrorKind::Validation, "InvalidConfig", what);
}

[[noreturn]] void schema_error(const std::string& what) {
  throw Error(ErrorKind::Format, "SchemaMismatch", what);
}

void check_dim(std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw Error(ErrorKind::Validation, "ShapeMismatch",
                "expected " + std::to_string(expected) + " features, got " + std::to_string(got));
  }
}

void require_rows(const Table& t) {
  if (t.rows() == 0) throw Error(ErrorKind::Validation, "EmptyDataset", "no training rows");
}

}  // namespace

void Table::add(std::span<const double> x, GestureLabel y) {
  if (labels.empty() && values.empty()) dim = x.size();
  check_dim(dim, x.size());
  values.insert(values.end(), x.begin(), x.end());
  labels.push_back(y);
}

Standardizer Standardizer::fit(const Table& t) {
  require_rows(t);
  Standardizer s;
  s.mean.assign(t.dim, 0.0);
  s.scale.assign(t.dim, 0.0);
  const double n = static_cast<double>(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t f = 0; f < t.dim; ++f) s.mean[f] += t.row(i)[f];
  for (double& m : s.mean) m /= n;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t f = 0; f < t.dim; ++f) {
      const double d = t.row(i)[f] - s.mean[f];
      s.scale[f] += d * d;
    }
  }
  for (double& v : s.scale) {
    v = std::sqrt(v / n);
    if (v < 1e-12) v = 1.0;
  }
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  check_dim(mean.size(), x.size());
  std::vector<double> out(x.size());
  for (std::size_t f = 0; f < x.size(); ++f) out[f] = (x[f] - mean[f]) / scale[f];
  return out;
}

Table Standardizer::apply(const Table& t) const {
  Table out;
  out.dim = t.dim;
  out.values.reserve(t.values.size());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const auto z = apply(t.row(i));
    out.values.insert(out.values.end(), z.begin(), z.end());
  }
  out.labels = t.labels;
  return out;
}

nn::Prediction argmax_prediction(const Probs& p) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c)
    if (p[c] > p[best]) best = c;
  return {label_from_code(static_cast<int>(best)), p[best]};
}

// ---------------------------------------------------------------- logistic regression

Probs lr_probabilities(const LrModel& m, std::span<const double> x) {
  check_dim(m.dim, x.size());
  Probs z{};
  double zmax = -INFINITY;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    double s = m.bias(c);
    for (std::size_t f = 0; f < m.dim; ++f) s += m.weight(c, f) * x[f];
    z[c] = s;
    zmax = std::max(zmax, s);
  }
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return z;
}

namespace {

double lr_accumulate(const LrModel& m, const Table& t, std::span<const std::size_t> rows,
                     std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const double inv = 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  for (std::size_t r : rows) {
    const auto x = t.row(r);
    Probs p = lr_probabilities(m, x);
    const std::size_t y = static_cast<std::size_t>(label_code(t.labels[r]));
    loss -= std::log(std::max(p[y], 1e-300));
    p[y] -= 1.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const double d = p[c] * inv;
      for (std::size_t f = 0; f < m.dim; ++f) grad[c * m.dim + f] += d * x[f];
      grad[kNumClasses * m.dim + c] += d;
    }
  }
  return loss * inv;
}

}  // namespace

double lr_loss_and_grad(const LrModel& m, const Table& t, std::span<double> grad) {
  require_rows(t);
  check_dim(m.dim, t.dim);
  if (grad.size() != m.params.size()) {
    throw Error(ErrorKind::Validation, "ShapeMismatch", "gradient buffer size");
  }
  std::vector<std::size_t> rows(t.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return lr_accumulate(m, t, rows, grad);
}

LrModel lr_train(const Table& raw, const LrConfig& cfg) {
  require_rows(raw);
  cfg.adam.validate();
  if (cfg.epochs < 1) invalid_config("epochs must be at least 1");
  LrModel m(raw.dim);
  m.standardize = cfg.standardize;
  Table t;
  if (cfg.standardize) {
    m.scaler = Standardizer::fit(raw);
    t = m.scaler.apply(raw);
  } else {
    t = raw;
  }
  const std::size_t n = t.rows();
  const std::size_t batch = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(m.params.size());
  train::AdamState state(m.params.size());
  Rng rng(cfg.seed);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const double loss =
          lr_accumulate(m, t, std::span(order).subspan(start, end - start), grad);
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::Divergence, "NonFiniteLoss",
                    "logistic regression loss became non-finite at epoch " + std::to_string(e + 1));
      }
      train::adam_step(m.params, grad, state, cfg.adam);
    }
  }
  return m;
}

nn::Prediction lr_predict(const LrModel& m, std::span<const double> x) {
  if (m.standardize) return argmax_prediction(lr_probabilities(m, m.scaler.apply(x)));
  return argmax_prediction(lr_probabilities(m, x));
}

// ---------------------------------------------------------------- k nearest neighbours

KnnModel knn_fit(const Table& t, std::size_t k, bool standardize) {
  require_rows(t);
  if (k < 1 || k > t.rows()) {
    invalid_config("k must be between 1 and the number of training rows");
  }
  KnnModel m;
  m.k = k;
  m.standardize = standardize;
  if (standardize) {
    m.scaler = Standardizer::fit(t);
    m.train = m.scaler.apply(t);
  } else {
    m.train = t;
  }
  return m;
}

nn::Prediction knn_predict(const KnnModel& m, std::span<const double> query) {
  require_rows(m.train);
  const std::vector<double> x =
      m.standardize ? m.scaler.apply(query) : std::vector<double>(query.begin(), query.end());
  check_dim(m.train.dim, x.size());
  const std::size_t n = m.train.rows();
  std::vector<std::pair<double, std::size_t>> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = m.train.row(i);
    double s = 0.0;
    for (std::size_t f = 0; f < x.size(); ++f) {
      const double diff = r[f] - x[f];
      s += diff * diff;
    }
    d[i] = {s, i};
  }
  const std::size_t k = std::min(m.k, n);
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::array<std::size_t, kNumClasses> votes{};
  std::array<double, kNumClasses> dist{};
  for (std::size_t i = 0; i < k; ++i) {
    const auto c = static_cast<std::size_t>(label_code(m.train.labels[d[i].second]));
    ++votes[c];
    dist[c] += std::sqrt(d[i].first);
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && votes[c] > 0 && dist[c] < dist[best])) {
      best = c;
    }
  }
  return {label_from_code(static_cast<int>(best)),
          static_cast<double>(votes[best]) / static_cast<double>(k)};
}

// ---------------------------------------------------------------- trees

double gini(const std::array<std::uint32_t, kNumClasses>& hist) {
  double n = 0.0;
  for (auto v : hist) n += v;
  if (n == 0.0) return 0.0;
  double s = 0.0;
  for (auto v : hist) s += (v / n) * (v / n);
  return 1.0 - s;
}

std::size_t TreeModel::depth() const {
  if (nodes.empty()) return 0;
  std::size_t best = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, dep] = stack.back();
    stack.pop_back();
    best = std::max(best, dep);
    if (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      stack.push_back({nodes[static_cast<std::size_t>(i)].left, dep + 1});
      stack.push_back({nodes[static_cast<std::size_t>(i)].right, dep + 1});
    }
  }
  return best;
}

namespace {

using Hist = std::array<std::uint32_t, kNumClasses>;

// Unnormalized weighted impurity n * gini.
double weighted_gini(const Hist& h, double n) {
  if (n == 0.0) return 0.0;
  double s = 0.0;
  for (auto v : h) s += static_cast<double>(v) * static_cast<double>(v);
  return n - s / n;
}

class TreeBuilder {
 public:
  TreeBuilder(const Table& t, const TreeConfig& cfg) : t_(t), cfg_(cfg), rng_(cfg.seed) {
    features_.resize(t.dim);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  int build(std::vector<std::size_t>& rows, std::size_t depth, TreeModel& out) {
    const int id = static_cast<int>(out.nodes.size());
    out.nodes.emplace_back();
    Hist hist{};
    for (std::size_t r : rows) ++hist[static_cast<std::size_t>(label_code(t_.labels[r]))];
    out.nodes.back().hist = hist;

    const double n = static_cast<double>(rows.size());
    const double parent = weighted_gini(hist, n);
    if (depth >= cfg_.max_depth || parent <= 0.0 || rows.size() < 2 * cfg_.min_samples_leaf) {
      return id;
    }

    const std::size_t mf =
        cfg_.max_features == 0 ? t_.dim : std::min(cfg_.max_features, t_.dim);
    std::vector<std::size_t> cand;
    if (mf == t_.dim) {
      cand = features_;
    } else {
      std::vector<std::size_t> pool = features_;
      for (std::size_t i = 0; i < mf; ++i) std::swap(pool[i], pool[i + rng_.below(pool.size() - i)]);
      cand.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(mf));
      std::sort(cand.begin(), cand.end());
    }

    const std::size_t leaf = std::max<std::size_t>(1, cfg_.min_samples_leaf);
    double best_score = parent;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> sorted = rows;
    for (std::size_t f : cand) {
      std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        return t_.row(a)[f] < t_.row(b)[f];
      });
      Hist left{};
      Hist right = hist;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const auto c = static_cast<std::size_t>(label_code(t_.labels[sorted[i]]));
        ++left[c];
        --right[c];
        const std::size_t nl = i + 1, nr = sorted.size() - nl;
        if (nl < leaf || nr < leaf) continue;
        const double a = t_.row(sorted[i])[f];
        const double b = t_.row(sorted[i + 1])[f];
        if (!(a < b)) continue;
        const double score = weighted_gini(left, static_cast<double>(nl)) +
                             weighted_gini(right, static_cast<double>(nr));
        if (score < best_score - 1e-12 * n && (best_feature < 0 || score < best_score)) {
          best_score = score;
          best_feature = static_cast<int>(f);
          best_threshold = a;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> lrows, rrows;
    for (std::size_t r : rows) {
      (t_.row(r)[static_cast<std::size_t>(best_feature)] <= best_threshold ? lrows : rrows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(lrows, depth + 1, out);
    const int r = build(rrows, depth + 1, out);
    TreeNode& node = out.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

 private:
  const Table& t_;
  TreeConfig cfg_;
  Rng rng_;
  std::vector<std::size_t> features_;
};

std::size_t leaf_of(const TreeModel& m, std::span<const double> x) {
  check_dim(m.dim, x.size());
  std::size_t i = 0;
  while (m.nodes[i].feature >= 0) {
    const TreeNode& n = m.nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                        : n.right);
  }
  return i;
}

}  // namespace

TreeModel dt_train(const Table& t, std::span<const std::size_t> rows, const TreeConfig& cfg) {
  require_rows(t);
  if (rows.empty()) throw Error(ErrorKind::Validation, "EmptyDataset", "no training rows");
  if (cfg.max_depth < 1) invalid_config("max_depth must be at least 1");
  TreeModel m;
  m.dim = t.dim;
  std::vector<std::size_t> r(rows.begin(), rows.end());
  TreeBuilder(t, cfg).build(r, 0, m);
  return m;
}

TreeModel dt_train(const Table& t, const TreeConfig& cfg) {
  std::vector<std::size_t> rows(t.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return dt_train(t, rows, cfg);
}

nn::Prediction dt_predict(const TreeModel& m, std::span<const double> x) {
  const Hist& h = m.nodes[leaf_of(m, x)].hist;
  Probs p{};
  double n = 0.0;
  for (auto v : h) n += v;
  for (std::size_t c = 0; c < kNumClasses; ++c) p[c] = n > 0.0 ? h[c] / n : 0.0;
  return argmax_prediction(p);
}

ForestModel rf_train(const Table& t, const ForestConfig& cfg) {
  require_rows(t);
  if (cfg.n_trees < 1) invalid_config("a forest needs at least one tree");
  ForestModel f;
  TreeConfig tc = cfg.tree;
  if (tc.max_features == 0) {
    tc.max_features = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(t.dim))));
  }
  const std::size_t n = t.rows();
  std::vector<std::size_t> rows(n);
  for (std::size_t b = 0; b < cfg.n_trees; ++b) {
    Rng rng = Rng::stream(cfg.seed, b);
    if (cfg.bootstrap) {
      for (auto& r : rows) r = rng.below(n);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    tc.seed = rng.next_u64();
    f.trees.push_back(dt_train(t, rows, tc));
  }
  return f;
}

nn::Prediction rf_predict(const ForestModel& m, std::span<const double> x) {
  if (m.trees.empty()) throw Error(ErrorKind::Validation, "EmptyModel", "forest has no trees");
  Probs votes{};
  for (const auto& tree : m.trees) votes[label_code(dt_predict(tree, x).label)] += 1.0;
  for (double& v : votes) v /= static_cast<double>(m.trees.size());
  return argmax_prediction(votes);
}

// ---------------------------------------------------------------- window-level wrapper

std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::Lr: return "lr";
    case Kind::Knn: return "knn";
    case Kind::Dt: return "dt";
    case Kind::Rf: return "rf";
  }
  return "?";
}

Kind parse_kind(std::string_view s) {
  for (Kind k : {Kind::Lr, Kind::Knn, Kind::Dt, Kind::Rf})
    if (s == to_string(k)) return k;
  throw Error(ErrorKind::Usage, "UnknownModel", "unknown baseline '" + std::string(s) + "'");
}

Table feature_table(std::span<const LabeledWindow> samples, const NormStats& norm) {
  Table t;
  t.dim = features::kFeatureCount;
  t.values.reserve(samples.size() * t.dim);
  for (const auto& s : samples) t.add(features::extract_features(normalize(s.window, norm)), s.label);
  return t;
}

Classifier fit(Kind kind, std::span<const LabeledWindow> train_set, const Options& opt,
               std::uint64_t seed) {
  Classifier c;
  c.kind = kind;
  c.norm = compute_norm_stats(train_set);
  const Table t = feature_table(train_set, c.norm);
  switch (kind) {
    case Kind::Lr: {
      LrConfig cfg = opt.lr;
      cfg.seed = seed;
      c.model = lr_train(t, cfg);
      break;
    }
    case Kind::Knn:
      c.model = knn_fit(t, opt.knn_k, true);
      break;
    case Kind::Dt: {
      TreeConfig cfg = opt.dt;
      cfg.seed = seed;
      c.model = dt_train(t, cfg);
      break;
    }
    case Kind::Rf: {
      ForestConfig cfg = opt.rf;
      cfg.seed = seed;
      c.model = rf_train(t, cfg);
      break;
    }
  }
  return c;
}

nn::Prediction predict(const Classifier& c, const ImuWindow& raw) {
  const features::FeatureVector x = features::extract_features(normalize(raw, c.norm));
  return std::visit(
      [&](const auto& m) -> nn::Prediction {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LrModel>) return lr_predict(m, x);
        else if constexpr (std::is_same_v<M, KnnModel>) return knn_predict(m, x);
        else if constexpr (std::is_same_v<M, TreeModel>) return dt_predict(m, x);
        else return rf_predict(m, x);
      },
      c.model);
}

namespace {

nlohmann::json scaler_json(const Standardizer& s) { return {{"mean", s.mean}, {"scale", s.scale}}; }

Standardizer scaler_from(const nlohmann::json& j) {
  Standardizer s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
  return s;
}

nlohmann::json tree_json(const TreeModel& m) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : m.nodes) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"hist", n.hist}});
  }
  return {{"dim", m.dim}, {"nodes", nodes}};
}

TreeModel tree_from(const nlohmann::json& j) {
  TreeModel m;
  m.dim = j.at("dim").get<std::size_t>();
  for (const auto& n : j.at("nodes")) {
    TreeNode node;
    node.feature = n.at("feature").get<int>();
    node.threshold = n.at("threshold").get<double>();
    node.left = n.at("left").get<int>();
    node.right = n.at("right").get<int>();
    node.hist = n.at("hist").get<Hist>();
    m.nodes.push_back(node);
  }
  const int count = static_cast<int>(m.nodes.size());
  for (const auto& n : m.nodes) {
    if (n.feature >= static_cast<int>(m.dim) ||
        (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count))) {
      schema_error("tree node references are out of range");
    }
  }
  if (m.nodes.empty()) schema_error("tree has no nodes");
  return m;
}

}  // namespace

nlohmann::json to_json(const Classifier& c) {
  nlohmann::ordered_json j;
  j["format_version"] = kBaselineFormatVersion;
  j["kind"] = to_string(c.kind);
  j["norm_stats"] = {{"mean", c.norm.mean}, {"std", c.norm.std}};
  nlohmann::json model;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LrModel>) {
          model = {{"dim", m.dim}, {"params", m.params}, {"standardize", m.standardize}};
          if (m.standardize) model["scaler"] = scaler_json(m.scaler);
        } else if constexpr (std::is_same_v<M, KnnModel>) {
          model = {{"k", m.k},
                   {"standardize", m.standardize},
                   {"dim", m.train.dim},
                   {"values", m.train.values}};
          std::vector<int> labels;
          for (auto l : m.train.labels) labels.push_back(label_code(l));
          model["labels"] = labels;
          if (m.standardize) model["scaler"] = scaler_json(m.scaler);
        } else if constexpr (std::is_same_v<M, TreeModel>) {
          model = tree_json(m);
        } else {
          nlohmann::json trees = nlohmann::json::array();
          for (const auto& t : m.trees) trees.push_back(tree_json(t));
          model = {{"trees", trees}};
        }
      },
      c.model);
  j["model"] = model;
  return j;
}

Classifier from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kBaselineFormatVersion) {
      throw Error(ErrorKind::Format, "UnsupportedVersion",
                  "unsupported baseline format_version " + std::to_string(version));
    }
    Classifier c;
    c.kind = parse_kind(j.at("kind").get<std::string>());
    c.norm.mean = j.at("norm_stats").at("mean").get<std::array<double, kChannels>>();
    c.norm.std = j.at("norm_stats").at("std").get<std::array<double, kChannels>>();
    const auto& m = j.at("model");
    switch (c.kind) {
      case Kind::Lr: {
        LrModel lr(m.at("dim").get<std::size_t>());
        lr.params = m.at("params").get<std::vector<double>>();
        if (lr.params.size() != (lr.dim + 1) * kNumClasses) schema_error("lr parameter count");
        lr.standardize = m.at("standardize").get<bool>();
        if (lr.standardize) lr.scaler = scaler_from(m.at("scaler"));
        c.model = lr;
        break;
      }
      case Kind::Knn: {
        KnnModel knn;
        knn.k = m.at("k").get<std::size_t>();
        knn.standardize = m.at("standardize").get<bool>();
        knn.train.dim = m.at("dim").get<std::size_t>();
        knn.train.values = m.at("values").get<std::vector<double>>();
        for (int code : m.at("labels").get<std::vector<int>>()) knn.train.labels.push_back(label_from_code(code));
        if (knn.train.values.size() != knn.train.dim * knn.train.rows() || knn.k < 1 ||
            knn.k > knn.train.rows()) {
          schema_error("knn training table is inconsistent");
        }
        if (knn.standardize) knn.scaler = scaler_from(m.at("scaler"));
        c.model = knn;
        break;
      }
      case Kind::Dt:
        c.model = tree_from(m);
        break;
      case Kind::Rf: {
        ForestModel f;
        for (const auto& t : m.at("trees")) f.trees.push_back(tree_from(t));
        if (f.trees.empty()) schema_error("forest has no trees");
        c.model = f;
        break;
      }
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    schema_error(std::string("baseline model: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Format) throw;
    schema_error(e.what());
  }
}

void save_classifier(const std::filesystem::path& path, const Classifier& c) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "IoError", "cannot open " + path.string() + " for writing");
  os << to_json(c).dump() << '\n';
  if (!os) throw Error(ErrorKind::Io, "IoError", "write failed: " + path.string());
}

Classifier load_classifier(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "IoError", "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, "ParseError", std::string("baseline model: ") + e.what());
  }
  return from_json(j);
}

train::FoldRunner make_runner(Kind kind, const Options& opt) {
  return [kind, opt](const train::FoldData& fold, std::uint64_t seed) {
    const Classifier c = fit(kind, fold.train, opt, seed);
    train::RunOutcome out;
    out.predictions.reserve(fold.test.size());
    for (const auto& s : fold.test) out.predictions.push_back(predict(c, s.window).label);
    return out;
  };
}

}  // namespace morse::baselines
