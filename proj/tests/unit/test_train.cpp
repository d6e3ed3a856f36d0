#include <cmath>
#include <numeric>
#include <set>

#include "helpers.hpp"
#include "morse/baselines.hpp"
#include "morse/synth.hpp"
#include "morse/train.hpp"

using namespace morse;
using namespace morse::train;

namespace {

// Scalar Adam written out by hand.
struct ScalarAdam {
  double m = 0, v = 0;
  int t = 0;
  double step(double theta, double g, double lr = 1e-3, double b1 = 0.9, double b2 = 0.999,
              double eps = 1e-8) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    return theta - lr * mh / (std::sqrt(vh) + eps);
  }
};

Dataset small_data(int subjects, int per_class, std::uint64_t seed = 1) {
  return synth::gen_dataset({.n_subjects = subjects, .per_class = per_class, .master_seed = seed});
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParams) {
  std::vector<double> p{1.0, -2.0, 3.5}, g(3, 0.0);
  AdamState s(3);
  adam_step(p, g, s, {});
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.5}));
  EXPECT_EQ(s.t, 1u);
}

TEST(Adam, FirstStepIsSignTimesLr) {
  std::vector<double> p{0.0, 0.0, 0.0}, g{2.0, -0.5, 1e-3};
  AdamState s(3);
  adam_step(p, g, s, {});
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(p[i], -1e-3 * g[i] / (std::abs(g[i]) + 1e-8), 1e-15);
  }
}

TEST(Adam, MatchesScalarReference) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    std::vector<double> p(n), g(n);
    for (double& v : p) v = rng.normal();
    std::vector<ScalarAdam> ref(n);
    std::vector<double> expect = p;
    AdamState s(n);
    for (int step = 0; step < 50; ++step) {
      for (double& v : g) v = rng.normal() * std::pow(10.0, rng.uniform(-3.0, 2.0));
      adam_step(p, g, s, {});
      for (std::size_t i = 0; i < n; ++i) {
        expect[i] = ref[i].step(expect[i], g[i]);
        ASSERT_NEAR(p[i], expect[i], 1e-12);
      }
    }
  }
}

// 100 steps at lr 1e-3 move theta by just under 0.1: the independent scalar
// simulation ends at 0.9017436.
TEST(Adam, MinimizesQuadratic) {
  std::vector<double> theta{1.0}, g(1);
  AdamState s(1);
  AdamConfig cfg;
  double prev = 1.0;
  int decreases = 0;
  for (int i = 0; i < 100; ++i) {
    g[0] = 2.0 * theta[0];
    adam_step(theta, g, s, cfg);
    decreases += std::abs(theta[0]) < prev;
    prev = std::abs(theta[0]);
  }
  EXPECT_NEAR(theta[0], 0.901743598078609, 1e-12);
  EXPECT_LT(std::abs(theta[0]), 0.91);
  EXPECT_EQ(decreases, 100);
}

TEST(Adam, DecayShrinksStep) {
  std::vector<double> a{0.0}, b{0.0}, g{1.0};
  AdamState sa(1), sb(1);
  AdamConfig decayed;
  decayed.decay = 1.0;
  for (int i = 0; i < 3; ++i) {
    adam_step(a, g, sa, {});
    adam_step(b, g, sb, decayed);
  }
  EXPECT_NEAR(b[0], -1e-3 * (1.0 + 0.5 + 1.0 / 3.0), 1e-10);
  EXPECT_NEAR(a[0], -3e-3, 1e-10);
}

TEST(Adam, Errors) {
  std::vector<double> p(2), g(3);
  AdamState s(2);
  EXPECT_MORSE_ERROR(adam_step(p, g, s, {}), "ShapeMismatch");
  AdamConfig bad;
  bad.lr = 0.0;
  EXPECT_MORSE_ERROR(bad.validate(), "InvalidConfig");
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.patience = 0;
  EXPECT_MORSE_ERROR(c.validate(), "InvalidConfig");
  c = TrainConfig{};
  c.max_epochs = c.min_epochs - 1;
  EXPECT_MORSE_ERROR(c.validate(), "InvalidConfig");
  const auto p = TrainConfig::paper();
  EXPECT_EQ(p.min_epochs, 2000u);
  EXPECT_EQ(p.patience, 200u);
}

TEST(Train, SameSeedSameHistory) {
  const auto d = small_data(3, 4);
  std::vector<LabeledWindow> tr, va;
  for (const auto& s : d.samples) (s.subject_id == 3 ? va : tr).push_back(s);
  TrainConfig cfg;
  cfg.min_epochs = 3;
  cfg.patience = 2;
  cfg.max_epochs = 5;
  cfg.batch_size = 8;
  auto run = [&] {
    nn::Model m(nn::make_spec(nn::Variant::CnnMax), compute_norm_stats(tr), 7);
    return std::pair{train::train(m, tr, va, cfg), m};
  };
  auto [ra, ma] = run();
  auto [rb, mb] = run();
  ASSERT_EQ(ra.history.size(), rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    EXPECT_EQ(ra.history[i].train_loss, rb.history[i].train_loss);
    EXPECT_EQ(ra.history[i].val_loss, rb.history[i].val_loss);
  }
  EXPECT_TRUE(std::equal(ma.network().params().values().begin(), ma.network().params().values().end(),
                         mb.network().params().values().begin()));
  // Stored parameters are exactly representable as float.
  for (double v : ma.network().params().values()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
}

TEST(Train, KeepsBestValidationCheckpoint) {
  const auto d = small_data(3, 6, 3);
  std::vector<LabeledWindow> tr, va;
  for (const auto& s : d.samples) (s.subject_id == 2 ? va : tr).push_back(s);
  TrainConfig cfg;
  cfg.min_epochs = 8;
  cfg.patience = 3;
  cfg.max_epochs = 12;
  cfg.batch_size = 16;
  nn::Model m(nn::make_spec(nn::Variant::CnnLp), compute_norm_stats(tr), 11);
  const auto r = train::train(m, tr, va, cfg);
  ASSERT_GE(r.history.size(), 8u);
  double best = 0.0;
  for (const auto& e : r.history) best = std::max(best, e.val_accuracy);
  EXPECT_EQ(r.best_val_accuracy, best);
  const auto& chosen = r.history.at(r.best_epoch - 1);
  EXPECT_EQ(chosen.val_accuracy, best);
  for (const auto& e : r.history) {
    if (e.val_accuracy == best) {
      EXPECT_GE(e.val_loss, chosen.val_loss);
    }
  }
  std::size_t correct = 0;
  for (const auto& s : va) correct += nn::predict(m, s.window).label == s.label;
  EXPECT_EQ(static_cast<double>(correct) / static_cast<double>(va.size()), best);
  EXPECT_TRUE(m.training_summary().contains("best_epoch"));
}

TEST(Train, RejectsOverlappingSplits) {
  const auto d = small_data(1, 2);
  nn::Model m(nn::make_spec(nn::Variant::CnnMax), compute_norm_stats(d), 1);
  TrainConfig cfg;
  cfg.min_epochs = 1;
  cfg.max_epochs = 1;
  EXPECT_MORSE_ERROR(train::train(m, d.samples, std::span(d.samples).first(1), cfg),
                     "OverlappingSplits");
}

TEST(Train, DivergenceIsReported) {
  const auto d = small_data(1, 2);
  std::vector<LabeledWindow> tr(d.samples.begin(), d.samples.end());
  nn::Model m(nn::make_spec(nn::Variant::CnnMax), compute_norm_stats(d), 1);
  auto dense_bias = m.network().params().biases(12);
  dense_bias[0] = std::nan("");
  TrainConfig cfg;
  cfg.min_epochs = 1;
  cfg.max_epochs = 1;
  EXPECT_MORSE_ERROR(train::train(m, tr, {}, cfg), "NonFiniteLoss");
}

TEST(Metrics, PerfectPredictions) {
  std::vector<GestureLabel> t;
  for (int k = 0; k < 3; ++k)
    for (auto g : kAllGestures) t.push_back(g);
  const auto m = confusion_and_f1(t, t);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.macro_f1, 1.0);
  for (std::size_t i = 0; i < kNumClasses; ++i)
    for (std::size_t j = 0; j < kNumClasses; ++j) EXPECT_EQ(m.confusion[i][j], i == j ? 3u : 0u);
}

TEST(Metrics, AllRandom) {
  std::vector<GestureLabel> t{GestureLabel::Random, GestureLabel::Fire, GestureLabel::Random,
                              GestureLabel::Distress, GestureLabel::Random};
  std::vector<GestureLabel> p(t.size(), GestureLabel::Random);
  EXPECT_DOUBLE_EQ(confusion_and_f1(t, p).accuracy, 3.0 / 5.0);
}

TEST(Metrics, HandBuiltThreeSamples) {
  // truth F, F, RS; predicted F, RS, RS.
  const std::vector<GestureLabel> t{GestureLabel::Fire, GestureLabel::Fire,
                                    GestureLabel::RecommendedStop};
  const std::vector<GestureLabel> p{GestureLabel::Fire, GestureLabel::RecommendedStop,
                                    GestureLabel::RecommendedStop};
  const auto m = confusion_and_f1(t, p);
  EXPECT_DOUBLE_EQ(m.accuracy, 2.0 / 3.0);
  const auto& f = m.per_class[4];
  EXPECT_DOUBLE_EQ(f.precision, 1.0);
  EXPECT_DOUBLE_EQ(f.recall, 0.5);
  EXPECT_DOUBLE_EQ(f.f1, 2.0 / 3.0);
  const auto& rs = m.per_class[1];
  EXPECT_DOUBLE_EQ(rs.precision, 0.5);
  EXPECT_DOUBLE_EQ(rs.recall, 1.0);
  EXPECT_DOUBLE_EQ(rs.f1, 2.0 / 3.0);
  EXPECT_EQ(m.confusion[4][1], 1u);
  EXPECT_MORSE_ERROR(confusion_and_f1(t, std::span(p).first(2)), "ShapeMismatch");
}

TEST(Metrics, Invariants) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(200);
    std::vector<GestureLabel> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = label_from_code(static_cast<int>(rng.below(6)));
      p[i] = rng.bernoulli(0.6) ? t[i] : label_from_code(static_cast<int>(rng.below(6)));
    }
    const auto m = confusion_and_f1(t, p);
    std::uint64_t sum = 0, trace = 0;
    for (std::size_t i = 0; i < kNumClasses; ++i)
      for (std::size_t j = 0; j < kNumClasses; ++j) {
        sum += m.confusion[i][j];
        if (i == j) trace += m.confusion[i][j];
      }
    EXPECT_EQ(sum, n);
    EXPECT_DOUBLE_EQ(m.accuracy, static_cast<double>(trace) / static_cast<double>(n));
    EXPECT_GE(m.macro_f1, 0.0);
    EXPECT_LE(m.macro_f1, 1.0);
  }
}

TEST(FalsePositives, Projection) {
  EXPECT_EQ(project_false_positives(0.0), 0.0);
  EXPECT_NEAR(project_false_positives(176.0 / 3600.0), 176.0, 0.5);
  EXPECT_EQ(project_false_positives(1.0), 3600.0);
  Confusion c{};
  c[0][0] = 90;
  c[0][4] = 6;
  c[0][5] = 4;
  const auto m = metrics_from_confusion(c);
  EXPECT_DOUBLE_EQ(m.random_to_goi_rate(), 0.1);
  EXPECT_NEAR(project_false_positives(m), 360.0, 1e-9);
}

TEST(Bench, EmptyIsAnError) {
  const auto d = small_data(1, 1);
  nn::Model m(nn::make_spec(nn::Variant::CnnMax), compute_norm_stats(d), 1);
  std::vector<ImuWindow> ws{d.samples[0].window};
  EXPECT_MORSE_ERROR(benchmark_inference(m, ws, 0), "EmptyBenchmark");
  EXPECT_MORSE_ERROR(benchmark_inference(m, {}, 5), "EmptyBenchmark");
  const auto s = benchmark_inference(m, ws, 5);
  EXPECT_EQ(s.n, 5u);
  EXPECT_LE(s.min_ms, s.mean_ms);
  EXPECT_LE(s.mean_ms, s.max_ms);
  for (const char* key : {"mean_ms", "p95_ms", "min_ms", "max_ms"}) EXPECT_TRUE(s.to_json().contains(key));
}

TEST(Loso, FoldsPartitionSubjects) {
  const auto d = small_data(7, 2);
  const auto folds = make_folds(d);
  ASSERT_EQ(folds.size(), 7u);
  std::set<int> tests, vals;
  for (const auto& f : folds) {
    tests.insert(f.test_subject);
    vals.insert(f.val_subject);
    EXPECT_EQ(f.train_subjects.size(), 5u);
    EXPECT_EQ(f.val_subject, f.test_subject % 7 + 1);
    std::set<int> seen{f.test_subject, f.val_subject};
    for (int s : f.train_subjects) EXPECT_TRUE(seen.insert(s).second);
    EXPECT_EQ(seen.size(), 7u);
    for (const auto& s : f.train) EXPECT_TRUE(s.subject_id != f.test_subject && s.subject_id != f.val_subject);
    for (const auto& s : f.test) EXPECT_EQ(s.subject_id, f.test_subject);
    for (const auto& s : f.val) EXPECT_EQ(s.subject_id, f.val_subject);
    EXPECT_EQ(f.train.size() + f.val.size() + f.test.size(), d.samples.size());
  }
  EXPECT_EQ(tests.size(), 7u);
  EXPECT_EQ(vals.size(), 7u);
  EXPECT_MORSE_ERROR(make_folds(small_data(2, 1)), "InsufficientSubjects");
}

TEST(Loso, Table3FoldOneSize) {
  const auto folds = make_folds(synth::gen_dataset({.table3 = true}));
  EXPECT_EQ(folds[0].test.size(), 601u);
}

TEST(Loso, ReproducibleAndThreadIndependent) {
  const auto d = small_data(4, 3);
  const auto runner = baselines::make_runner(baselines::Kind::Rf, {.rf = {.n_trees = 5}});
  auto run = [&](std::size_t threads) {
    LosoConfig cfg;
    cfg.runs = 2;
    cfg.master_seed = 9;
    cfg.threads = threads;
    return loso_cv(d, "rf", runner, cfg).to_json().dump();
  };
  const auto a = run(1);
  EXPECT_EQ(a, run(1));
  EXPECT_EQ(a, run(3));
  const auto j = nlohmann::json::parse(a);
  EXPECT_EQ(j["per_fold"].size(), 4u);
  for (const char* key : {"mean_accuracy", "per_class_f1", "confusion", "fp_per_hour"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

TEST(Loso, RunSeedsDiffer) {
  std::set<std::uint64_t> seeds;
  for (std::size_t f = 0; f < 7; ++f)
    for (std::size_t r = 0; r < 5; ++r) seeds.insert(run_seed(1, f, r));
  EXPECT_EQ(seeds.size(), 35u);
}
