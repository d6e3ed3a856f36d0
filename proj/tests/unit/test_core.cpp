#include <cmath>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "morse/core.hpp"
#include "morse/dataset_io.hpp"
#include "morse/rng.hpp"
#include "morse/synth.hpp"

using namespace morse;
using morse::test::TempDir;

namespace {

std::vector<ImuSample> constant_stream(double value, double duration_ms, double period_ms) {
  std::vector<ImuSample> s;
  for (double t = 0.0; t <= duration_ms + 1e-9; t += period_ms) {
    s.push_back({t, value, value, value, value, value, value});
  }
  return s;
}

// Independent linear interpolation: scan for the bracketing pair of every
// grid point.
double oracle_at(const std::vector<ImuSample>& s, std::size_t c, double t) {
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i].t_ms <= t && t <= s[i + 1].t_ms) {
      if (s[i + 1].t_ms == s[i].t_ms) return s[i].channel(c);
      const double w = (t - s[i].t_ms) / (s[i + 1].t_ms - s[i].t_ms);
      return (1.0 - w) * s[i].channel(c) + w * s[i + 1].channel(c);
    }
  }
  ADD_FAILURE() << "grid point " << t << " outside stream";
  return 0.0;
}

}  // namespace

TEST(Labels, CodesAndNamesRoundTrip) {
  for (auto g : kAllGestures) {
    EXPECT_EQ(parse_gesture(to_string(g)), g);
    EXPECT_EQ(parse_gesture(full_name(g)), g);
    EXPECT_EQ(label_from_code(label_code(g)), g);
  }
  EXPECT_EQ(to_string(GestureLabel::Distress), "DS");
  EXPECT_EQ(label_code(GestureLabel::Fire), 4);
  EXPECT_MORSE_ERROR(parse_gesture("fire"), "UnknownGesture");
  EXPECT_MORSE_ERROR(parse_hand("X"), "UnknownHand");
}

TEST(Window, RejectsWrongLengthAndNonFinite) {
  std::vector<double> v(kWindowValues - 1, 0.0);
  EXPECT_MORSE_ERROR(ImuWindow::from_values(v), "ShapeMismatch");
  v.push_back(std::nan(""));
  EXPECT_MORSE_ERROR(ImuWindow::from_values(v), "NonFinite");
}

TEST(Resample, ConstantStream) {
  const auto w = resample_to_window(constant_stream(3.0, 6000.0, 17.0));
  for (double v : w.values()) EXPECT_EQ(v, 3.0);
}

TEST(Resample, ExactGridPassesThrough) {
  std::vector<ImuSample> s;
  Rng rng(4);
  for (std::size_t i = 0; i < kWindowLength; ++i) {
    s.push_back({20.0 * static_cast<double>(i), rng.normal(), rng.normal(), rng.normal(),
                 rng.normal(), rng.normal(), rng.normal()});
  }
  const auto w = resample_to_window(s);
  for (std::size_t c = 0; c < kChannels; ++c)
    for (std::size_t t = 0; t < kWindowLength; ++t) EXPECT_EQ(w.at(c, t), s[t].channel(c));
}

TEST(Resample, HundredHertzRampMatchesOracle) {
  std::vector<ImuSample> s;
  for (int i = 0; i <= 498; ++i) {
    const double t = 10.0 * i;
    const double v = t / 4980.0;
    s.push_back({t, v, v, v, v, v, v});
  }
  const auto w = resample_to_window(s);
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (std::size_t t = 0; t < kWindowLength; ++t) {
      EXPECT_NEAR(w.at(c, t), static_cast<double>(t) / 249.0, 1e-12);
      EXPECT_NEAR(w.at(c, t), oracle_at(s, c, 20.0 * static_cast<double>(t)), 1e-12);
    }
  }
}

TEST(Resample, RandomStreamsMatchOracle) {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ImuSample> s;
    double t = rng.uniform(0.0, 1000.0);
    const double end = t + rng.uniform(5000.0, 8000.0);
    while (t < end) {
      s.push_back({t, rng.normal(), rng.normal(), rng.normal(), rng.normal(), rng.normal(),
                   rng.normal()});
      t += rng.uniform(5.0, 40.0);
    }
    const auto w = resample_to_window(s);
    const double last = s.back().t_ms;
    for (std::size_t c = 0; c < kChannels; ++c) {
      for (std::size_t i = 0; i < kWindowLength; ++i) {
        const double ti = last - 20.0 * static_cast<double>(kWindowLength - 1 - i);
        EXPECT_NEAR(w.at(c, i), oracle_at(s, c, ti), 1e-12);
      }
    }
  }
}

TEST(Resample, Errors) {
  EXPECT_MORSE_ERROR(resample_to_window(constant_stream(1.0, 0.0, 20.0)), "TooShort");
  EXPECT_MORSE_ERROR(resample_to_window(constant_stream(1.0, 4000.0, 20.0)), "TooShort");
  auto s = constant_stream(1.0, 6000.0, 20.0);
  std::swap(s[10], s[11]);
  EXPECT_MORSE_ERROR(resample_to_window(s), "NonMonotonic");
}

TEST(SlidingWindows, Counts) {
  EXPECT_EQ(sliding_windows(constant_stream(0.0, 5000.0, 20.0)).size(), 1u);
  const auto nine = sliding_windows(constant_stream(0.0, 9000.0, 20.0));
  ASSERT_EQ(nine.size(), 5u);
  for (std::size_t i = 0; i < nine.size(); ++i) {
    EXPECT_DOUBLE_EQ(nine[i].end_ms, 5000.0 + 1000.0 * static_cast<double>(i));
  }
  EXPECT_EQ(sliding_windows(constant_stream(0.0, 4900.0, 20.0)).size(), 0u);
  for (int T = 5; T <= 14; ++T) {
    EXPECT_EQ(sliding_windows(constant_stream(0.0, 1000.0 * T, 20.0)).size(),
              static_cast<std::size_t>(T - 5 + 1));
  }
}

TEST(NormStats, HandComputed) {
  LabeledWindow w;
  for (std::size_t c = 0; c < kChannels; ++c)
    for (std::size_t t = 0; t < kWindowLength; ++t) w.window.at(c, t) = t % 2 ? 3.0 : 1.0;
  const auto s = compute_norm_stats(std::vector<LabeledWindow>{w});
  for (std::size_t c = 0; c < kChannels; ++c) {
    EXPECT_DOUBLE_EQ(s.mean[c], 2.0);
    EXPECT_DOUBLE_EQ(s.std[c], 1.0);
  }
}

TEST(NormStats, DegenerateChannel) {
  Dataset d = synth::gen_dataset({.n_subjects = 1, .per_class = 1});
  for (auto& s : d.samples)
    for (double& v : s.window.channel(0)) v = 0.0;
  EXPECT_MORSE_ERROR(compute_norm_stats(d), "DegenerateChannel");
  EXPECT_MORSE_ERROR(compute_norm_stats(Dataset{}), "EmptyDataset");
}

TEST(NormStats, ZScoreIdempotence) {
  const Dataset d = synth::gen_dataset({.n_subjects = 2, .per_class = 3, .master_seed = 9});
  const auto s = compute_norm_stats(d);
  const Dataset n = normalize(d, s);
  const auto s2 = compute_norm_stats(n);
  for (std::size_t c = 0; c < kChannels; ++c) {
    EXPECT_LT(std::abs(s2.mean[c]), 1e-9);
    EXPECT_LT(std::abs(s2.std[c] - 1.0), 1e-9);
  }
  const Dataset nn = normalize(n, s2);
  for (std::size_t i = 0; i < n.samples.size(); ++i) {
    const auto a = n.samples[i].window.values();
    const auto b = nn.samples[i].window.values();
    for (std::size_t k = 0; k < a.size(); ++k) ASSERT_NEAR(a[k], b[k], 1e-9);
  }
}

TEST(Normalize, Examples) {
  NormStats s;
  s.mean.fill(2.0);
  s.std.fill(1.5);
  ImuWindow w;
  for (double& v : w.values()) v = 5.0;
  for (double v : normalize(w, s).values()) EXPECT_DOUBLE_EQ(v, 2.0);
  for (double& v : w.values()) v = 2.0;
  for (double v : normalize(w, s).values()) EXPECT_EQ(v, 0.0);

  NormStats unit;
  unit.std.fill(1.0);
  Rng rng(3);
  for (double& v : w.values()) v = rng.normal();
  EXPECT_EQ(normalize(w, unit), w);
}

TEST(DatasetIo, RoundTripIsExact) {
  TempDir dir("io");
  const Dataset d = synth::gen_dataset({.n_subjects = 3, .per_class = 2, .master_seed = 11});
  save_dataset(dir / "d.csv", d);
  EXPECT_TRUE(std::filesystem::exists(dir / "d.csv.meta.json"));
  const Dataset r = load_dataset(dir / "d.csv");
  ASSERT_EQ(r.samples.size(), d.samples.size());
  EXPECT_EQ(r.meta.seed, 11u);
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    EXPECT_EQ(r.samples[i].label, d.samples[i].label);
    EXPECT_EQ(r.samples[i].subject_id, d.samples[i].subject_id);
    EXPECT_EQ(r.samples[i].hand, d.samples[i].hand);
    const auto a = d.samples[i].window.values();
    const auto b = r.samples[i].window.values();
    for (std::size_t k = 0; k < a.size(); ++k) ASSERT_LE(morse::test::ulp_distance(a[k], b[k]), 1u);
  }
}

TEST(DatasetIo, SidecarIsOptional) {
  TempDir dir("io");
  const Dataset d = synth::gen_dataset({.n_subjects = 1, .per_class = 1});
  save_dataset(dir / "d.csv", d);
  std::filesystem::remove(dir / "d.csv.meta.json");
  EXPECT_EQ(load_dataset(dir / "d.csv").samples.size(), 6u);
}

TEST(DatasetIo, Errors) {
  std::istringstream empty("");
  EXPECT_MORSE_ERROR(read_dataset_csv(empty), "ParseError");

  std::istringstream short_header("subject,hand,label,ax000\n1,R,F,0.5\n");
  EXPECT_MORSE_ERROR(read_dataset_csv(short_header), "SchemaMismatch");

  std::ostringstream os;
  write_dataset_csv(os, synth::gen_dataset({.n_subjects = 1, .per_class = 1}));
  std::string text = os.str();
  const auto second_line = text.find('\n') + 1;
  const auto comma = text.find(',', second_line);
  std::istringstream bad_row(text.substr(0, second_line) + text.substr(comma + 1));
  EXPECT_MORSE_ERROR(read_dataset_csv(bad_row), "SchemaMismatch");

  std::string bad_label = text;
  const auto label_start = bad_label.find(',', bad_label.find(',', second_line) + 1) + 1;
  bad_label.insert(label_start, "zz");
  std::istringstream bl(bad_label);
  EXPECT_MORSE_ERROR(read_dataset_csv(bl), "ParseError");

  EXPECT_MORSE_ERROR(load_dataset("/nonexistent/d.csv"), "IoError");
}

TEST(DatasetIo, HeaderLayout) {
  const std::string h = dataset_csv_header();
  EXPECT_EQ(h.rfind("subject,hand,label,ax000,ax001", 0), 0u);
  EXPECT_NE(h.find(",ax249,ay000,"), std::string::npos);
  EXPECT_EQ(h.substr(h.size() - 6), ",gz249");
  EXPECT_EQ(std::count(h.begin(), h.end(), ','), 1502);
}
