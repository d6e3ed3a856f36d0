#include <algorithm>
#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "morse/features.hpp"
#include "morse/rng.hpp"
#include "morse/synth.hpp"

using namespace morse;
using features::KurtosisConvention;

using check::random_channel;
const auto& oracle_stats = check::stats_oracle;

TEST(Features, ConstantChannel) {
  std::vector<double> x(kWindowLength, 2.5);
  const auto s = features::channel_stats(x);
  const std::array<double, 7> expected{2.5, 2.5, 2.5, 2.5, 0.0, 0.0, 0.0};
  EXPECT_EQ(s, expected);
}

TEST(Features, TiledOneToFour) {
  std::vector<double> x(kWindowLength);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 1.0 + static_cast<double>(i % 4);
  const auto s = features::channel_stats(x);
  // 250 is not a multiple of 4: two extra values 1 and 2 shift the mean.
  const auto o = oracle_stats(x, true);
  for (std::size_t k = 0; k < 7; ++k) EXPECT_NEAR(s[k], o[k], 1e-10);

  std::vector<double> y(248);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 + static_cast<double>(i % 4);
  const auto t = features::channel_stats(y);
  EXPECT_NEAR(t[0], 2.5, 1e-12);
  EXPECT_NEAR(t[3], 2.5, 1e-12);
  EXPECT_NEAR(t[4], std::sqrt(1.25), 1e-12);
  EXPECT_NEAR(t[5], 0.0, 1e-12);
  EXPECT_NEAR(t[6], 1.64 - 3.0, 1e-12);  // m4 = 2.5625, m2^2 = 1.5625
}

TEST(Features, MatchesOracle) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_channel(rng, trial % 3 == 0 ? kWindowLength : 7 + trial % 40);
    for (bool excess : {true, false}) {
      const auto s = features::channel_stats(
          x, excess ? KurtosisConvention::Excess : KurtosisConvention::Raw);
      const auto o = oracle_stats(x, excess);
      for (std::size_t k = 0; k < 7; ++k) {
        EXPECT_NEAR(s[k], o[k], 1e-10 * std::max(1.0, std::abs(o[k]))) << "stat " << k;
      }
    }
  }
}

TEST(Features, NormalKurtosisNearZero) {
  Rng rng(5);
  double sum = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    std::vector<double> x(kWindowLength);
    for (double& v : x) v = rng.normal();
    sum += features::channel_stats(x)[6];
  }
  EXPECT_LT(std::abs(sum / 100.0), 0.5);
}

TEST(Features, ShiftScaleNegation) {
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto x = random_channel(rng, kWindowLength);
    const auto base = features::channel_stats(x);
    const double c = rng.uniform(-50.0, 50.0);
    const double a = rng.uniform(0.1, 20.0);
    std::vector<double> shifted(x), scaled(x), negated(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
      shifted[i] += c;
      scaled[i] *= a;
      negated[i] = -negated[i];
    }
    const auto s = features::channel_stats(shifted);
    for (std::size_t k : {0u, 1u, 2u, 3u}) EXPECT_NEAR(s[k], base[k] + c, 1e-9);
    for (std::size_t k : {4u, 5u, 6u}) EXPECT_NEAR(s[k], base[k], 1e-9);
    const auto m = features::channel_stats(scaled);
    EXPECT_NEAR(m[4], a * base[4], 1e-9 * a);
    EXPECT_NEAR(m[5], base[5], 1e-9);
    EXPECT_NEAR(m[6], base[6], 1e-9);
    EXPECT_NEAR(features::channel_stats(negated)[5], -base[5], 1e-12);
  }
}

TEST(Features, VectorLayoutIsChannelMajor) {
  ImuWindow w;
  for (std::size_t c = 0; c < kChannels; ++c)
    for (std::size_t t = 0; t < kWindowLength; ++t)
      w.at(c, t) = static_cast<double>(c * 10) + static_cast<double>(t % 5);
  const auto f = features::extract_features(w);
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto s = features::channel_stats(w.channel(c));
    for (std::size_t k = 0; k < 7; ++k) EXPECT_EQ(f[c * 7 + k], s[k]);
  }
}

TEST(Features, CsvLayout) {
  morse::test::TempDir dir("feat");
  const auto d = synth::gen_dataset({.n_subjects = 1, .per_class = 1});
  const auto rows = features::extract_all(d);
  ASSERT_EQ(rows.size(), 6u);
  features::save_features_csv(dir / "f.csv", rows);
  std::ifstream is(dir / "f.csv");
  std::string header, line;
  std::getline(is, header);
  EXPECT_EQ(header.rfind("subject,hand,label,f00,f01", 0), 0u);
  EXPECT_EQ(header.substr(header.size() - 4), ",f41");
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 44);
  }
  EXPECT_EQ(n, 6u);
}
