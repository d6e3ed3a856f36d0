#include "morse/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "morse/error.hpp"
#include "morse/text.hpp"

namespace morse::features {

std::array<double, kStatsPerChannel> channel_stats(std::span<const double> x,
                                                   KurtosisConvention kurtosis) {
  const double n = static_cast<double>(x.size());
  double sum = 0.0;
  for (double v : x) sum += v;
  const double mean = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;

  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  const double median =
      sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);

  double skew = 0.0;
  double kurt = 0.0;
  if (m2 >= 1e-12) {
    skew = m3 / std::pow(m2, 1.5);
    kurt = m4 / (m2 * m2);
    if (kurtosis == KurtosisConvention::Excess) kurt -= 3.0;
  }
  return {mean, sorted.front(), sorted.back(), median, std::sqrt(m2), skew, kurt};
}

FeatureVector extract_features(const ImuWindow& window, KurtosisConvention kurtosis) {
  FeatureVector out{};
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto stats = channel_stats(window.channel(c), kurtosis);
    std::copy(stats.begin(), stats.end(), out.begin() + c * kStatsPerChannel);
  }
  return out;
}

std::vector<FeatureRow> extract_all(const Dataset& data, KurtosisConvention kurtosis) {
  std::vector<FeatureRow> rows;
  rows.reserve(data.samples.size());
  for (const auto& s : data.samples) {
    rows.push_back({s.subject_id, s.hand, s.label, extract_features(s.window, kurtosis)});
  }
  return rows;
}

void save_features_csv(const std::filesystem::path& path, std::span<const FeatureRow> rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "IoError", "cannot open " + path.string() + " for writing");
  os << "subject,hand,label";
  char buf[8];
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    std::snprintf(buf, sizeof buf, ",f%02zu", i);
    os << buf;
  }
  os << '\n';
  for (const auto& r : rows) {
    os << r.subject_id << ',' << hand_code(r.hand) << ',' << to_string(r.label);
    for (double v : r.values) os << ',' << text::format_double(v);
    os << '\n';
  }
  if (!os) throw Error(ErrorKind::Io, "IoError", "write failed: " + path.string());
}

}  // namespace morse::features
