#include "morse/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "morse/error.hpp"

namespace morse {

namespace {

struct GestureNames {
  GestureLabel label;
  std::string_view short_name;
  std::string_view long_name;
};

constexpr std::array<GestureNames, kNumClasses> kGestureNames{{
    {GestureLabel::Random, "Rnd", "Random"},
    {GestureLabel::RecommendedStop, "RS", "RecommendedStop"},
    {GestureLabel::RecommendedEvacuation, "RE", "RecommendedEvacuation"},
    {GestureLabel::EmergencyContained, "EC", "EmergencyContained"},
    {GestureLabel::Fire, "F", "Fire"},
    {GestureLabel::Distress, "DS", "Distress"},
}};

}  // namespace

GestureLabel label_from_code(int code) {
  if (code < 0 || code >= static_cast<int>(kNumClasses)) {
    throw Error(ErrorKind::Validation, "UnknownGesture",
                "gesture code out of range: " + std::to_string(code));
  }
  return static_cast<GestureLabel>(code);
}

std::string_view to_string(GestureLabel l) { return kGestureNames[label_code(l)].short_name; }

std::string_view full_name(GestureLabel l) { return kGestureNames[label_code(l)].long_name; }

GestureLabel parse_gesture(std::string_view s) {
  for (const auto& n : kGestureNames) {
    if (s == n.short_name || s == n.long_name) return n.label;
  }
  throw Error(ErrorKind::Validation, "UnknownGesture", "unknown gesture '" + std::string(s) + "'");
}

char hand_code(Hand h) { return h == Hand::Left ? 'L' : 'R'; }

Hand parse_hand(std::string_view s) {
  if (s == "L" || s == "Left") return Hand::Left;
  if (s == "R" || s == "Right") return Hand::Right;
  throw Error(ErrorKind::Validation, "UnknownHand", "unknown hand '" + std::string(s) + "'");
}

double ImuSample::channel(std::size_t c) const {
  switch (c) {
    case 0: return ax;
    case 1: return ay;
    case 2: return az;
    case 3: return gx;
    case 4: return gy;
    case 5: return gz;
    default: break;
  }
  throw Error(ErrorKind::Validation, "ShapeMismatch", "channel index out of range");
}

ImuWindow ImuWindow::from_values(std::span<const double> values) {
  if (values.size() != kWindowValues) {
    throw Error(ErrorKind::Validation, "ShapeMismatch",
                "window needs " + std::to_string(kWindowValues) + " values, got " +
                    std::to_string(values.size()));
  }
  ImuWindow w;
  std::copy(values.begin(), values.end(), w.data_.begin());
  if (!w.all_finite()) {
    throw Error(ErrorKind::Validation, "NonFinite", "window contains non-finite values");
  }
  return w;
}

bool ImuWindow::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::vector<int> Dataset::subjects() const {
  std::set<int> ids;
  for (const auto& s : samples) ids.insert(s.subject_id);
  return {ids.begin(), ids.end()};
}

namespace {

void check_monotonic(std::span<const ImuSample> stream) {
  for (std::size_t i = 1; i < stream.size(); ++i) {
    if (stream[i].t_ms < stream[i - 1].t_ms) {
      throw Error(ErrorKind::Validation, "NonMonotonic",
                  "timestamp decreases at sample " + std::to_string(i));
    }
  }
}

// Earliest grid point sits (N-1) periods before the window end.
constexpr double kGridSpanMs = (kWindowLength - 1) * kSamplePeriodMs;

ImuWindow resample_ending_at(std::span<const ImuSample> stream, double end_ms) {
  ImuWindow out;
  auto time_less = [](const ImuSample& s, double t) { return s.t_ms < t; };
  for (std::size_t i = 0; i < kWindowLength; ++i) {
    const double tau = end_ms - static_cast<double>(kWindowLength - 1 - i) * kSamplePeriodMs;
    auto it = std::lower_bound(stream.begin(), stream.end(), tau, time_less);
    if (it != stream.end() && it->t_ms == tau) {
      // Exact hit: take the latest sample carrying this timestamp.
      auto last = it;
      while (std::next(last) != stream.end() && std::next(last)->t_ms == tau) ++last;
      for (std::size_t c = 0; c < kChannels; ++c) out.at(c, i) = last->channel(c);
      continue;
    }
    const ImuSample& right = *it;
    const ImuSample& left = *std::prev(it);
    const double frac = (tau - left.t_ms) / (right.t_ms - left.t_ms);
    for (std::size_t c = 0; c < kChannels; ++c) {
      const double a = left.channel(c);
      out.at(c, i) = a + (right.channel(c) - a) * frac;
    }
  }
  return out;
}

}  // namespace

ImuWindow resample_to_window(std::span<const ImuSample> stream) {
  if (stream.size() < 2) {
    throw Error(ErrorKind::Validation, "TooShort", "stream needs at least 2 samples");
  }
  check_monotonic(stream);
  const double span = stream.back().t_ms - stream.front().t_ms;
  if (span < kGridSpanMs) {
    throw Error(ErrorKind::Validation, "TooShort",
                "stream spans " + std::to_string(span) + " ms, need " +
                    std::to_string(kGridSpanMs));
  }
  return resample_ending_at(stream, stream.back().t_ms);
}

std::vector<TimedWindow> sliding_windows(std::span<const ImuSample> stream) {
  std::vector<TimedWindow> out;
  if (stream.size() < 2) return out;
  check_monotonic(stream);
  const double t0 = stream.front().t_ms;
  const double t_last = stream.back().t_ms;
  for (double end = t0 + kWindowDurationMs; end <= t_last; end += kStreamStrideMs) {
    out.push_back({end, resample_ending_at(stream, end)});
  }
  return out;
}

NormStats compute_norm_stats(std::span<const LabeledWindow> train) {
  if (train.empty()) {
    throw Error(ErrorKind::Validation, "EmptyDataset", "cannot compute statistics of no samples");
  }
  NormStats stats;
  const double n = static_cast<double>(train.size() * kWindowLength);
  for (std::size_t c = 0; c < kChannels; ++c) {
    double sum = 0.0;
    for (const auto& s : train)
      for (double v : s.window.channel(c)) sum += v;
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& s : train)
      for (double v : s.window.channel(c)) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / n);
    if (!(sd >= 1e-12)) {
      throw Error(ErrorKind::Validation, "DegenerateChannel",
                  "channel " + std::string(kChannelNames[c]) + " has zero variance");
    }
    stats.mean[c] = mean;
    stats.std[c] = sd;
  }
  return stats;
}

NormStats compute_norm_stats(const Dataset& train) { return compute_norm_stats(train.samples); }

ImuWindow normalize(const ImuWindow& window, const NormStats& stats) {
  ImuWindow out;
  for (std::size_t c = 0; c < kChannels; ++c) {
    auto src = window.channel(c);
    auto dst = out.channel(c);
    for (std::size_t t = 0; t < kWindowLength; ++t) dst[t] = (src[t] - stats.mean[c]) / stats.std[c];
  }
  return out;
}

Dataset normalize(const Dataset& data, const NormStats& stats) {
  Dataset out = data;
  for (auto& s : out.samples) s.window = normalize(s.window, stats);
  return out;
}

}  // namespace morse
