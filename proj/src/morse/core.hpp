#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace morse {

inline constexpr std::size_t kChannels = 6;
inline constexpr std::size_t kWindowLength = 250;
inline constexpr std::size_t kWindowValues = kChannels * kWindowLength;
inline constexpr double kSampleRateHz = 50.0;
inline constexpr double kSamplePeriodMs = 1000.0 / kSampleRateHz;
inline constexpr double kWindowDurationMs = 5000.0;
inline constexpr double kStreamStrideMs = 1000.0;
inline constexpr std::size_t kNumClasses = 6;

/// Channel order used everywhere: model input rows, CSV columns, features.
inline constexpr std::array<std::string_view, kChannels> kChannelNames{"ax", "ay", "az",
                                                                        "gx", "gy", "gz"};

// Integer codes are stable and appear in files; do not reorder.
enum class GestureLabel : std::uint8_t {
  Random = 0,
  RecommendedStop = 1,
  RecommendedEvacuation = 2,
  EmergencyContained = 3,
  Fire = 4,
  Distress = 5,
};

inline constexpr std::array<GestureLabel, kNumClasses> kAllGestures{
    GestureLabel::Random,           GestureLabel::RecommendedStop,
    GestureLabel::RecommendedEvacuation, GestureLabel::EmergencyContained,
    GestureLabel::Fire,             GestureLabel::Distress};

constexpr int label_code(GestureLabel l) { return static_cast<int>(l); }
GestureLabel label_from_code(int code);

/// Short form: Rnd, RS, RE, EC, F, DS.
std::string_view to_string(GestureLabel l);
std::string_view full_name(GestureLabel l);
/// Accepts the short form or the full name (case-sensitive).
GestureLabel parse_gesture(std::string_view s);

enum class Hand : std::uint8_t { Left, Right };

char hand_code(Hand h);
Hand parse_hand(std::string_view s);

struct ImuSample {
  double t_ms = 0.0;
  double ax = 0.0, ay = 0.0, az = 0.0;
  double gx = 0.0, gy = 0.0, gz = 0.0;

  double channel(std::size_t c) const;
};

/// 6 x 250 block of motion data, channel-major.
class ImuWindow {
 public:
  ImuWindow() { data_.fill(0.0); }

  /// Throws Validation/ShapeMismatch on wrong length, Validation/NonFinite on
  /// NaN or infinity.
  static ImuWindow from_values(std::span<const double> values);

  double& at(std::size_t channel, std::size_t t) { return data_[channel * kWindowLength + t]; }
  double at(std::size_t channel, std::size_t t) const {
    return data_[channel * kWindowLength + t];
  }

  std::span<double, kWindowLength> channel(std::size_t c) {
    return std::span<double, kWindowLength>(data_.data() + c * kWindowLength, kWindowLength);
  }
  std::span<const double, kWindowLength> channel(std::size_t c) const {
    return std::span<const double, kWindowLength>(data_.data() + c * kWindowLength,
                                                  kWindowLength);
  }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  bool all_finite() const;

  friend bool operator==(const ImuWindow&, const ImuWindow&) = default;

 private:
  std::array<double, kWindowValues> data_;
};

struct LabeledWindow {
  ImuWindow window;
  GestureLabel label = GestureLabel::Random;
  int subject_id = 1;
  Hand hand = Hand::Right;
};

struct NormStats {
  std::array<double, kChannels> mean{};
  std::array<double, kChannels> std{};
};

struct DatasetMeta {
  std::uint64_t seed = 0;
  int schema_version = 1;
  std::string generator;
};

struct Dataset {
  std::vector<LabeledWindow> samples;
  DatasetMeta meta;

  std::vector<int> subjects() const;  // sorted, unique
};

/// Interpolates the trailing part of `stream` onto 250 points spaced 20 ms
/// apart and ending at the last timestamp.
ImuWindow resample_to_window(std::span<const ImuSample> stream);

struct TimedWindow {
  double end_ms = 0.0;
  ImuWindow window;
};

/// One window per second of stream, the first ending 5000 ms after the first
/// sample.
std::vector<TimedWindow> sliding_windows(std::span<const ImuSample> stream);

/// Pooled over every sample and timestep; population standard deviation.
NormStats compute_norm_stats(std::span<const LabeledWindow> train);
NormStats compute_norm_stats(const Dataset& train);

ImuWindow normalize(const ImuWindow& window, const NormStats& stats);
Dataset normalize(const Dataset& data, const NormStats& stats);

}  // namespace morse
