#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "morse/core.hpp"

namespace morse::features {

inline constexpr std::size_t kStatsPerChannel = 7;
inline constexpr std::size_t kFeatureCount = kChannels * kStatsPerChannel;  // 42
inline constexpr std::array<std::string_view, kStatsPerChannel> kStatNames{
    "mean", "min", "max", "median", "std", "skewness", "kurtosis"};

enum class KurtosisConvention { Excess, Raw };

/// Channel-major: for each of ax..gz the 7 statistics in kStatNames order.
using FeatureVector = std::array<double, kFeatureCount>;

/// Population moments of one channel. Skewness and kurtosis are 0 when the
/// second central moment is below 1e-12.
std::array<double, kStatsPerChannel> channel_stats(
    std::span<const double> x, KurtosisConvention kurtosis = KurtosisConvention::Excess);

FeatureVector extract_features(const ImuWindow& window,
                               KurtosisConvention kurtosis = KurtosisConvention::Excess);

struct FeatureRow {
  int subject_id;
  Hand hand;
  GestureLabel label;
  FeatureVector values;
};

/// Features of every sample, in dataset order.
std::vector<FeatureRow> extract_all(const Dataset& data,
                                    KurtosisConvention kurtosis = KurtosisConvention::Excess);

/// subject,hand,label,f00..f41
void save_features_csv(const std::filesystem::path& path, std::span<const FeatureRow> rows);

}  // namespace morse::features
