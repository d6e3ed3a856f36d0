#pragma once

#include <cstdint>

#include "morse/core.hpp"
#include "morse/rng.hpp"

namespace morse::synth {

inline constexpr double kDefaultNoiseStd = 0.6;

/// Per-subject variation applied on top of the gesture templates.
struct SubjectProfile {
  int subject_id = 1;
  Hand hand = Hand::Right;
  double amplitude_scale = 1.0;  // ~[0.7, 1.3]
  double tempo_scale = 1.0;      // ~[0.8, 1.25]
  double tilt_rad = 0.0;         // device rotation about z
  double noise_std = kDefaultNoiseStd;
  std::uint64_t rng_seed = 0;
};

/// Draws a profile from the subject's own stream of `master_seed`.
SubjectProfile make_profile(int subject_id, std::uint64_t master_seed, double noise_std);

/// Hand pattern of the recorded subjects (1, 6, 7 left-handed), cycled.
Hand default_hand(int subject_id);

/// Renders one 5 s window of `label` for `profile`. Left hands negate the
/// x-axis channels (ax, gx) of the finished window.
ImuWindow gen_window(GestureLabel label, const SubjectProfile& profile, Rng& rng);

/// The bare motion of a gesture at the profile's amplitude and tempo: no
/// orientation, style, noise or handedness. Throws Validation/NoTemplate for
/// Random.
ImuWindow template_window(GestureLabel label, const SubjectProfile& profile, double phase = 0.0);

struct GenOptions {
  int n_subjects = 7;
  int per_class = 100;
  bool table3 = false;  // per-subject counts of the recorded dataset
  double noise_std = kDefaultNoiseStd;
  std::uint64_t master_seed = 1;
};

/// Per-class sample count of subject `subject_id` (1-based) in Table-3 mode.
int table3_count(int subject_id, GestureLabel label);

/// Subjects are generated independently from their own streams, so the
/// output does not depend on generation order.
Dataset gen_dataset(const GenOptions& options);

}  // namespace morse::synth
