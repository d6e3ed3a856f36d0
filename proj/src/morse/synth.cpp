#include "morse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "morse/error.hpp"

namespace morse::synth {

namespace {

constexpr double kG = 9.81;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kConfuserRate = 0.3;
constexpr double kWobbleRad = 0.2;
constexpr double kStyleSpread = 0.1;
constexpr double kStyleRad = 0.2;

// Per-subject gesture counts of the recorded dataset, columns in label order.
constexpr int kTable3[7][kNumClasses] = {
    {100, 100, 100, 100, 100, 101}, {100, 100, 100, 100, 100, 100},
    {100, 71, 101, 99, 99, 100},    {100, 100, 100, 100, 100, 100},
    {100, 100, 101, 101, 106, 115}, {100, 103, 102, 102, 101, 101},
    {100, 100, 100, 100, 100, 100},
};

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

double smoothstep_slope(double x) { return (x <= 0.0 || x >= 1.0) ? 0.0 : 6.0 * x * (1.0 - x); }

// Per-window variation around the subject profile.
struct Motion {
  double amp;
  double tempo;
  double phase;
  double onset_s;
};

using Channels = std::array<double, kChannels>;

// Lift for ~1.5 s, then back-and-forth swinging of the raised arm.
Channels recommended_evacuation(double t, const Motion& m) {
  const double x = (t - m.onset_s - 0.1) / 1.4;
  const double lift = smoothstep(x);
  const double w = kTwoPi * 1.5 * m.tempo;
  const double s = std::sin(w * t + m.phase);
  const double c = std::cos(w * t + m.phase);
  return {kG * (1.0 - lift) + m.amp * 3.2 * lift * s,
          -0.95 * kG * lift + m.amp * 0.6 * lift * std::sin(2.0 * w * t + m.phase),
          1.0 + m.amp * 0.5 * lift * c,
          0.2 * std::sin(0.5 * t),
          -2.0 * smoothstep_slope(x) / 1.4,
          m.amp * 2.6 * lift * c};
}

// Arms above the head, repeatedly crossing along a diagonal.
Channels recommended_stop(double t, const Motion& m) {
  const double lift = smoothstep((t - m.onset_s) / 0.6);
  const double w = kTwoPi * 1.1 * m.tempo;
  const double s = std::sin(w * t + m.phase);
  const double c = std::cos(w * t + m.phase);
  return {kG * (1.0 - lift) + lift * (0.8 + m.amp * 2.4 * s),
          -9.3 * lift + m.amp * 0.9 * lift * std::sin(2.0 * w * t + 2.0 * m.phase),
          lift * m.amp * (2.2 * s + 0.6 * c),
          lift * m.amp * 1.4 * c,
          -lift * m.amp * 1.4 * c,
          lift * m.amp * 0.3 * std::sin(2.0 * w * t)};
}

// Figure-8: horizontal axis at f, vertical axis at 2f.
Channels fire(double t, const Motion& m) {
  const double w = kTwoPi * 0.9 * m.tempo;
  const double a = w * t + m.phase;
  return {m.amp * 3.0 * std::sin(a),
          2.0 + m.amp * 2.6 * std::sin(2.0 * a),
          8.8 + m.amp * 0.5 * std::sin(w * t),
          m.amp * 0.5 * std::cos(2.0 * a),
          m.amp * 1.9 * std::cos(2.0 * a),
          m.amp * 2.2 * std::cos(a)};
}

// Slow outward-and-down sweeps ending with crossed wrists.
Channels emergency_contained(double t, const Motion& m) {
  const double w = kTwoPi * 0.65 * m.tempo;
  const double a = w * t + m.phase;
  const double sweep = std::sin(a) + 0.35 * std::sin(2.0 * a);
  return {4.0 + m.amp * 2.2 * sweep,
          -6.5 + m.amp * 1.2 * std::cos(a),
          -5.0 + m.amp * 3.0 * sweep,
          m.amp * 1.0 * std::cos(a),
          m.amp * 2.4 * std::cos(a) * (1.0 + 0.5 * std::sin(w * t)),
          -m.amp * 0.6 * std::sin(a)};
}

// Fast left/right wrist rotation; gravity rolls in the y-z plane.
Channels distress(double t, const Motion& m) {
  const double w = kTwoPi * 2.8 * m.tempo;
  const double a = w * t + m.phase;
  const double roll = 0.6 * m.amp * std::sin(a);
  return {0.5 + 0.3 * std::sin(0.7 * t),
          kG * std::sin(roll),
          kG * std::cos(roll),
          m.amp * 5.5 * std::cos(a),
          m.amp * 0.4 * std::sin(2.0 * a),
          m.amp * 0.3 * std::cos(0.5 * a)};
}

// Everyday movement: random arm orientation plus a mix of low-amplitude
// oscillations, walking bounce, slow reorientation and low-pass noise.
void random_motion(std::array<Channels, kWindowLength>& out, const Motion& m, Rng& rng) {
  Channels g0{};
  Channels g1{};
  for (int k = 0; k < 2; ++k) {
    Channels& g = k == 0 ? g0 : g1;
    double n = 0.0;
    for (int i = 0; i < 3; ++i) {
      g[i] = rng.normal();
      n += g[i] * g[i];
    }
    n = std::sqrt(std::max(n, 1e-12));
    for (int i = 0; i < 3; ++i) g[i] = kG * g[i] / n;
  }
  const bool reorient = rng.uniform() < 0.5;

  struct Osc {
    std::size_t channel;
    double amp;
    double freq;
    double phase;
  };
  std::vector<Osc> oscs;
  const auto n_osc = 1 + rng.below(3);
  for (std::uint64_t k = 0; k < n_osc; ++k) {
    const auto ch = static_cast<std::size_t>(rng.below(kChannels));
    const double amp = (ch < 3 ? rng.uniform(0.3, 1.8) : rng.uniform(0.2, 1.5)) * m.amp;
    oscs.push_back({ch, amp, rng.uniform(0.2, 2.5), rng.uniform(0.0, kTwoPi)});
  }
  const bool walking = rng.uniform() < 0.35;
  const double step_hz = rng.uniform(1.7, 2.2);
  const double walk_phase = rng.uniform(0.0, kTwoPi);
  const double ar_sigma = rng.uniform(0.05, 0.35);

  Channels drift{};
  for (std::size_t i = 0; i < kWindowLength; ++i) {
    const double t = static_cast<double>(i) / kSampleRateHz;
    const double mix = reorient ? smoothstep((t - m.onset_s - 1.0) / 3.0) : 0.0;
    Channels v{};
    for (int c = 0; c < 3; ++c) v[c] = (1.0 - mix) * g0[c] + mix * g1[c];
    for (const auto& o : oscs) v[o.channel] += o.amp * std::sin(kTwoPi * o.freq * t + o.phase);
    if (walking) {
      v[1] += 1.5 * m.amp * std::sin(kTwoPi * step_hz * t + walk_phase);
      v[5] += 1.0 * m.amp * std::sin(kTwoPi * 0.5 * step_hz * t + walk_phase);
    }
    for (std::size_t c = 0; c < kChannels; ++c) {
      drift[c] = 0.95 * drift[c] + ar_sigma * rng.normal();
      v[c] += drift[c];
    }
    out[i] = v;
  }
}

Channels gesture_sample(GestureLabel label, double t, const Motion& m) {
  switch (label) {
    case GestureLabel::RecommendedEvacuation: return recommended_evacuation(t, m);
    case GestureLabel::RecommendedStop: return recommended_stop(t, m);
    case GestureLabel::Fire: return fire(t, m);
    case GestureLabel::EmergencyContained: return emergency_contained(t, m);
    case GestureLabel::Distress: return distress(t, m);
    case GestureLabel::Random: break;
  }
  return {};
}

struct Rotation {
  std::array<std::array<double, 3>, 3> r{};

  // R = Rz * Ry * Rx
  static Rotation from_angles(double ax, double ay, double az) {
    const double cx = std::cos(ax), sx = std::sin(ax);
    const double cy = std::cos(ay), sy = std::sin(ay);
    const double cz = std::cos(az), sz = std::sin(az);
    Rotation out;
    out.r = {{{cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx},
              {sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx},
              {-sy, cy * sx, cy * cx}}};
    return out;
  }

  void apply(Channels& v, std::size_t base) const {
    const double x = v[base], y = v[base + 1], z = v[base + 2];
    for (std::size_t k = 0; k < 3; ++k) v[base + k] = r[k][0] * x + r[k][1] * y + r[k][2] * z;
  }
};

}  // namespace

Hand default_hand(int subject_id) {
  const int k = (subject_id - 1) % 7;
  return (k == 0 || k == 5 || k == 6) ? Hand::Left : Hand::Right;
}

SubjectProfile make_profile(int subject_id, std::uint64_t master_seed, double noise_std) {
  if (noise_std < 0.0) {
    throw Error(ErrorKind::Usage, "InvalidNoise", "noise standard deviation must be >= 0");
  }
  Rng rng = Rng::stream(master_seed, static_cast<std::uint64_t>(subject_id));
  SubjectProfile p;
  p.subject_id = subject_id;
  p.hand = default_hand(subject_id);
  p.amplitude_scale = rng.uniform(0.7, 1.3);
  p.tempo_scale = rng.uniform(0.8, 1.25);
  p.tilt_rad = rng.uniform(-0.3, 0.3);
  p.noise_std = noise_std;
  p.rng_seed = rng.next_u64();
  return p;
}

ImuWindow gen_window(GestureLabel label, const SubjectProfile& profile, Rng& rng) {
  // How this subject habitually performs this gesture: fixed for the pair,
  // independent of the window stream.
  Rng style_rng = Rng::stream(profile.rng_seed, static_cast<std::uint64_t>(label_code(label)) + 1);
  const double style_tempo = style_rng.uniform(1.0 - kStyleSpread, 1.0 + kStyleSpread);
  Channels style_gain{};
  for (double& g : style_gain) g = style_rng.uniform(1.0 - 2.0 * kStyleSpread, 1.0 + 2.0 * kStyleSpread);
  const double style_rx = style_rng.normal() * kStyleRad;
  const double style_ry = style_rng.normal() * kStyleRad;
  const double style_rz = style_rng.normal() * kStyleRad;

  Motion m;
  m.amp = profile.amplitude_scale * rng.uniform(0.85, 1.15);
  m.tempo = profile.tempo_scale * style_tempo * rng.uniform(0.9, 1.1);
  m.phase = rng.uniform(0.0, kTwoPi);
  m.onset_s = rng.uniform(-0.25, 0.25);

  std::array<Channels, kWindowLength> raw{};
  if (label == GestureLabel::Random) {
    random_motion(raw, m, rng);
    if (rng.uniform() < kConfuserRate) {
      // A brief, weaker fragment of a gesture inside everyday movement.
      const GestureLabel g = kAllGestures[1 + rng.below(kNumClasses - 1)];
      Motion f = m;
      f.amp *= rng.uniform(0.4, 0.8);
      f.phase = rng.uniform(0.0, kTwoPi);
      f.onset_s = -1.0;
      const double start = rng.uniform(0.0, 3.5);
      const double len = rng.uniform(1.0, 2.0);
      for (std::size_t i = 0; i < kWindowLength; ++i) {
        const double t = static_cast<double>(i) / kSampleRateHz;
        const double e = smoothstep((t - start) / 0.3) * (1.0 - smoothstep((t - start - len) / 0.3));
        if (e <= 0.0) continue;
        const Channels v = gesture_sample(g, t, f);
        for (std::size_t c = 0; c < kChannels; ++c) raw[i][c] = (1.0 - e) * raw[i][c] + e * v[c];
      }
    }
  } else {
    for (std::size_t i = 0; i < kWindowLength; ++i) {
      raw[i] = gesture_sample(label, static_cast<double>(i) / kSampleRateHz, m);
    }
  }

  // Device orientation: the subject's mounting tilt about z plus a small
  // per-window wobble about every axis.
  const Rotation rot = Rotation::from_angles(
      style_rx + rng.normal() * kWobbleRad, style_ry + rng.normal() * kWobbleRad,
      profile.tilt_rad + style_rz + rng.normal() * kWobbleRad);
  // Gains act on the motion around the window mean so gravity keeps its size.
  Channels mean{};
  for (const auto& v : raw)
    for (std::size_t c = 0; c < kChannels; ++c) mean[c] += v[c] / static_cast<double>(kWindowLength);
  ImuWindow w;
  for (std::size_t i = 0; i < kWindowLength; ++i) {
    Channels v = raw[i];
    for (std::size_t c = 0; c < kChannels; ++c) v[c] = mean[c] + style_gain[c] * (v[c] - mean[c]);
    rot.apply(v, 0);
    rot.apply(v, 3);
    for (std::size_t c = 0; c < kChannels; ++c) {
      const double sigma = c < 3 ? profile.noise_std : 0.5 * profile.noise_std;
      w.at(c, i) = v[c] + sigma * rng.normal();
    }
  }
  if (profile.hand == Hand::Left) {
    for (std::size_t c : {std::size_t{0}, std::size_t{3}})
      for (double& x : w.channel(c)) x = -x;
  }
  return w;
}

ImuWindow template_window(GestureLabel label, const SubjectProfile& profile, double phase) {
  if (label == GestureLabel::Random) {
    throw Error(ErrorKind::Validation, "NoTemplate", "Random windows have no fixed template");
  }
  const Motion m{profile.amplitude_scale, profile.tempo_scale, phase, 0.0};
  ImuWindow w;
  for (std::size_t i = 0; i < kWindowLength; ++i) {
    const Channels v = gesture_sample(label, static_cast<double>(i) / kSampleRateHz, m);
    for (std::size_t c = 0; c < kChannels; ++c) w.at(c, i) = v[c];
  }
  return w;
}

int table3_count(int subject_id, GestureLabel label) {
  if (subject_id < 1 || subject_id > 7) {
    throw Error(ErrorKind::Usage, "InvalidSubjects", "Table-3 counts exist for subjects 1..7 only");
  }
  return kTable3[subject_id - 1][label_code(label)];
}

Dataset gen_dataset(const GenOptions& options) {
  if (options.n_subjects < 1) {
    throw Error(ErrorKind::Usage, "InvalidSubjects", "need at least one subject");
  }
  if (options.table3 && options.n_subjects > 7) {
    throw Error(ErrorKind::Usage, "InvalidSubjects", "Table-3 mode supports at most 7 subjects");
  }
  if (!options.table3 && options.per_class < 1) {
    throw Error(ErrorKind::Usage, "InvalidCount", "per-class count must be >= 1");
  }
  Dataset data;
  data.meta.seed = options.master_seed;
  data.meta.schema_version = 1;
  data.meta.generator = std::string("morse-synth/") + std::string(Rng::kAlgorithm);
  for (int subject = 1; subject <= options.n_subjects; ++subject) {
    const SubjectProfile profile = make_profile(subject, options.master_seed, options.noise_std);
    Rng rng(profile.rng_seed);
    for (GestureLabel label : kAllGestures) {
      const int count = options.table3 ? table3_count(subject, label) : options.per_class;
      for (int k = 0; k < count; ++k) {
        data.samples.push_back({gen_window(label, profile, rng), label, subject, profile.hand});
      }
    }
  }
  return data;
}

}  // namespace morse::synth
