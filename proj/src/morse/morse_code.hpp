#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "morse/core.hpp"

namespace morse::code {

enum class Symbol : std::uint8_t { Dot, Dash, LetterSpace };

/// Dots, dashes and single letter spaces; never starts or ends with a space
/// and never has two spaces in a row.
class MorseCode {
 public:
  MorseCode() = default;
  /// Throws Validation/MalformedCode when the invariants are violated.
  explicit MorseCode(std::vector<Symbol> symbols);

  /// Text form, e.g. ".-. ..." ('.' dot, '-' dash, ' ' letter space).
  static MorseCode parse(std::string_view text);
  std::string str() const;

  const std::vector<Symbol>& symbols() const { return symbols_; }
  bool empty() const { return symbols_.empty(); }
  std::size_t dots() const;
  std::size_t dashes() const;

  friend bool operator==(const MorseCode&, const MorseCode&) = default;

 private:
  std::vector<Symbol> symbols_;
};

/// Vibration code of each gesture. Throws Validation/NoCodeForRandom for
/// Random, which is never transmitted.
MorseCode gesture_to_morse(GestureLabel g);

enum class Vibration : std::uint8_t { On, Off };

struct Segment {
  Vibration state;
  int duration_ms;
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct Timing {
  int dot_ms = 200;
  int dash_ms = 400;
  int letter_gap_ms = 400;
  int intra_gap_ms = 200;  // between symbols of one letter

  /// Durations must be positive, dot != dash and intra gap != letter gap,
  /// otherwise timelines cannot be decoded.
  void validate() const;
};

/// Alternating On/Off segments, starting and ending with On.
using VibrationTimeline = std::vector<Segment>;

VibrationTimeline morse_to_timeline(const MorseCode& code, const Timing& timing = {});
/// Inverse of morse_to_timeline. Throws Validation/MalformedTimeline.
MorseCode timeline_to_morse(const VibrationTimeline& timeline, const Timing& timing = {});

int total_ms(const VibrationTimeline& t);
int on_ms(const VibrationTimeline& t);

/// "ON 200\nOFF 200\n..." one segment per line.
std::string format_timeline(const VibrationTimeline& t);

}  // namespace morse::code
