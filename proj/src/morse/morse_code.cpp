#include "morse/morse_code.hpp"

#include <algorithm>

#include "morse/error.hpp"

namespace morse::code {

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorKind::Validation, "MalformedTimeline", what);
}

}  // namespace

MorseCode::MorseCode(std::vector<Symbol> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.empty()) return;
  if (symbols_.front() == Symbol::LetterSpace || symbols_.back() == Symbol::LetterSpace) {
    throw Error(ErrorKind::Validation, "MalformedCode", "code starts or ends with a space");
  }
  for (std::size_t i = 1; i < symbols_.size(); ++i) {
    if (symbols_[i] == Symbol::LetterSpace && symbols_[i - 1] == Symbol::LetterSpace) {
      throw Error(ErrorKind::Validation, "MalformedCode", "adjacent letter spaces");
    }
  }
}

MorseCode MorseCode::parse(std::string_view text) {
  std::vector<Symbol> out;
  for (char c : text) {
    switch (c) {
      case '.': out.push_back(Symbol::Dot); break;
      case '-': out.push_back(Symbol::Dash); break;
      case ' ': out.push_back(Symbol::LetterSpace); break;
      default:
        throw Error(ErrorKind::Validation, "MalformedCode",
                    std::string("unexpected character '") + c + "' in code");
    }
  }
  return MorseCode(std::move(out));
}

std::string MorseCode::str() const {
  std::string s;
  for (Symbol sym : symbols_) s += sym == Symbol::Dot ? '.' : sym == Symbol::Dash ? '-' : ' ';
  return s;
}

std::size_t MorseCode::dots() const {
  return static_cast<std::size_t>(std::count(symbols_.begin(), symbols_.end(), Symbol::Dot));
}

std::size_t MorseCode::dashes() const {
  return static_cast<std::size_t>(std::count(symbols_.begin(), symbols_.end(), Symbol::Dash));
}

MorseCode gesture_to_morse(GestureLabel g) {
  switch (g) {
    case GestureLabel::RecommendedStop: return MorseCode::parse(".-. ...");
    case GestureLabel::EmergencyContained: return MorseCode::parse(". -.-.");
    case GestureLabel::RecommendedEvacuation: return MorseCode::parse(".-. .");
    case GestureLabel::Fire: return MorseCode::parse("..-.");
    case GestureLabel::Distress: return MorseCode::parse("-.. ...");
    case GestureLabel::Random: break;
  }
  throw Error(ErrorKind::Validation, "NoCodeForRandom", "the Random class has no Morse code");
}

void Timing::validate() const {
  if (dot_ms <= 0 || dash_ms <= 0 || letter_gap_ms <= 0 || intra_gap_ms <= 0) {
    throw Error(ErrorKind::Usage, "InvalidTiming", "all durations must be positive");
  }
  if (dot_ms == dash_ms || intra_gap_ms == letter_gap_ms) {
    throw Error(ErrorKind::Usage, "InvalidTiming",
                "dot/dash and intra/letter gap durations must differ");
  }
}

VibrationTimeline morse_to_timeline(const MorseCode& code, const Timing& timing) {
  timing.validate();
  if (code.empty()) throw Error(ErrorKind::Validation, "EmptyCode", "cannot render an empty code");
  VibrationTimeline out;
  bool gap_pending = false;
  for (Symbol s : code.symbols()) {
    if (s == Symbol::LetterSpace) {
      out.push_back({Vibration::Off, timing.letter_gap_ms});
      gap_pending = false;
      continue;
    }
    if (gap_pending) out.push_back({Vibration::Off, timing.intra_gap_ms});
    out.push_back({Vibration::On, s == Symbol::Dot ? timing.dot_ms : timing.dash_ms});
    gap_pending = true;
  }
  return out;
}

MorseCode timeline_to_morse(const VibrationTimeline& timeline, const Timing& timing) {
  timing.validate();
  if (timeline.empty()) malformed("empty timeline");
  if (timeline.front().state != Vibration::On || timeline.back().state != Vibration::On) {
    malformed("timeline must start and end with On");
  }
  std::vector<Symbol> out;
  for (std::size_t i = 0; i < timeline.size(); ++i) {
    const Segment& seg = timeline[i];
    if (i > 0 && timeline[i - 1].state == seg.state) malformed("adjacent segments share a state");
    if (seg.state == Vibration::On) {
      if (seg.duration_ms == timing.dot_ms) {
        out.push_back(Symbol::Dot);
      } else if (seg.duration_ms == timing.dash_ms) {
        out.push_back(Symbol::Dash);
      } else {
        malformed("unknown On duration " + std::to_string(seg.duration_ms) + " ms");
      }
    } else if (seg.duration_ms == timing.letter_gap_ms) {
      out.push_back(Symbol::LetterSpace);
    } else if (seg.duration_ms != timing.intra_gap_ms) {
      malformed("unknown Off duration " + std::to_string(seg.duration_ms) + " ms");
    }
  }
  return MorseCode(std::move(out));
}

int total_ms(const VibrationTimeline& t) {
  int sum = 0;
  for (const auto& s : t) sum += s.duration_ms;
  return sum;
}

int on_ms(const VibrationTimeline& t) {
  int sum = 0;
  for (const auto& s : t)
    if (s.state == Vibration::On) sum += s.duration_ms;
  return sum;
}

std::string format_timeline(const VibrationTimeline& t) {
  std::string out;
  for (const auto& s : t) {
    out += s.state == Vibration::On ? "ON " : "OFF ";
    out += std::to_string(s.duration_ms);
    out += '\n';
  }
  return out;
}

}  // namespace morse::code
