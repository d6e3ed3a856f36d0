#include <set>

#include "helpers.hpp"
#include "morse/morse_code.hpp"

using namespace morse;
using namespace morse::code;

namespace {

const std::vector<GestureLabel> kGoi{GestureLabel::RecommendedStop, GestureLabel::RecommendedEvacuation,
                                     GestureLabel::EmergencyContained, GestureLabel::Fire,
                                     GestureLabel::Distress};

VibrationTimeline tl(std::initializer_list<std::pair<Vibration, int>> segs) {
  VibrationTimeline t;
  for (auto [s, d] : segs) t.push_back({s, d});
  return t;
}

}  // namespace

TEST(MorseCode, GestureCodes) {
  EXPECT_EQ(gesture_to_morse(GestureLabel::RecommendedStop).str(), ".-. ...");
  EXPECT_EQ(gesture_to_morse(GestureLabel::RecommendedEvacuation).str(), ".-. .");
  EXPECT_EQ(gesture_to_morse(GestureLabel::EmergencyContained).str(), ". -.-.");
  EXPECT_EQ(gesture_to_morse(GestureLabel::Fire).str(), "..-.");
  EXPECT_EQ(gesture_to_morse(GestureLabel::Distress).str(), "-.. ...");
  const std::vector<Symbol> fire{Symbol::Dot, Symbol::Dot, Symbol::Dash, Symbol::Dot};
  EXPECT_EQ(gesture_to_morse(GestureLabel::Fire).symbols(), fire);
  const std::vector<Symbol> rs{Symbol::Dot, Symbol::Dash, Symbol::Dot, Symbol::LetterSpace,
                               Symbol::Dot, Symbol::Dot,  Symbol::Dot};
  EXPECT_EQ(gesture_to_morse(GestureLabel::RecommendedStop).symbols(), rs);
  EXPECT_MORSE_ERROR(gesture_to_morse(GestureLabel::Random), "NoCodeForRandom");
}

TEST(MorseCode, ParseRejectsMalformed) {
  EXPECT_MORSE_ERROR(MorseCode::parse(" ."), "MalformedCode");
  EXPECT_MORSE_ERROR(MorseCode::parse(". "), "MalformedCode");
  EXPECT_MORSE_ERROR(MorseCode::parse(".  ."), "MalformedCode");
  EXPECT_MORSE_ERROR(MorseCode::parse(".x"), "MalformedCode");
}

TEST(Timeline, Examples) {
  using enum Vibration;
  EXPECT_EQ(morse_to_timeline(MorseCode::parse(".")), tl({{On, 200}}));
  const auto fire = morse_to_timeline(gesture_to_morse(GestureLabel::Fire));
  EXPECT_EQ(fire, tl({{On, 200}, {Off, 200}, {On, 200}, {Off, 200}, {On, 400}, {Off, 200}, {On, 200}}));
  EXPECT_EQ(on_ms(fire), 1000);
  EXPECT_EQ(total_ms(fire), 1600);
  EXPECT_EQ(morse_to_timeline(MorseCode::parse(". .")), tl({{On, 200}, {Off, 400}, {On, 200}}));
  EXPECT_EQ(format_timeline(morse_to_timeline(MorseCode::parse(".-"))), "ON 200\nOFF 200\nON 400\n");
}

TEST(Timeline, OnDurationAndRoundTrip) {
  std::set<std::string> codes;
  std::set<std::string> timelines;
  for (auto g : kGoi) {
    const auto code = gesture_to_morse(g);
    const auto t = morse_to_timeline(code);
    EXPECT_EQ(on_ms(t), static_cast<int>(200 * code.dots() + 400 * code.dashes()));
    EXPECT_EQ(timeline_to_morse(t), code);
    codes.insert(code.str());
    timelines.insert(format_timeline(t));
  }
  EXPECT_EQ(codes.size(), 5u);
  EXPECT_EQ(timelines.size(), 5u);
}

TEST(Timeline, CustomIntraGap) {
  Timing t;
  t.intra_gap_ms = 100;
  const auto code = gesture_to_morse(GestureLabel::Distress);
  const auto v = morse_to_timeline(code, t);
  EXPECT_EQ(timeline_to_morse(v, t), code);
  // -.. ... : 4 intra gaps of 100 and one letter gap of 400.
  EXPECT_EQ(total_ms(v), 400 + 200 * 5 + 4 * 100 + 400);
  t.intra_gap_ms = 400;
  EXPECT_MORSE_ERROR(t.validate(), "InvalidTiming");
}

TEST(Timeline, DecodeErrors) {
  using enum Vibration;
  EXPECT_MORSE_ERROR(timeline_to_morse({}), "MalformedTimeline");
  EXPECT_MORSE_ERROR(timeline_to_morse(tl({{On, 300}})), "MalformedTimeline");
  EXPECT_MORSE_ERROR(timeline_to_morse(tl({{Off, 200}, {On, 200}})), "MalformedTimeline");
  EXPECT_MORSE_ERROR(timeline_to_morse(tl({{On, 200}, {On, 200}})), "MalformedTimeline");
  EXPECT_MORSE_ERROR(timeline_to_morse(tl({{On, 200}, {Off, 300}, {On, 200}})), "MalformedTimeline");
  EXPECT_MORSE_ERROR(timeline_to_morse(tl({{On, 200}, {Off, 200}})), "MalformedTimeline");
}
