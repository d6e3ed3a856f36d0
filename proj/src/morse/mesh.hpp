#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "morse/core.hpp"
#include "morse/morse_code.hpp"

namespace morse::mesh {

using TimeMs = std::int64_t;

struct Location {
  double lat = 0.0;
  double lon = 0.0;
};

/// One broadcast gesture. `timestamp_ms` is the transmission start and,
/// together with the user id, identifies the message for deduplication.
struct GestureEvent {
  std::string user_id;
  GestureLabel gesture = GestureLabel::Fire;
  std::optional<Location> location;
  TimeMs timestamp_ms = 0;
  double confidence = 1.0;
};

struct ActiveTx {
  GestureEvent event;
  TimeMs expires_at_ms = 0;  // still on air at this instant
};

struct InboxEntry {
  TimeMs received_ms = 0;
  GestureEvent event;
};

struct QueuedVibration {
  TimeMs queued_ms = 0;
  GestureLabel gesture = GestureLabel::Fire;
  std::string from;
  code::VibrationTimeline timeline;
};

struct NodeState {
  std::string user_id;
  double x = 0.0;  // metres; simulation-only position for range checks
  double y = 0.0;
  bool location_enabled = false;
  bool gps_available = false;
  std::optional<Location> fix;
  std::optional<ActiveTx> current_tx;
  std::optional<GestureEvent> pending;  // waiting for a GPS fix
  std::optional<GestureLabel> last_sent_gesture;
  TimeMs last_sent_ms = 0;

  std::optional<GestureLabel> last_recognized;
  double last_confidence = 0.0;
  TimeMs last_recognized_ms = 0;

  std::vector<InboxEntry> inbox;
  std::vector<QueuedVibration> vibrations;
  std::set<std::pair<std::string, TimeMs>> seen;

  bool transmitting(TimeMs now) const { return current_tx && now <= current_tx->expires_at_ms; }
};

struct SimConfig {
  double radio_range_m = 30.0;
  double drop_probability = 0.0;
  TimeMs latency_ms = 50;
  TimeMs broadcast_ms = 10'000;
  std::uint64_t seed = 1;
  /// Unset: a gesture equal to the last one sent is never re-sent until a
  /// different gesture goes out.
  std::optional<TimeMs> dedup_timeout_ms;
  code::Timing timing;
};

enum class GateReason { Ok, RandomGesture, Busy, Duplicate };
std::string_view to_string(GateReason r);

struct GateDecision {
  bool transmit = false;
  GateReason reason = GateReason::Ok;
};

/// Transmission rules: not Random, nothing on air (a transmission waiting
/// for a GPS fix counts as on air), and different from the last gesture sent.
GateDecision should_transmit(const NodeState& node, GestureLabel g, TimeMs now,
                             const SimConfig& cfg = {});

struct TxStart {
  GestureEvent event;
  bool pending = false;  // location enabled but no fix yet
};

/// Throws Validation/GatingViolation when should_transmit refuses.
TxStart begin_transmit(NodeState& node, GestureLabel g, double confidence, TimeMs now,
                       const SimConfig& cfg = {});

struct Reception {
  std::string receiver;
  GestureEvent event;
  TimeMs at_ms = 0;
  bool dropped = false;
};

/// Receptions of `events` by every other node in range at `now`. Events
/// outside their receivable interval and already-seen messages are skipped;
/// drops are decided by a hash of (seed, sender, start, receiver, now).
std::vector<Reception> deliver(std::span<const GestureEvent> events,
                               const std::map<std::string, NodeState>& nodes,
                               const SimConfig& cfg, TimeMs now);

/// Records the message and queues its vibration timeline.
void on_receive(NodeState& node, const GestureEvent& event, TimeMs now,
                const code::Timing& timing = {});

/// `<t_ms> <node_id> <action> [args]`, actions: gesture <label> [confidence],
/// scan, gps <on|off>, locate <lat> <lon> | locate lost, move <x> <y>.
struct ScriptAction {
  TimeMs t_ms = 0;
  std::string node;
  std::string action;
  std::vector<std::string> args;
  std::size_t line = 0;
};

/// Throws Format/ParseError with the line number.
std::vector<ScriptAction> parse_script(std::string_view text);

/// Single-threaded discrete-event simulation on a millisecond virtual clock.
class Simulator {
 public:
  explicit Simulator(SimConfig cfg = {});

  /// Creates every node named in the script, then schedules its actions.
  void load(std::span<const ScriptAction> script);
  void run();

  std::vector<Reception> manual_scan(const std::string& node_id, TimeMs now);

  const std::map<std::string, NodeState>& nodes() const { return nodes_; }
  NodeState& node(const std::string& id);
  const std::vector<std::string>& log() const { return log_; }
  std::string log_text() const;
  TimeMs now() const { return now_; }

  /// Text rendering of the watch Messages screen: received messages on top,
  /// own id / mode / last recognized gesture below.
  std::string watch_panel(const std::string& node_id) const;

 private:
  enum class Kind { Script, Delivery, TxExpired };
  struct Scheduled {
    TimeMs t;
    std::uint64_t seq;
    Kind kind;
    ScriptAction action;     // Kind::Script
    std::string node;        // sender for Delivery / TxExpired
    TimeMs tx_start = 0;
    bool operator>(const Scheduled& o) const { return t != o.t ? t > o.t : seq > o.seq; }
  };

  void push(Scheduled s);
  void emit(TimeMs t, const std::string& node, const std::string& text);
  void apply(const ScriptAction& a);
  void start_tx(NodeState& n, const GestureEvent& event);
  void receive_all(const std::vector<Reception>& rx);

  SimConfig cfg_;
  std::map<std::string, NodeState> nodes_;
  std::priority_queue<Scheduled, std::vector<Scheduled>, std::greater<>> queue_;
  std::uint64_t seq_ = 0;
  TimeMs now_ = 0;
  std::vector<std::string> log_;
};

}  // namespace morse::mesh
