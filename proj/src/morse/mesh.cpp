#include "morse/mesh.hpp"

#include <cmath>
#include <sstream>

#include "morse/error.hpp"
#include "morse/rng.hpp"
#include "morse/text.hpp"

namespace morse::mesh {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

double link_uniform(const SimConfig& cfg, const GestureEvent& e, const std::string& receiver,
                    TimeMs now) {
  std::uint64_t h = mix_seed(cfg.seed, fnv1a(e.user_id));
  h = mix_seed(h, static_cast<std::uint64_t>(e.timestamp_ms));
  h = mix_seed(h, fnv1a(receiver));
  h = mix_seed(h, static_cast<std::uint64_t>(now));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

void activate(NodeState& node, GestureEvent event, TimeMs now, const SimConfig& cfg) {
  event.timestamp_ms = now;
  node.current_tx = ActiveTx{std::move(event), now + cfg.broadcast_ms};
  node.last_sent_gesture = node.current_tx->event.gesture;
  node.last_sent_ms = now;
  node.pending.reset();
}

std::string format_location(const std::optional<Location>& loc) {
  if (!loc) return "none";
  return text::format_double(loc->lat) + "," + text::format_double(loc->lon);
}

[[noreturn]] void script_error(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::Format, "ParseError", "line " + std::to_string(line) + ": " + what);
}

double script_number(const ScriptAction& a, std::size_t i) {
  double v = 0.0;
  if (i >= a.args.size() || !text::parse_double(a.args[i], v) || !std::isfinite(v)) {
    script_error(a.line, "expected a number for '" + a.action + "'");
  }
  return v;
}

}  // namespace

std::string_view to_string(GateReason r) {
  switch (r) {
    case GateReason::Ok: return "Ok";
    case GateReason::RandomGesture: return "RandomGesture";
    case GateReason::Busy: return "Busy";
    case GateReason::Duplicate: return "Duplicate";
  }
  return "Unknown";
}

GateDecision should_transmit(const NodeState& node, GestureLabel g, TimeMs now,
                             const SimConfig& cfg) {
  if (g == GestureLabel::Random) return {false, GateReason::RandomGesture};
  if (node.transmitting(now) || node.pending) return {false, GateReason::Busy};
  if (node.last_sent_gesture == g) {
    const bool expired = cfg.dedup_timeout_ms && now - node.last_sent_ms >= *cfg.dedup_timeout_ms;
    if (!expired) return {false, GateReason::Duplicate};
  }
  return {true, GateReason::Ok};
}

TxStart begin_transmit(NodeState& node, GestureLabel g, double confidence, TimeMs now,
                       const SimConfig& cfg) {
  const auto gate = should_transmit(node, g, now, cfg);
  if (!gate.transmit) {
    throw Error(ErrorKind::Validation, "GatingViolation",
                "transmission refused: " + std::string(to_string(gate.reason)));
  }
  GestureEvent event{node.user_id, g, std::nullopt, now, confidence};
  if (node.location_enabled) {
    if (!node.gps_available || !node.fix) {
      node.pending = event;
      return {event, true};
    }
    event.location = node.fix;
  }
  activate(node, event, now, cfg);
  return {node.current_tx->event, false};
}

std::vector<Reception> deliver(std::span<const GestureEvent> events,
                               const std::map<std::string, NodeState>& nodes,
                               const SimConfig& cfg, TimeMs now) {
  std::vector<Reception> out;
  for (const auto& e : events) {
    if (now < e.timestamp_ms + cfg.latency_ms || now > e.timestamp_ms + cfg.broadcast_ms) continue;
    auto sender = nodes.find(e.user_id);
    if (sender == nodes.end()) continue;
    for (const auto& [id, node] : nodes) {
      if (id == e.user_id) continue;
      if (node.seen.contains({e.user_id, e.timestamp_ms})) continue;
      const double d = std::hypot(node.x - sender->second.x, node.y - sender->second.y);
      if (d > cfg.radio_range_m) continue;
      const bool dropped = link_uniform(cfg, e, id, now) < cfg.drop_probability;
      out.push_back({id, e, now, dropped});
    }
  }
  return out;
}

void on_receive(NodeState& node, const GestureEvent& event, TimeMs now,
                const code::Timing& timing) {
  node.seen.insert({event.user_id, event.timestamp_ms});
  node.inbox.push_back({now, event});
  node.vibrations.push_back({now, event.gesture, event.user_id,
                             code::morse_to_timeline(code::gesture_to_morse(event.gesture), timing)});
}

std::vector<ScriptAction> parse_script(std::string_view text) {
  std::vector<ScriptAction> out;
  std::size_t line_no = 0;
  TimeMs last_t = 0;
  for (auto raw : text::split(text, '\n')) {
    ++line_no;
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> tok;
    for (auto part : text::split(line, ' ')) {
      if (!part.empty()) tok.emplace_back(part);
    }
    if (tok.size() < 3) script_error(line_no, "expected '<t_ms> <node_id> <action> [args]'");
    long long t = 0;
    if (!text::parse_int(tok[0], t) || t < 0) script_error(line_no, "bad time '" + tok[0] + "'");
    if (t < last_t) script_error(line_no, "script is not time-ordered");
    last_t = t;
    ScriptAction a{t, tok[1], tok[2], {tok.begin() + 3, tok.end()}, line_no};
    const auto& act = a.action;
    const std::size_t n = a.args.size();
    bool ok = false;
    if (act == "gesture") {
      ok = n == 1 || n == 2;
    } else if (act == "scan") {
      ok = n == 0;
    } else if (act == "gps") {
      ok = n == 1 && (a.args[0] == "on" || a.args[0] == "off");
    } else if (act == "locate") {
      ok = n == 2 || (n == 1 && a.args[0] == "lost");
    } else if (act == "move") {
      ok = n == 2;
    } else {
      script_error(line_no, "unknown action '" + act + "'");
    }
    if (!ok) script_error(line_no, "bad arguments for '" + act + "'");
    if (act == "gesture") {
      try {
        parse_gesture(a.args[0]);
      } catch (const Error& e) {
        script_error(line_no, e.what());
      }
      if (n == 2) {
        const double c = script_number(a, 1);
        if (c < 0.0 || c > 1.0) script_error(line_no, "confidence must be in [0,1]");
      }
    } else if (act == "move" || (act == "locate" && n == 2)) {
      script_number(a, 0);
      script_number(a, 1);
    }
    out.push_back(std::move(a));
  }
  return out;
}

Simulator::Simulator(SimConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.timing.validate();
  if (cfg_.drop_probability < 0.0 || cfg_.drop_probability > 1.0) {
    throw Error(ErrorKind::Usage, "InvalidConfig", "drop probability must be in [0,1]");
  }
  if (cfg_.latency_ms < 0 || cfg_.broadcast_ms <= 0 || cfg_.radio_range_m < 0.0) {
    throw Error(ErrorKind::Usage, "InvalidConfig", "latency, range and broadcast must be >= 0");
  }
}

NodeState& Simulator::node(const std::string& id) {
  auto [it, inserted] = nodes_.try_emplace(id);
  if (inserted) it->second.user_id = id;
  return it->second;
}

void Simulator::load(std::span<const ScriptAction> script) {
  for (const auto& a : script) node(a.node);
  for (const auto& a : script) push({a.t_ms, 0, Kind::Script, a, {}, 0});
}

void Simulator::push(Scheduled s) {
  s.seq = seq_++;
  queue_.push(std::move(s));
}

void Simulator::emit(TimeMs t, const std::string& node, const std::string& text) {
  log_.push_back(std::to_string(t) + " " + node + " " + text);
}

std::string Simulator::log_text() const {
  std::string out;
  for (const auto& l : log_) {
    out += l;
    out += '\n';
  }
  return out;
}

void Simulator::run() {
  while (!queue_.empty()) {
    Scheduled s = queue_.top();
    queue_.pop();
    now_ = s.t;
    switch (s.kind) {
      case Kind::Script:
        apply(s.action);
        break;
      case Kind::Delivery: {
        const NodeState& sender = nodes_.at(s.node);
        if (sender.current_tx && sender.current_tx->event.timestamp_ms == s.tx_start &&
            sender.transmitting(now_)) {
          const GestureEvent e = sender.current_tx->event;
          receive_all(deliver(std::span(&e, 1), nodes_, cfg_, now_));
        }
        break;
      }
      case Kind::TxExpired: {
        NodeState& sender = nodes_.at(s.node);
        if (sender.current_tx && sender.current_tx->event.timestamp_ms == s.tx_start) {
          emit(now_, s.node, "tx_expired " + std::string(to_string(sender.current_tx->event.gesture)));
          sender.current_tx.reset();
        }
        break;
      }
    }
  }
}

void Simulator::start_tx(NodeState& n, const GestureEvent& event) {
  const TimeMs start = event.timestamp_ms;
  emit(now_, n.user_id,
       "tx_start " + std::string(to_string(event.gesture)) + " loc=" +
           format_location(event.location) + " until=" +
           std::to_string(n.current_tx->expires_at_ms));
  if (cfg_.latency_ms <= cfg_.broadcast_ms) {
    push({start + cfg_.latency_ms, 0, Kind::Delivery, {}, n.user_id, start});
  }
  push({n.current_tx->expires_at_ms + 1, 0, Kind::TxExpired, {}, n.user_id, start});
}

void Simulator::receive_all(const std::vector<Reception>& rx) {
  for (const auto& r : rx) {
    const std::string label(to_string(r.event.gesture));
    const std::string origin =
        " from=" + r.event.user_id + " sent=" + std::to_string(r.event.timestamp_ms);
    if (r.dropped) {
      emit(r.at_ms, r.receiver, "rx_dropped " + label + origin);
      continue;
    }
    NodeState& n = nodes_.at(r.receiver);
    on_receive(n, r.event, r.at_ms, cfg_.timing);
    emit(r.at_ms, r.receiver,
         "rx " + label + origin + " loc=" + format_location(r.event.location) +
             " conf=" + text::format_fixed(r.event.confidence, 4));
    const auto& v = n.vibrations.back().timeline;
    emit(r.at_ms, r.receiver,
         "vibrate " + label + " code=\"" + code::gesture_to_morse(r.event.gesture).str() +
             "\" on_ms=" + std::to_string(code::on_ms(v)) +
             " total_ms=" + std::to_string(code::total_ms(v)));
  }
}

std::vector<Reception> Simulator::manual_scan(const std::string& node_id, TimeMs now) {
  std::vector<GestureEvent> active;
  for (const auto& [id, n] : nodes_) {
    if (id != node_id && n.transmitting(now)) active.push_back(n.current_tx->event);
  }
  std::vector<Reception> rx;
  for (auto& r : deliver(active, nodes_, cfg_, now)) {
    if (r.receiver == node_id) rx.push_back(std::move(r));
  }
  return rx;
}

void Simulator::apply(const ScriptAction& a) {
  NodeState& n = node(a.node);
  if (a.action == "gesture") {
    const GestureLabel g = parse_gesture(a.args[0]);
    const double conf = a.args.size() > 1 ? script_number(a, 1) : 1.0;
    n.last_recognized = g;
    n.last_confidence = conf;
    n.last_recognized_ms = now_;
    const std::string label(to_string(g));
    emit(now_, n.user_id, "recognize " + label + " conf=" + text::format_fixed(conf, 4));
    const auto gate = should_transmit(n, g, now_, cfg_);
    if (!gate.transmit) {
      emit(now_, n.user_id, "tx_blocked " + label + " reason=" + std::string(to_string(gate.reason)));
      return;
    }
    const TxStart tx = begin_transmit(n, g, conf, now_, cfg_);
    if (tx.pending) {
      emit(now_, n.user_id, "tx_pending " + label + " reason=NoGpsFix");
    } else {
      start_tx(n, tx.event);
    }
  } else if (a.action == "scan") {
    auto rx = manual_scan(a.node, now_);
    std::size_t found = 0;
    for (const auto& r : rx) found += r.dropped ? 0 : 1;
    emit(now_, n.user_id, "scan found=" + std::to_string(found));
    receive_all(rx);
  } else if (a.action == "gps") {
    n.location_enabled = a.args[0] == "on";
    emit(now_, n.user_id, "gps " + a.args[0]);
    if (!n.location_enabled && n.pending) {
      GestureEvent e = *n.pending;
      e.location.reset();
      activate(n, e, now_, cfg_);
      start_tx(n, n.current_tx->event);
    }
  } else if (a.action == "locate") {
    if (a.args[0] == "lost") {
      n.gps_available = false;
      n.fix.reset();
      emit(now_, n.user_id, "locate lost");
      return;
    }
    n.fix = Location{script_number(a, 0), script_number(a, 1)};
    n.gps_available = true;
    emit(now_, n.user_id, "locate " + format_location(n.fix));
    if (n.pending && n.location_enabled) {
      GestureEvent e = *n.pending;
      e.location = n.fix;
      activate(n, e, now_, cfg_);
      start_tx(n, n.current_tx->event);
    }
  } else if (a.action == "move") {
    n.x = script_number(a, 0);
    n.y = script_number(a, 1);
    emit(now_, n.user_id, "move " + text::format_double(n.x) + " " + text::format_double(n.y));
  }
}

std::string Simulator::watch_panel(const std::string& node_id) const {
  auto it = nodes_.find(node_id);
  if (it == nodes_.end()) {
    throw Error(ErrorKind::Validation, "UnknownNode", "no node '" + node_id + "' in scenario");
  }
  const NodeState& n = it->second;
  std::ostringstream os;
  os << "+-- received " << std::string(28, '-') << '\n';
  if (n.inbox.empty()) os << "| (no messages)\n";
  for (const auto& m : n.inbox) {
    os << "| t=" << m.received_ms << " user=" << m.event.user_id
       << " gesture=" << full_name(m.event.gesture)
       << " location=" << format_location(m.event.location) << '\n';
  }
  os << "+-- own " << std::string(33, '-') << '\n';
  os << "| id: " << n.user_id << '\n';
  os << "| mode: ";
  if (n.transmitting(now_)) {
    os << "transmitting " << to_string(n.current_tx->event.gesture) << " until t="
       << n.current_tx->expires_at_ms;
  } else if (n.pending) {
    os << "pending " << to_string(n.pending->gesture) << " (waiting for GPS fix)";
  } else {
    os << "recognizing";
  }
  os << '\n';
  if (n.last_recognized) {
    os << "| last: " << full_name(*n.last_recognized) << " at t=" << n.last_recognized_ms
       << " confidence=" << text::format_fixed(n.last_confidence, 4) << '\n';
  } else {
    os << "| last: -\n";
  }
  os << "+" << std::string(40, '-') << '\n';
  return os.str();
}

}  // namespace morse::mesh
