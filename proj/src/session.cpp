#include "ssvep/session.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <deque>
#include <json.hpp>
#include <memory>

#include "ssvep/errors.hpp"

namespace ssvep {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string envelope(std::string_view type, double t_s, ordered_json payload) {
  ordered_json j;
  j["v"] = kProtocolVersion;
  j["type"] = type;
  j["t_s"] = t_s;
  j["payload"] = std::move(payload);
  return j.dump();
}

ordered_json target_json(std::optional<ClassId> target) {
  return target ? ordered_json(*target) : ordered_json();
}

}  // namespace

namespace wire {

ClientMessage decode_client(const std::string& text, const StimulusSet& stimuli) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception&) {
    throw ProtocolError("message is not valid JSON");
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw ProtocolError("message needs a string \"type\"");
  if (!j.contains("v") || j["v"] != kProtocolVersion)
    throw ProtocolError(fmt::format("unsupported protocol version (server speaks {})", kProtocolVersion));
  if (!j.contains("t_s") || !j["t_s"].is_number()) throw ProtocolError("message needs a numeric \"t_s\"");
  const auto type = j["type"].get<std::string>();
  const json payload = j.value("payload", json::object());
  if (type == "start") return Start{};
  if (type == "abort") return AbortRun{};
  if (type == "attend") {
    if (!payload.contains("target")) throw ProtocolError("attend needs payload.target");
    const auto& t = payload["target"];
    if (t.is_null()) return Attend{std::nullopt};
    if (!t.is_number_integer() || !stimuli.contains(t.get<int>()))
      throw ProtocolError("attend target " + t.dump() + " is not a configured stimulus");
    return Attend{t.get<int>()};
  }
  throw ProtocolError("unknown message type '" + type + "'");
}

std::string encode_attend(double t_s, std::optional<ClassId> target) {
  return envelope("attend", t_s, {{"target", target_json(target)}});
}
std::string encode_start(double t_s) { return envelope("start", t_s, ordered_json::object()); }
std::string encode_abort(double t_s) { return envelope("abort", t_s, ordered_json::object()); }

std::string hello(double t_s, const ExperimentConfig& cfg) {
  ordered_json stim = ordered_json::array();
  for (const auto& s : cfg.stimuli.entries())
    stim.push_back({{"id", s.id}, {"frequency_hz", s.frequency_hz}, {"role", to_string(s.role)}});
  const auto& c = cfg.course;
  return envelope(
      "hello", t_s,
      {{"protocol", kProtocolVersion},
       {"stimuli", stim},
       {"course",
        {{"start", {c.start.x, c.start.y, c.start.heading}},
         {"poles", {{c.poles[0].x(), c.poles[0].y()}, {c.poles[1].x(), c.poles[1].y()}}},
         {"waypoints",
          {{c.waypoints[0].x(), c.waypoints[0].y()}, {c.waypoints[1].x(), c.waypoints[1].y()}}},
         {"reach_radius", c.reach_radius},
         {"bounds", {c.bounds.xmin, c.bounds.ymin, c.bounds.xmax, c.bounds.ymax}}}},
       {"chunk_period_ms", cfg.live.chunk_period_ms},
       {"max_duration_s", cfg.task.max_duration}});
}

std::string phase_change(double t_s, Phase phase, bool control_active) {
  return envelope("phase_change", t_s, {{"phase", to_string(phase)}, {"control_active", control_active}});
}

std::string pose_update(double t_s, const Pose& pose, int progress) {
  return envelope("pose_update", t_s,
                  {{"x", pose.x}, {"y", pose.y}, {"heading_rad", pose.heading}, {"waypoint_progress", progress}});
}

std::string decision(double t_s, const Decision& d, const StimulusSet& stimuli, bool control_active) {
  return envelope("decision", t_s,
                  {{"class_id", d.cls},
                   {"kind", to_string(d.kind)},
                   {"role", to_string(stimuli[d.cls].role)},
                   {"frequency_hz", stimuli[d.cls].frequency_hz},
                   {"control_active", control_active}});
}

std::string cue(double t_s, const std::string& text) { return envelope("cue", t_s, {{"text", text}}); }

std::string feature_snapshot(double t_s, const Eigen::VectorXd& normalized, const DetectorGate& gate) {
  ordered_json sums = ordered_json::array();
  ordered_json active = ordered_json::array();
  for (Eigen::Index i = 0; i < normalized.size(); ++i) {
    sums.push_back(normalized[i]);
    active.push_back(gate.is_active(static_cast<ClassId>(i)));
  }
  return envelope("feature_snapshot", t_s, {{"normalized_sums", sums}, {"active", active}});
}

std::string report(double t_s, const std::string& report_json) {
  return envelope("report", t_s, {{"report", ordered_json::parse(report_json)}});
}

std::string rejected(double t_s, const std::string& reason) {
  return envelope("rejected", t_s, {{"reason", reason}});
}

}  // namespace wire

LiveSession::LiveSession(ExperimentConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), seed_(seed) {
  cfg_.validate();
}

std::vector<std::string> LiveSession::greet() const { return {wire::hello(0.0, cfg_)}; }

std::vector<std::string> LiveSession::receive(const std::string& text) {
  const double now = loop_ ? loop_->clock() : 0.0;
  wire::ClientMessage msg;
  try {
    msg = wire::decode_client(text, cfg_.stimuli);
  } catch (const ProtocolError& e) {
    return {wire::rejected(now, e.what())};
  }
  if (const auto* a = std::get_if<wire::Attend>(&msg)) {
    attention_ = a->target;
    return {};
  }
  if (std::holds_alternative<wire::Start>(msg)) {
    if (loop_) return {wire::rejected(now, "run already started")};
    return start();
  }
  if (!loop_ || finished_) return {wire::rejected(now, "no run in progress")};
  loop_->abort("aborted by client");
  return finish();
}

std::vector<std::string> LiveSession::start() {
  const CalibrationModel calib =
      calibrate_subject(cfg_.profile, cfg_.stimuli, cfg_.pipeline, derive_seed(seed_, 1));
  loop_.emplace(cfg_, cfg_.profile, calib, derive_seed(seed_, 2));
  const auto& s = loop_->state();
  return {wire::phase_change(0.0, s.phase, s.control_active), wire::cue(0.0, "rest"),
          wire::pose_update(0.0, s.pose, s.waypoint_progress)};
}

std::vector<std::string> LiveSession::tick() {
  if (!loop_ || finished_) return {};
  const ChunkResult r = loop_->step(attention_);
  ++chunk_;
  std::vector<std::string> out;
  const auto& s = loop_->state();
  for (const auto& e : r.events) {
    switch (e.type) {
      case EventType::Decision:
        out.push_back(wire::decision(e.t, *e.decision, cfg_.stimuli, e.control_before));
        break;
      case EventType::PhaseChange:
      case EventType::GateChange:
        out.push_back(wire::phase_change(e.t, e.phase, e.control_after));
        out.push_back(wire::cue(e.t, e.note));
        break;
      case EventType::Waypoint:
      case EventType::Abort:
        out.push_back(wire::cue(e.t, e.note));
        break;
    }
  }
  if (r.pose_changed) out.push_back(wire::pose_update(s.clock, s.pose, s.waypoint_progress));
  if (!r.features.empty())
    out.push_back(wire::feature_snapshot(r.features.back().timestamp,
                                         loop_->classifier().last_normalized(), s.gate(cfg_.stimuli)));
  if (loop_->finished()) {
    auto tail = finish();
    out.insert(out.end(), tail.begin(), tail.end());
  }
  return out;
}

std::vector<std::string> LiveSession::disconnect(const std::string& reason) {
  if (!loop_ || finished_) return {};
  loop_->abort(reason);
  return finish();
}

std::vector<std::string> LiveSession::finish() {
  finished_ = true;
  RunOutcome o = score_run(cfg_, *loop_, seed_);
  o.report.trajectory_file = "trajectory.csv";
  if (!cfg_.out_dir.empty()) persist_run(cfg_, o, std::filesystem::path(cfg_.out_dir) / fmt::format("seed_{}", seed_));
  std::vector<std::string> out;
  for (const auto& e : o.state.log)
    if (e.type == EventType::Abort) out.push_back(wire::cue(e.t, e.note));
  out.push_back(wire::report(o.state.clock, report_to_json(cfg_, o)));
  outcome_ = std::move(o);
  return out;
}

namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using Clock = std::chrono::steady_clock;

// Single-threaded: reads, writes and simulation ticks all run on one
// io_context, so the session needs no locking.
class Connection {
 public:
  Connection(net::io_context& ioc, tcp::socket socket, LiveSession& session,
             std::chrono::nanoseconds period, SessionResult& result)
      : ws_(std::move(socket)), timer_(ioc), session_(session), period_(period), result_(result) {}

  void run() {
    ws_.text(true);
    ws_.accept();
    send(session_.greet());
    read();
    next_ = Clock::now() + period_;
    schedule();
  }

 private:
  void read() {
    ws_.async_read(buffer_, [this](beast::error_code ec, std::size_t) {
      if (ec) {
        closed_ = true;
        if (!session_.finished()) send(session_.disconnect("client disconnected"));
        timer_.cancel();
        return;
      }
      const std::string text = beast::buffers_to_string(buffer_.data());
      buffer_.consume(buffer_.size());
      send(session_.receive(text));
      if (session_.finished()) close();
      else read();
    });
  }

  void schedule() {
    timer_.expires_at(next_);
    timer_.async_wait([this](beast::error_code ec) {
      if (ec || closed_ || session_.finished()) return;
      const auto now = Clock::now();
      if (session_.started()) {
        if (last_) result_.chunk_intervals_ms.push_back(
            std::chrono::duration<double, std::milli>(now - *last_).count());
        last_ = now;
      }
      send(session_.tick());
      if (session_.finished()) {
        close();
        return;
      }
      next_ += period_;
      schedule();
    });
  }

  void send(const std::vector<std::string>& messages) {
    if (closed_) return;
    for (const auto& m : messages) queue_.push_back(m);
    if (!writing_) write();
  }

  void write() {
    if (queue_.empty() || closed_) {
      writing_ = false;
      if (closing_ && !closed_) do_close();
      return;
    }
    writing_ = true;
    ws_.async_write(net::buffer(queue_.front()), [this](beast::error_code ec, std::size_t) {
      queue_.pop_front();
      if (ec) {
        closed_ = true;
        return;
      }
      write();
    });
  }

  void close() {
    closing_ = true;
    if (!writing_) do_close();
  }

  void do_close() {
    if (closed_) return;
    closed_ = true;
    timer_.cancel();
    beast::error_code ec;
    ws_.close(websocket::close_code::normal, ec);
  }

  websocket::stream<tcp::socket> ws_;
  net::steady_timer timer_;
  LiveSession& session_;
  std::chrono::nanoseconds period_;
  SessionResult& result_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  bool writing_ = false;
  bool closing_ = false;
  bool closed_ = false;
  Clock::time_point next_;
  std::optional<Clock::time_point> last_;
};

}  // namespace

SessionResult serve_session(const ExperimentConfig& cfg, std::uint64_t seed,
                            const std::function<void(unsigned short)>& on_listening) {
  if (cfg.mode != Mode::Live) throw ConfigError("invalid experiment config:\n  mode: serve needs live mode");
  LiveSession session(cfg, seed);
  SessionResult result;

  net::io_context ioc;
  tcp::acceptor acceptor(ioc, tcp::endpoint(net::ip::make_address("127.0.0.1"),
                                            static_cast<unsigned short>(cfg.live.port)));
  if (on_listening) on_listening(acceptor.local_endpoint().port());
  tcp::socket socket(ioc);
  acceptor.accept(socket);
  acceptor.close();

  const auto period = std::chrono::duration_cast<std::chrono::nanoseconds>(
      std::chrono::duration<double, std::milli>(cfg.live.chunk_period_ms));
  Connection conn(ioc, std::move(socket), session, period, result);
  conn.run();
  ioc.run();

  if (!session.finished()) session.disconnect("connection closed");
  result.outcome = session.outcome();
  return result;
}

}  // namespace ssvep
