#include "ssvep/task.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ssvep/errors.hpp"

namespace ssvep {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require(bool ok, std::vector<std::string>& errors, std::string msg) {
  if (!ok) errors.push_back(std::move(msg));
}

void throw_if_any(const std::vector<std::string>& errors, std::string_view what) {
  if (errors.empty()) return;
  std::string msg = fmt::format("invalid {}:", what);
  for (const auto& e : errors) msg += "\n  " + e;
  throw ConfigError(msg);
}

Point axis_of(const Course& c) { return (c.waypoints[1] - c.waypoints[0]).normalized(); }

void log_event(TaskState& s, TaskEvent e) { s.log.push_back(std::move(e)); }

TaskEvent make_event(const TaskState& before, EventType type, double t) {
  TaskEvent e;
  e.t = t;
  e.type = type;
  e.control_before = before.control_active;
  e.progress_before = before.waypoint_progress;
  e.pose_before = before.pose;
  return e;
}

void finish_event(TaskEvent& e, const TaskState& after) {
  e.phase = after.phase;
  e.control_after = after.control_active;
  e.pose_after = after.pose;
}

void enter_phase(TaskState& s, Phase next, double t, std::string note) {
  TaskEvent e = make_event(s, EventType::PhaseChange, t);
  s.phase = next;
  s.control_active = next == Phase::Control;
  if (next == Phase::Control) s.control_entered = t;
  if (next == Phase::PostRest) {
    s.completed_at = t;
    s.post_rest_started = t;
  }
  e.note = std::move(note);
  finish_event(e, s);
  log_event(s, std::move(e));
}

void update_progress(TaskState& s, const Course& course, double t) {
  while (s.waypoint_progress < 2 &&
         (s.pose.position() - course.waypoints[static_cast<std::size_t>(s.waypoint_progress)]).norm() <=
             course.reach_radius) {
    TaskEvent e = make_event(s, EventType::Waypoint, t);
    ++s.waypoint_progress;
    e.note = fmt::format("waypoint {} reached", s.waypoint_progress);
    finish_event(e, s);
    log_event(s, std::move(e));
  }
}

void sample(TaskState& s, double t) { s.trajectory.push_back({t, s.pose, s.phase}); }

}  // namespace

double normalize_heading(double rad) {
  double h = std::fmod(rad, kTwoPi);
  if (h < 0.0) h += kTwoPi;
  if (h >= kTwoPi) h = 0.0;
  return h;
}

double wrap_angle(double rad) {
  double a = std::fmod(rad + std::numbers::pi, kTwoPi);
  if (a <= 0.0) a += kTwoPi;
  return a - std::numbers::pi;
}

void Course::validate() const {
  std::vector<std::string> errors;
  const auto finite = [](const Point& p) { return p.allFinite(); };
  require(std::isfinite(start.x) && std::isfinite(start.y) && std::isfinite(start.heading), errors,
          "course.start: must be finite");
  require(finite(poles[0]) && finite(poles[1]), errors, "course.poles: must be finite");
  require(finite(waypoints[0]) && finite(waypoints[1]), errors, "course.waypoints: must be finite");
  require(poles[0] != poles[1], errors, "course.poles: must be distinct");
  require(waypoints[0] != waypoints[1], errors, "course.waypoints: must be distinct");
  require(reach_radius > 0.0, errors, "course.reach_radius: must be positive");
  require(slalom_offset >= 0.0, errors, "course.slalom_offset: must be non-negative");
  require(bounds.xmin < bounds.xmax && bounds.ymin < bounds.ymax, errors,
          "course.bounds: must be a non-empty rectangle");
  throw_if_any(errors, "course");
}

std::array<Point, 3> Course::reference_path() const {
  const Point u = axis_of(*this);
  const Point right(u.y(), -u.x());
  return {poles[0] + slalom_offset * right, poles[1] - slalom_offset * right, waypoints[1]};
}

Course parse_course(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto point = [](const nlohmann::json& p) {
      if (!p.is_array() || p.size() != 2) throw ParseError("point must be [x, y]");
      return Point(p.at(0).get<double>(), p.at(1).get<double>());
    };
    Course c;
    const auto& st = j.at("start");
    c.start = {st.at("x").get<double>(), st.at("y").get<double>(),
               normalize_heading(st.at("heading_rad").get<double>())};
    const auto& poles = j.at("poles");
    const auto& wps = j.at("waypoints");
    if (poles.size() != 2) throw ParseError("course needs exactly 2 poles");
    if (wps.size() != 2) throw ParseError("course needs exactly 2 waypoints");
    c.poles = {point(poles[0]), point(poles[1])};
    c.waypoints = {point(wps[0]), point(wps[1])};
    c.reach_radius = j.at("reach_radius").get<double>();
    const auto& b = j.at("bounds");
    c.bounds = {b.at("xmin").get<double>(), b.at("ymin").get<double>(), b.at("xmax").get<double>(),
                b.at("ymax").get<double>()};
    c.slalom_offset = j.value("slalom_offset", c.slalom_offset);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("course: ") + e.what());
  }
}

Course load_course(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open course file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_course(ss.str());
}

std::string course_to_json(const Course& c) {
  nlohmann::ordered_json j;
  j["start"] = {{"x", c.start.x}, {"y", c.start.y}, {"heading_rad", c.start.heading}};
  j["poles"] = {{c.poles[0].x(), c.poles[0].y()}, {c.poles[1].x(), c.poles[1].y()}};
  j["waypoints"] = {{c.waypoints[0].x(), c.waypoints[0].y()}, {c.waypoints[1].x(), c.waypoints[1].y()}};
  j["reach_radius"] = c.reach_radius;
  j["bounds"] = {{"xmin", c.bounds.xmin}, {"ymin", c.bounds.ymin}, {"xmax", c.bounds.xmax},
                 {"ymax", c.bounds.ymax}};
  j["slalom_offset"] = c.slalom_offset;
  return j.dump(2);
}

void TaskConfig::validate() const {
  std::vector<std::string> errors;
  require(pre_rest > 0.0, errors, "task.pre_rest: must be positive");
  require(post_rest > 0.0, errors, "task.post_rest: must be positive");
  require(max_duration > pre_rest + post_rest, errors,
          "task.max_duration: must exceed pre_rest + post_rest");
  require(step_distance > 0.0, errors, "task.step_distance: must be positive");
  require(turn_angle > 0.0 && turn_angle < std::numbers::pi, errors,
          "task.turn_angle: must lie in (0, pi)");
  throw_if_any(errors, "task config");
}

std::string_view to_string(Command c) {
  switch (c) {
    case Command::Left: return "LEFT";
    case Command::Forward: return "FORWARD";
    case Command::Right: return "RIGHT";
  }
  return "?";
}

Command command_for(Role role) {
  switch (role) {
    case Role::NavLeft: return Command::Left;
    case Role::NavForward: return Command::Forward;
    case Role::NavRight: return Command::Right;
    case Role::Toggle: break;
  }
  throw InvalidArgument("the toggle stimulus carries no navigation command");
}

Role role_for(Command c) {
  switch (c) {
    case Command::Left: return Role::NavLeft;
    case Command::Forward: return Role::NavForward;
    case Command::Right: return Role::NavRight;
  }
  return Role::NavForward;
}

Pose apply_command(const Pose& pose, Command cmd, const TaskConfig& cfg, const Bounds& bounds) {
  Pose p = pose;
  switch (cmd) {
    case Command::Left: p.heading = normalize_heading(p.heading + cfg.turn_angle); break;
    case Command::Right: p.heading = normalize_heading(p.heading - cfg.turn_angle); break;
    case Command::Forward:
      p.x = std::clamp(p.x + cfg.step_distance * std::cos(p.heading), bounds.xmin, bounds.xmax);
      p.y = std::clamp(p.y + cfg.step_distance * std::sin(p.heading), bounds.ymin, bounds.ymax);
      break;
  }
  return p;
}

Point oracle_target(const Pose& pose, const Course& course, int progress) {
  if (progress <= 0) return course.waypoints[0];
  const auto path = course.reference_path();
  const Point u = axis_of(course);
  const Point here = pose.position();
  std::size_t leg = 0;
  for (const auto& pole : course.poles)
    if ((here - course.waypoints[0]).dot(u) >= (pole - course.waypoints[0]).dot(u)) ++leg;
  while (leg < 2 && (here - path[leg]).norm() <= course.reach_radius) ++leg;
  return path[leg];
}

Command oracle_command(const Pose& pose, const Course& course, int progress, const TaskConfig& cfg) {
  const Point d = oracle_target(pose, course, progress) - pose.position();
  const double error = wrap_angle(std::atan2(d.y(), d.x()) - pose.heading);
  if (error > cfg.turn_angle / 2.0) return Command::Left;
  if (error < -cfg.turn_angle / 2.0) return Command::Right;
  return Command::Forward;
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::PreRest: return "PRE_REST";
    case Phase::Control: return "CONTROL";
    case Phase::PostRest: return "POST_REST";
    case Phase::Done: return "DONE";
    case Phase::Timeout: return "TIMEOUT";
  }
  return "?";
}

std::string_view to_string(EventType e) {
  switch (e) {
    case EventType::PhaseChange: return "phase_change";
    case EventType::Decision: return "decision";
    case EventType::GateChange: return "gate_change";
    case EventType::Waypoint: return "waypoint";
    case EventType::Abort: return "abort";
  }
  return "?";
}

TaskState initial_state(const Course& course) {
  TaskState s;
  s.pose = course.start;
  s.pose.heading = normalize_heading(s.pose.heading);
  sample(s, 0.0);
  return s;
}

TaskState task_step(TaskState s, const TaskInput& input, const Course& course,
                    const TaskConfig& cfg, const StimulusSet& stimuli) {
  if (s.finished()) throw InvalidArgument("task_step on a finished run");

  if (const auto* tick = std::get_if<Tick>(&input)) {
    const double before = s.clock;
    s.clock += tick->dt;
    if (s.phase == Phase::PostRest && s.clock - *s.post_rest_started + 1e-9 >= cfg.post_rest)
      enter_phase(s, Phase::Done, s.clock, "run ended");
    else if ((s.phase == Phase::PreRest || s.phase == Phase::Control) &&
             s.clock + 1e-9 >= cfg.max_duration)
      enter_phase(s, Phase::Timeout, s.clock, "maximum duration reached");
    if (std::floor(s.clock + 1e-9) > std::floor(before + 1e-9)) sample(s, s.clock);
    return s;
  }

  if (const auto* abort = std::get_if<Abort>(&input)) {
    TaskEvent e = make_event(s, EventType::Abort, s.clock);
    s.phase = Phase::Timeout;
    s.control_active = false;
    e.note = abort->reason;
    finish_event(e, s);
    log_event(s, std::move(e));
    sample(s, s.clock);
    return s;
  }

  const Decision& d = std::get<DecisionEvent>(input).decision;
  if (!s.gate(stimuli).is_active(d.cls))
    throw ProtocolError(fmt::format("decision for class {} while its detector is gated off at t={}",
                                    d.cls, d.timestamp));
  const bool is_toggle = d.cls == stimuli.toggle();
  const double t = d.timestamp;

  TaskEvent e = make_event(s, EventType::Decision, t);
  e.decision = d;
  if (!is_toggle) {
    s.pose = apply_command(s.pose, command_for(stimuli[d.cls].role), cfg, course.bounds);
  }
  finish_event(e, s);
  log_event(s, std::move(e));

  if (is_toggle) {
    switch (s.phase) {
      case Phase::PreRest:
        if (t + 1e-9 >= cfg.pre_rest) {
          enter_phase(s, Phase::Control, t, "navigation stimuli on");
          update_progress(s, course, t);
        }
        break;
      case Phase::Control: {
        TaskEvent g = make_event(s, EventType::GateChange, t);
        if (s.control_active && s.waypoint_progress >= 2) {
          enter_phase(s, Phase::PostRest, t, "navigation stimuli off, task complete");
          break;
        }
        s.control_active = !s.control_active;
        g.note = s.control_active ? "navigation stimuli on" : "navigation stimuli off";
        finish_event(g, s);
        log_event(s, std::move(g));
        break;
      }
      default: break;
    }
  } else {
    update_progress(s, course, t);
  }
  sample(s, t);
  return s;
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectorySample>& samples) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot open " + path);
  f << "t_s,x,y,heading_rad,phase\n";
  for (const auto& s : samples)
    f << fmt::format("{:.4f},{:.6f},{:.6f},{:.6f},{}\n", s.t, s.pose.x, s.pose.y, s.pose.heading,
                     to_string(s.phase));
}

}  // namespace ssvep
