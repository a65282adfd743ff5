#pragma once

#include <Eigen/Core>
#include <array>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ssvep/hsd.hpp"
#include "ssvep/stimulus.hpp"

namespace ssvep {

using Point = Eigen::Vector2d;

/// Heading is measured counter-clockwise from +x, kept in [0, 2pi).
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Point position() const { return {x, y}; }
};

double normalize_heading(double rad);
/// Wraps to (-pi, pi].
double wrap_angle(double rad);

struct Bounds {
  double xmin = -6.0, ymin = -3.0, xmax = 6.0, ymax = 15.0;
};

struct Course {
  Pose start{0.0, 0.0, std::numbers::pi / 2.0};
  std::array<Point, 2> poles{Point(0.0, 4.0), Point(0.0, 8.0)};
  std::array<Point, 2> waypoints{Point(0.0, 0.0), Point(0.0, 12.0)};
  double reach_radius = 0.75;
  Bounds bounds;
  /// Lateral distance of the reference path from each pole.
  double slalom_offset = 1.0;

  void validate() const;
  /// Via-points of the reference path: right of pole 1, left of pole 2, then
  /// waypoint 2 ("right" relative to the start -> waypoint 2 direction).
  std::array<Point, 3> reference_path() const;
};

/// Loads a course from its JSON text form; throws ParseError.
Course load_course(const std::string& path);
Course parse_course(const std::string& text);
std::string course_to_json(const Course& c);

struct TaskConfig {
  double pre_rest = 30.0;
  double post_rest = 30.0;
  double max_duration = 600.0;
  double step_distance = 1.0;
  double turn_angle = std::numbers::pi / 6.0;

  void validate() const;
};

enum class Command { Left, Forward, Right };
std::string_view to_string(Command c);
Command command_for(Role role);
Role role_for(Command c);

Pose apply_command(const Pose& pose, Command cmd, const TaskConfig& cfg, const Bounds& bounds);
inline Pose apply_command(const Pose& pose, Command cmd, const TaskConfig& cfg) {
  return apply_command(pose, cmd, cfg, Bounds{-1e300, -1e300, 1e300, 1e300});
}

/// Target the greedy follower steers toward from this pose.
Point oracle_target(const Pose& pose, const Course& course, int progress);
/// Turn toward the target while the heading error exceeds turn_angle/2,
/// otherwise go forward.
Command oracle_command(const Pose& pose, const Course& course, int progress, const TaskConfig& cfg);

enum class Phase { PreRest, Control, PostRest, Done, Timeout };
std::string_view to_string(Phase p);

enum class EventType { PhaseChange, Decision, GateChange, Waypoint, Abort };
std::string_view to_string(EventType e);

struct TaskEvent {
  double t = 0.0;
  EventType type = EventType::PhaseChange;
  Phase phase = Phase::PreRest;  ///< phase after the event
  bool control_before = false;   ///< detector gate before the event
  bool control_after = false;
  int progress_before = 0;
  Pose pose_before;
  Pose pose_after;
  std::optional<Decision> decision;
  std::string note;
};

struct TrajectorySample {
  double t;
  Pose pose;
  Phase phase;
};

struct TaskState {
  Phase phase = Phase::PreRest;
  Pose pose;
  double clock = 0.0;
  int waypoint_progress = 0;
  bool control_active = false;  ///< detector gate; only ever true in Control
  std::optional<double> control_entered;
  std::optional<double> completed_at;  ///< entry into PostRest
  std::optional<double> post_rest_started;
  std::vector<TaskEvent> log;
  std::vector<TrajectorySample> trajectory;

  bool finished() const { return phase == Phase::Done || phase == Phase::Timeout; }
  DetectorGate gate(const StimulusSet& stimuli = {}) const { return gate_for(control_active, stimuli); }
};

TaskState initial_state(const Course& course);

struct Tick {
  double dt;
};
struct DecisionEvent {
  Decision decision;
};
struct Abort {
  std::string reason;
};
using TaskInput = std::variant<Tick, DecisionEvent, Abort>;

/// Event-sourced run state machine. Throws ProtocolError for a decision from
/// a gated-off detector and InvalidArgument when the run is already over.
TaskState task_step(TaskState state, const TaskInput& input, const Course& course,
                    const TaskConfig& cfg, const StimulusSet& stimuli = {});

/// CSV: t_s,x,y,heading_rad,phase
void write_trajectory_csv(const std::string& path, const std::vector<TrajectorySample>& samples);

}  // namespace ssvep
