#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "ssvep/errors.hpp"
#include "ssvep/io.hpp"
#include "ssvep/task.hpp"

using namespace ssvep;

namespace {

const Course kCourse;
const TaskConfig kCfg;
const StimulusSet kStim;
constexpr double kPi = std::numbers::pi;

DecisionEvent nav(Command c, double t) {
  return {{kStim.by_role(role_for(c)), t, DecisionKind::Nav}};
}
DecisionEvent toggle(double t) { return {{kStim.toggle(), t, DecisionKind::Toggle}}; }

TaskState advance(TaskState s, double to) {
  while (s.clock + 1e-9 < to && !s.finished()) s = task_step(s, Tick{std::min(0.0625, to - s.clock)}, kCourse, kCfg);
  return s;
}

// Independent model of the run phases used as an oracle for task_step.
struct Model {
  Phase phase = Phase::PreRest;
  bool on = false;
  int progress = 0;
  double x = 0, y = 0, h = kPi / 2, clock = 0, post_start = 0;

  void reach() {
    const double wx[2] = {0, 0}, wy[2] = {0, 12};
    while (progress < 2 && std::hypot(x - wx[progress], y - wy[progress]) <= 0.75) ++progress;
  }
  void tick(double dt) {
    clock += dt;
    if (phase == Phase::PostRest && clock - post_start >= 30 - 1e-9) phase = Phase::Done;
    else if ((phase == Phase::PreRest || phase == Phase::Control) && clock >= 600 - 1e-9) phase = Phase::Timeout;
  }
  void decide(int cls, double t) {
    if (cls == 3) {
      if (phase == Phase::PreRest && t >= 30 - 1e-9) {
        phase = Phase::Control;
        on = true;
        reach();
      } else if (phase == Phase::Control) {
        if (on && progress == 2) {
          phase = Phase::PostRest;
          on = false;
          post_start = t;
        } else {
          on = !on;
        }
      }
      return;
    }
    if (cls == 0) h += kPi / 6;
    if (cls == 2) h -= kPi / 6;
    h = std::fmod(std::fmod(h, 2 * kPi) + 2 * kPi, 2 * kPi);
    if (cls == 1) {
      x = std::clamp(x + std::cos(h), -6.0, 6.0);
      y = std::clamp(y + std::sin(h), -3.0, 15.0);
    }
    reach();
  }
};

// Target of the slalom follower, computed from the course geometry directly.
Point expected_target(const Pose& p, int progress) {
  if (progress == 0) return {0, 0};
  const Point via[3] = {{1, 4}, {-1, 8}, {0, 12}};
  int leg = (p.y >= 4) + (p.y >= 8);
  while (leg < 2 && std::hypot(p.x - via[leg].x(), p.y - via[leg].y()) <= 0.75) ++leg;
  return via[leg];
}

// Command minimizing heading-error violation first, distance to target second.
Command brute_force_command(const Pose& p, int progress) {
  const Point t = expected_target(p, progress);
  const double bearing = std::atan2(t.y() - p.y, t.x() - p.x);
  double best = INFINITY;
  Command arg = Command::Forward;
  for (Command c : {Command::Left, Command::Forward, Command::Right}) {
    const Pose q = apply_command(p, c, kCfg);
    const double err = std::abs(oracle::wrap(bearing - q.heading));
    const double cost = 1e6 * std::max(err - kCfg.turn_angle / 2, 0.0) + std::hypot(t.x() - q.x, t.y() - q.y);
    if (cost < best) {
      best = cost;
      arg = c;
    }
  }
  return arg;
}

}  // namespace

TEST_CASE("apply_command geometry") {
  TaskConfig cfg;
  cfg.step_distance = 1.0;
  Pose p = apply_command({0, 0, kPi / 2}, Command::Forward, cfg);
  CHECK(p.x == doctest::Approx(0).epsilon(1e-12));
  CHECK(p.y == doctest::Approx(1));
  CHECK(p.heading == doctest::Approx(kPi / 2));

  cfg.turn_angle = kPi / 4;
  p = apply_command({0, 0, 0}, Command::Left, cfg);
  CHECK(p.heading == doctest::Approx(kPi / 4));
  CHECK(p.x == 0);
  CHECK(p.y == 0);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 2 * kPi);
  for (int i = 0; i < 100; ++i) {
    const Pose a{1.5, -2, u(rng)};
    const Pose b = apply_command(apply_command(a, Command::Left, kCfg), Command::Right, kCfg);
    CHECK(std::abs(oracle::wrap(b.heading - a.heading)) < 1e-12);
    CHECK(b.x == a.x);
  }

  const Pose edge = apply_command({5.8, 0, 0}, Command::Forward, kCfg, kCourse.bounds);
  CHECK(edge.x == 6.0);
}

TEST_CASE("rest, activation, navigation, deactivation, post-rest") {
  TaskState s = initial_state(kCourse);
  s = task_step(s, Tick{30.0}, kCourse, kCfg);
  CHECK(s.phase == Phase::PreRest);
  s = task_step(s, toggle(30.0), kCourse, kCfg);
  CHECK(s.phase == Phase::Control);
  CHECK(s.control_active);
  CHECK(s.waypoint_progress == 1);

  s.pose = {0, 11.5, kPi / 2};
  s = task_step(s, nav(Command::Forward, 31.0), kCourse, kCfg);
  CHECK(s.waypoint_progress == 2);
  s = task_step(s, toggle(35.0), kCourse, kCfg);
  CHECK(s.phase == Phase::PostRest);
  CHECK(s.completed_at == 35.0);
  s = advance(s, 64.9);
  CHECK(s.phase == Phase::PostRest);
  s = advance(s, 65.0);
  CHECK(s.phase == Phase::Done);
  CHECK_THROWS_AS(task_step(s, Tick{1.0}, kCourse, kCfg), InvalidArgument);
}

TEST_CASE("early toggle does not activate") {
  TaskState s = advance(initial_state(kCourse), 15.0);
  s = task_step(s, toggle(15.0), kCourse, kCfg);
  CHECK(s.phase == Phase::PreRest);
  CHECK_FALSE(s.control_active);
  CHECK(s.log.back().type == EventType::Decision);
}

TEST_CASE("ten-minute cap") {
  TaskState s = task_step(initial_state(kCourse), Tick{30.0}, kCourse, kCfg);
  s = task_step(s, toggle(30.0), kCourse, kCfg);
  s = task_step(s, Tick{569.9}, kCourse, kCfg);
  CHECK(s.phase == Phase::Control);
  s = task_step(s, Tick{0.1}, kCourse, kCfg);
  CHECK(s.phase == Phase::Timeout);
  CHECK_FALSE(s.control_active);

  TaskState idle = task_step(initial_state(kCourse), Tick{600.0}, kCourse, kCfg);
  CHECK(idle.phase == Phase::Timeout);
}

TEST_CASE("mid-run toggle switches the detectors off and back on") {
  TaskState s = task_step(initial_state(kCourse), Tick{30.0}, kCourse, kCfg);
  s = task_step(s, toggle(30.0), kCourse, kCfg);
  s = task_step(s, toggle(35.0), kCourse, kCfg);
  CHECK(s.phase == Phase::Control);
  CHECK_FALSE(s.control_active);
  CHECK(s.gate(kStim) == gate_for(false));
  CHECK_THROWS_AS(task_step(s, nav(Command::Forward, 36.0), kCourse, kCfg), ProtocolError);
  s = task_step(s, toggle(40.0), kCourse, kCfg);
  CHECK(s.control_active);
}

TEST_CASE("abort ends the run with its reason") {
  TaskState s = task_step(initial_state(kCourse), Tick{3.0}, kCourse, kCfg);
  s = task_step(s, Abort{"client disconnected"}, kCourse, kCfg);
  CHECK(s.phase == Phase::Timeout);
  CHECK(s.log.back().type == EventType::Abort);
  CHECK(s.log.back().note == "client disconnected");
}

TEST_CASE("task_step agrees with an independent model over random event sequences") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u;
  int completed = 0, toggled_off = 0;
  for (int trial = 0; trial < 300; ++trial) {
    TaskState s = initial_state(kCourse);
    Model m;
    int last_progress = 0;
    while (!s.finished()) {
      if (u(rng) < 0.6) {
        const double dt = 0.0625 * (1 + static_cast<int>(u(rng) * 64));
        s = task_step(s, Tick{dt}, kCourse, kCfg);
        m.tick(dt);
      } else {
        int cls = 3;
        if (s.control_active && u(rng) < 0.9) {
          cls = u(rng) < 0.7 ? kStim.by_role(role_for(oracle_command(s.pose, kCourse, s.waypoint_progress, kCfg)))
                             : static_cast<int>(u(rng) * 3);
        }
        s = task_step(s, DecisionEvent{{cls, s.clock, cls == 3 ? DecisionKind::Toggle : DecisionKind::Nav}},
                      kCourse, kCfg);
        m.decide(cls, s.clock);
      }
      REQUIRE(s.phase == m.phase);
      REQUIRE(s.control_active == m.on);
      REQUIRE(s.waypoint_progress == m.progress);
      CHECK(s.pose.x == doctest::Approx(m.x).epsilon(1e-9));
      CHECK(s.pose.y == doctest::Approx(m.y).epsilon(1e-9));
      CHECK(std::abs(oracle::wrap(s.pose.heading - m.h)) < 1e-9);
      CHECK(s.control_active == (s.phase == Phase::Control && s.gate(kStim).active.count() == 4));
      CHECK(s.waypoint_progress >= last_progress);
      last_progress = s.waypoint_progress;
      toggled_off += s.phase == Phase::Control && !s.control_active;
    }
    completed += s.phase == Phase::Done;
    for (const auto& e : s.log)
      if (e.type == EventType::Decision && e.decision->kind == DecisionKind::Nav) CHECK(e.control_before);
  }
  CHECK(completed > 10);
  CHECK(toggled_off > 10);
}

TEST_CASE("oracle command examples") {
  const Course c;
  CHECK(oracle_command({1, 1, kPi / 2}, c, 1, kCfg) == Command::Forward);
  CHECK(oracle_command({1, 1, 0}, c, 1, kCfg) == Command::Left);
  CHECK(oracle_command({1, 1, kPi}, c, 1, kCfg) == Command::Right);
  const auto path = c.reference_path();
  CHECK(path[0] == Point(1, 4));
  CHECK(path[1] == Point(-1, 8));
  CHECK(path[2] == Point(0, 12));
}

TEST_CASE("oracle command equals the brute-force cost minimizer") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> ux(-5, 5), uy(-2, 14), uh(0, 2 * kPi);
  std::uniform_int_distribution<int> up(1, 2);
  for (int i = 0; i < 1000; ++i) {
    const Pose p{ux(rng), uy(rng), uh(rng)};
    const int progress = p.y > 11 ? up(rng) : 1;
    CHECK(oracle_target(p, kCourse, progress) == expected_target(p, progress));
    CHECK(oracle_command(p, kCourse, progress, kCfg) == brute_force_command(p, progress));
  }
}

TEST_CASE("a perfect decision script completes well inside the cap") {
  TaskState s = task_step(initial_state(kCourse), Tick{30.0}, kCourse, kCfg);
  s = task_step(s, toggle(30.0), kCourse, kCfg);
  double t = 30.0;
  int navs = 0;
  while (s.waypoint_progress < 2 && navs < 200) {
    t += 4.0;
    s = advance(s, t);
    s = task_step(s, nav(oracle_command(s.pose, kCourse, s.waypoint_progress, kCfg), t), kCourse, kCfg);
    ++navs;
  }
  t += 4.5;
  s = advance(s, t);
  s = task_step(s, toggle(t), kCourse, kCfg);
  CHECK(s.phase == Phase::PostRest);
  CHECK(*s.completed_at < 200.0);
  CHECK(navs + 2 <= 30);
}

TEST_CASE("replaying the same inputs gives the same state") {
  std::vector<TaskInput> inputs{Tick{30.0}, toggle(30.0)};
  for (int i = 0; i < 20; ++i) {
    inputs.emplace_back(Tick{4.0});
    inputs.emplace_back(nav(i % 3 == 0 ? Command::Left : Command::Forward, 34.0 + 4.0 * i));
  }
  const auto replay = [&] {
    TaskState s = initial_state(kCourse);
    for (const auto& in : inputs) s = task_step(s, in, kCourse, kCfg);
    return s;
  };
  const TaskState a = replay(), b = replay();
  CHECK(event_log_to_csv(a.log) == event_log_to_csv(b.log));
  CHECK(a.pose.x == b.pose.x);
  CHECK(a.trajectory.size() == b.trajectory.size());
}

TEST_CASE("trajectory is sampled every second and at every decision") {
  TaskState s = advance(initial_state(kCourse), 30.0);
  CHECK(s.trajectory.size() == 31);
  s = task_step(s, toggle(30.0), kCourse, kCfg);
  CHECK(s.trajectory.size() == 32);

  const auto path = std::filesystem::temp_directory_path() / "ssvep_traj.csv";
  write_trajectory_csv(path.string(), s.trajectory);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "t_s,x,y,heading_rad,phase");
}

TEST_CASE("course files") {
  const Course c = load_course(std::string(SSVEP_DATA_DIR) + "/default_course.json");
  CHECK(course_to_json(c) == course_to_json(Course{}));
  CHECK(course_to_json(parse_course(course_to_json(c))) == course_to_json(c));
  CHECK_THROWS_AS(parse_course("{\"poles\": []}"), ParseError);
  CHECK_THROWS_AS(parse_course("not json"), ParseError);
  CHECK_THROWS_AS(load_course("/nonexistent/course.json"), ParseError);

  Course bad;
  bad.poles[1] = bad.poles[0];
  bad.reach_radius = 0;
  try {
    bad.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("course.poles") != std::string::npos);
    CHECK(std::string(e.what()).find("course.reach_radius") != std::string::npos);
  }

  TaskConfig tc;
  tc.max_duration = 50;
  CHECK_THROWS_WITH_AS(tc.validate(), doctest::Contains("task.max_duration"), ConfigError);
}
