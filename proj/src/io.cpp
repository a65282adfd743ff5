#include "ssvep/io.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include "ssvep/errors.hpp"

namespace ssvep {
namespace {

constexpr std::string_view kHeader =
    "t_s,type,phase,control_before,control_after,progress_before,x_before,y_before,"
    "heading_before,x_after,y_after,heading_after,class_id,kind,note";

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("event log: bad number '" + s + "'");
  return v;
}

int to_int(const std::string& s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("event log: bad integer '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "1") return true;
  if (s == "0") return false;
  throw ParseError("event log: bad flag '" + s + "'");
}

template <typename E, std::size_t N>
E from_name(const std::string& s, const E (&all)[N]) {
  for (E e : all)
    if (to_string(e) == s) return e;
  throw ParseError("event log: unknown name '" + s + "'");
}

}  // namespace

std::string event_log_to_csv(const std::vector<TaskEvent>& log) {
  std::string out(kHeader);
  out += '\n';
  for (const auto& e : log) {
    std::string note = e.note;
    for (char& c : note)
      if (c == ',' || c == '\n') c = ';';
    out += fmt::format("{},{},{},{:d},{:d},{},{},{},{},{},{},{},{},{},{}\n", e.t, to_string(e.type),
                       to_string(e.phase), e.control_before, e.control_after, e.progress_before,
                       e.pose_before.x, e.pose_before.y, e.pose_before.heading, e.pose_after.x,
                       e.pose_after.y, e.pose_after.heading,
                       e.decision ? std::to_string(e.decision->cls) : std::string(),
                       e.decision ? to_string(e.decision->kind) : std::string_view(), note);
  }
  return out;
}

std::vector<TaskEvent> parse_event_log(const std::string& csv) {
  static constexpr EventType kTypes[] = {EventType::PhaseChange, EventType::Decision,
                                         EventType::GateChange, EventType::Waypoint, EventType::Abort};
  static constexpr Phase kPhases[] = {Phase::PreRest, Phase::Control, Phase::PostRest, Phase::Done,
                                      Phase::Timeout};
  static constexpr DecisionKind kKinds[] = {DecisionKind::Nav, DecisionKind::Toggle};

  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw ParseError("event log: missing header");
  std::vector<TaskEvent> log;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 15) throw ParseError(fmt::format("event log row {}: expected 15 fields", row));
    TaskEvent e;
    e.t = to_double(f[0]);
    e.type = from_name(f[1], kTypes);
    e.phase = from_name(f[2], kPhases);
    e.control_before = to_bool(f[3]);
    e.control_after = to_bool(f[4]);
    e.progress_before = to_int(f[5]);
    e.pose_before = {to_double(f[6]), to_double(f[7]), to_double(f[8])};
    e.pose_after = {to_double(f[9]), to_double(f[10]), to_double(f[11])};
    if (!f[12].empty()) e.decision = Decision{to_int(f[12]), e.t, from_name(f[13], kKinds)};
    else if (!f[13].empty()) throw ParseError(fmt::format("event log row {}: kind without class", row));
    if (e.type == EventType::Decision && !e.decision)
      throw ParseError(fmt::format("event log row {}: decision without class", row));
    e.note = f[14];
    log.push_back(std::move(e));
  }
  return log;
}

void write_text(const std::string& path, std::string_view text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot open " + path + " for writing");
  f << text;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string digest(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace ssvep
