#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ssvep/harness.hpp"

namespace ssvep {

/// Wire protocol version carried in every message as "v".
inline constexpr int kProtocolVersion = 1;

namespace wire {

struct Attend {
  std::optional<ClassId> target;
};
struct Start {};
struct AbortRun {};
using ClientMessage = std::variant<Attend, Start, AbortRun>;

/// Parses one client message. Throws ProtocolError with the rejection reason
/// (bad JSON, wrong version, unknown type, attend target not a stimulus).
ClientMessage decode_client(const std::string& text, const StimulusSet& stimuli);
std::string encode_attend(double t_s, std::optional<ClassId> target);
std::string encode_start(double t_s);
std::string encode_abort(double t_s);

std::string hello(double t_s, const ExperimentConfig& cfg);
std::string phase_change(double t_s, Phase phase, bool control_active);
std::string pose_update(double t_s, const Pose& pose, int progress);
std::string decision(double t_s, const Decision& d, const StimulusSet& stimuli, bool control_active);
std::string cue(double t_s, const std::string& text);
std::string feature_snapshot(double t_s, const Eigen::VectorXd& normalized, const DetectorGate& gate);
/// Payload "report" is the same object persisted as report.json.
std::string report(double t_s, const std::string& report_json);
std::string rejected(double t_s, const std::string& reason);

}  // namespace wire

/// Transport-free live session: owns the closed loop, consumes client
/// messages, emits server messages. Attention changes take effect at the
/// next chunk boundary.
class LiveSession {
 public:
  LiveSession(ExperimentConfig cfg, std::uint64_t seed);

  /// Greeting sent on connect.
  std::vector<std::string> greet() const;
  /// Applies one raw client message; returns replies (e.g. a rejection).
  std::vector<std::string> receive(const std::string& text);
  /// Advances one chunk if the run has started.
  std::vector<std::string> tick();
  /// Client went away: abort and persist.
  std::vector<std::string> disconnect(const std::string& reason);

  bool started() const { return loop_.has_value(); }
  bool finished() const { return finished_; }
  const std::optional<RunOutcome>& outcome() const { return outcome_; }
  std::optional<ClassId> attention() const { return attention_; }

 private:
  std::vector<std::string> start();
  std::vector<std::string> finish();

  ExperimentConfig cfg_;
  std::uint64_t seed_;
  std::optional<ClosedLoop> loop_;
  std::optional<ClassId> attention_;
  bool finished_ = false;
  std::optional<RunOutcome> outcome_;
  int chunk_ = 0;
};

struct SessionResult {
  std::optional<RunOutcome> outcome;
  std::vector<double> chunk_intervals_ms;  ///< wall-clock spacing of chunks
};

/// Serves one WebSocket client on cfg.live.port (0 picks a free port),
/// pacing the simulation at cfg.live.chunk_period_ms per chunk.
/// on_listening receives the bound port once the server accepts connections.
SessionResult serve_session(const ExperimentConfig& cfg, std::uint64_t seed,
                            const std::function<void(unsigned short)>& on_listening = {});

}  // namespace ssvep
