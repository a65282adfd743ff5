#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssvep/dsp.hpp"
#include "ssvep/evaluation.hpp"
#include "ssvep/hsd.hpp"
#include "ssvep/signal_model.hpp"
#include "ssvep/task.hpp"

namespace ssvep {

enum class Mode { Simulated, Live };

struct LiveOptions {
  int port = 8765;
  double chunk_period_ms = 62.5;  ///< wall-clock pacing of one hop
};

struct ExperimentConfig {
  Mode mode = Mode::Simulated;
  SubjectProfile profile = SubjectProfile::experienced();
  StimulusSet stimuli;
  PipelineConfig pipeline;
  ClassifierConfig classifier;
  TaskConfig task;
  std::string course_path;  ///< empty: built-in default course
  Course course;            ///< resolved from course_path by load_config/resolve_course
  std::uint64_t seed = 1;
  int runs = 1;
  std::string out_dir = "runs";
  bool realtime = false;
  LiveOptions live;

  /// Throws ConfigError listing every invalid field by path.
  void validate() const;
  /// Canonical JSON, used for the digest stored with every run.
  std::string to_json() const;
};

/// Reads a config file. Unset fields keep their defaults; `subject.preset`
/// selects a named profile from data/presets.json semantics. Throws
/// ConfigError / ParseError.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
/// Loads cfg.course from cfg.course_path (or the default course).
void resolve_course(ExperimentConfig& cfg);

/// Named subject presets as stored in the presets file.
SubjectProfile preset(const std::string& name);
std::string presets_to_json(const std::vector<SubjectProfile>& profiles);
std::vector<SubjectProfile> parse_presets(const std::string& json_text);

/// Derives an independent stream seed from a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// 60 s of synthetic rest through the acquisition chain.
CalibrationModel calibrate_subject(const SubjectProfile& profile, const StimulusSet& stimuli,
                                   const PipelineConfig& pipeline, std::uint64_t seed);

/// Stands in for the subject's gaze in headless runs: rests, then attends
/// the toggle, then the stimulus of the oracle command, then the toggle at
/// the goal. Re-activates after an accidental switch-off.
std::optional<ClassId> simulated_attention(const TaskState& state, const Course& course,
                                           const TaskConfig& cfg, const StimulusSet& stimuli);

/// Everything one chunk of the loop produced.
struct ChunkResult {
  std::vector<FeatureVector> features;
  std::vector<Decision> decisions;
  std::vector<TaskEvent> events;  ///< appended to the task log during this chunk
  bool pose_changed = false;
};

/// One closed-loop run: signal source -> filters -> features -> HSD -> task.
/// Time advances one hop per chunk on the simulation clock only.
class ClosedLoop {
 public:
  ClosedLoop(const ExperimentConfig& cfg, const SubjectProfile& profile, CalibrationModel calib,
             std::uint64_t source_seed);

  ChunkResult step(std::optional<ClassId> attention);
  void abort(const std::string& reason);

  const TaskState& state() const { return state_; }
  bool finished() const { return state_.finished(); }
  const std::vector<DecisionLogRow>& decisions() const { return decisions_; }
  const HsdClassifier& classifier() const { return classifier_; }
  double clock() const { return state_.clock; }

 private:
  ExperimentConfig cfg_;
  SignalSource source_;
  BiquadCascade<double> chain_;
  FeatureExtractor extractor_;
  HsdClassifier classifier_;
  TaskState state_;
  std::vector<DecisionLogRow> decisions_;
};

struct RunOutcome {
  std::uint64_t seed = 0;
  RunReport report;
  TaskState state;
  std::vector<DecisionLogRow> decisions;
  std::vector<LabeledEvent> labeled;
  CalibrationModel calibration;
  std::filesystem::path dir;  ///< empty when nothing was persisted
};

/// Scores a finished loop.
RunOutcome score_run(const ExperimentConfig& cfg, const ClosedLoop& loop, std::uint64_t seed);
/// Writes config.json, decisions.csv, events.csv, trajectory.csv and report.json.
void persist_run(const ExperimentConfig& cfg, RunOutcome& outcome, const std::filesystem::path& dir);
std::string report_to_json(const ExperimentConfig& cfg, const RunOutcome& outcome);

/// Calibrates, runs one full task headless, scores it, and persists the
/// artifacts under out_dir unless out_dir is empty.
RunOutcome run_single(const ExperimentConfig& cfg, std::uint64_t seed,
                      const std::filesystem::path& out_dir);

struct BatchResult {
  std::vector<std::uint64_t> seeds;
  std::vector<std::optional<RunOutcome>> runs;  ///< nullopt = failed
  std::vector<std::string> failures;
  std::optional<Aggregate> summary;

  std::vector<RunReport> reports() const;
};

/// Independent seeded runs on `threads` workers; results are identical to a
/// sequential pass. Writes one directory per run plus summary.json and
/// summary.txt under out_dir (nothing when out_dir is empty).
BatchResult run_batch(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                      const std::filesystem::path& out_dir, unsigned threads = 0);
std::string batch_summary_json(const ExperimentConfig& cfg, const BatchResult& batch);

/// Search used by `calibrate-presets`.
struct PresetTuning {
  SubjectProfile experienced;
  SubjectProfile naive;
  Aggregate experienced_summary;
  Aggregate naive_summary;
  std::vector<std::string> log;
};
PresetTuning tune_presets(const ExperimentConfig& base, const std::vector<std::uint64_t>& seeds);

}  // namespace ssvep
