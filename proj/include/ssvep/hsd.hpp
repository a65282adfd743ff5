#pragma once

#include <Eigen/Core>
#include <bitset>
#include <optional>
#include <string>
#include <vector>

#include "ssvep/dsp.hpp"
#include "ssvep/stimulus.hpp"

namespace ssvep {

/// Resting statistics of the raw harmonic sum, per class.
struct CalibrationModel {
  Eigen::VectorXd baseline_mean;
  Eigen::VectorXd baseline_std;

  /// Throws CalibrationError unless every mean is positive and finite.
  void validate() const;
  /// std/mean per class.
  Eigen::VectorXd variation() const { return baseline_std.cwiseQuotient(baseline_mean); }
};

struct ClassifierConfig {
  double dwell_nav = 1.0;     ///< s
  double dwell_toggle = 1.5;  ///< s
  double refractory = 3.0;    ///< s
  double toggle_threshold_k = 3.0;

  void validate() const;
};

enum class DecisionKind { Nav, Toggle };
std::string_view to_string(DecisionKind kind);

struct Decision {
  ClassId cls;
  double timestamp;
  DecisionKind kind;

  friend bool operator==(const Decision&, const Decision&) = default;
};

/// Which detectors are listening.
struct DetectorGate {
  bool control_active = false;
  std::bitset<StimulusSet::kSize> active;

  bool is_active(ClassId id) const { return id >= 0 && id < StimulusSet::kSize && active.test(id); }
  friend bool operator==(const DetectorGate&, const DetectorGate&) = default;
};

/// All four detectors in control state, only the toggle otherwise.
DetectorGate gate_for(bool control_active, const StimulusSet& stimuli = {});

inline constexpr double kCalibrationSeconds = 60.0;

/// Mean and population std of the harmonic sum over a resting recording.
/// window_s is the feature window, so the covered span is
/// last.timestamp - first.timestamp + window_s. Throws CalibrationError if
/// that is under min_span_s.
CalibrationModel calibrate(const std::vector<FeatureVector>& features, const StimulusSet& stimuli,
                           double window_s = 1.0, double min_span_s = kCalibrationSeconds);

double harmonic_sum(const FeatureVector& fv, ClassId cls);
double normalized_sum(const FeatureVector& fv, ClassId cls, const CalibrationModel& calib);

/// Harmonic sum decision with dwell, refractory and detector gating.
///
/// Each feature vector stands for the hop interval ending at its timestamp.
/// A class is selected once it has won every vector of a contiguous span of
/// length dwell(class). After a selection, vectors whose interval starts
/// before the refractory period has elapsed are ignored, and all dwell
/// counting starts over. A gate change also restarts dwell counting.
class HsdClassifier {
 public:
  HsdClassifier(StimulusSet stimuli, CalibrationModel calib, ClassifierConfig cfg, double hop_s);

  std::optional<Decision> step(const FeatureVector& fv, const DetectorGate& gate);

  /// Winner of a single vector under the given gate; nullopt on ties or when
  /// the lone toggle stays under threshold.
  std::optional<ClassId> winner(const FeatureVector& fv, const DetectorGate& gate) const;

  double dwell(ClassId cls) const;
  double toggle_threshold() const;
  const Eigen::VectorXd& last_normalized() const { return last_normalized_; }
  const CalibrationModel& calibration() const { return calib_; }
  const ClassifierConfig& config() const { return cfg_; }

 private:
  StimulusSet stimuli_;
  CalibrationModel calib_;
  ClassifierConfig cfg_;
  double hop_s_;

  std::optional<DetectorGate> gate_;
  std::optional<ClassId> candidate_;
  double span_start_ = 0.0;
  std::optional<double> last_decision_;
  Eigen::VectorXd last_normalized_;
};

/// CSV: timestamp_s,class_id,kind,gate_state
struct DecisionLogRow {
  Decision decision;
  bool control_active;
};
void write_decision_log(const std::string& path, const std::vector<DecisionLogRow>& rows);

}  // namespace ssvep
