#include "ssvep/hsd.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>

#include "ssvep/errors.hpp"

namespace ssvep {
namespace {

constexpr double kTimeEps = 1e-9;

void check_vector(const FeatureVector& fv, ClassId cls) {
  if (cls < 0 || cls >= fv.magnitudes.rows())
    throw InvalidArgument(fmt::format("feature vector has no entry for class {}", cls));
  const auto row = fv.magnitudes.row(cls);
  if (!row.allFinite() || (row.array() < 0.0).any())
    throw InvalidArgument(fmt::format("feature vector entry for class {} is invalid", cls));
}

}  // namespace

std::string_view to_string(DecisionKind kind) {
  return kind == DecisionKind::Nav ? "NAV" : "TOGGLE";
}

void CalibrationModel::validate() const {
  if (baseline_mean.size() != baseline_std.size() || baseline_mean.size() == 0)
    throw CalibrationError("calibration model is empty or inconsistent");
  if (!baseline_mean.allFinite() || (baseline_mean.array() <= 0.0).any())
    throw CalibrationError("calibration baseline_mean must be positive for every class");
  if (!baseline_std.allFinite() || (baseline_std.array() < 0.0).any())
    throw CalibrationError("calibration baseline_std must be non-negative");
}

void ClassifierConfig::validate() const {
  std::vector<std::string> errors;
  if (!(dwell_nav > 0.0)) errors.emplace_back("classifier.dwell_nav: must be positive");
  if (!(dwell_toggle > 0.0)) errors.emplace_back("classifier.dwell_toggle: must be positive");
  if (!(refractory > 0.0)) errors.emplace_back("classifier.refractory: must be positive");
  if (!(toggle_threshold_k > 0.0))
    errors.emplace_back("classifier.toggle_threshold_k: must be positive");
  if (!errors.empty()) {
    std::string msg = "invalid classifier config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

DetectorGate gate_for(bool control_active, const StimulusSet& stimuli) {
  DetectorGate g;
  g.control_active = control_active;
  if (control_active)
    g.active.set();
  else
    g.active.set(static_cast<std::size_t>(stimuli.toggle()));
  return g;
}

CalibrationModel calibrate(const std::vector<FeatureVector>& features, const StimulusSet& stimuli,
                           double window_s, double min_span_s) {
  if (features.empty()) throw CalibrationError("insufficient calibration: no feature vectors");
  const double span = features.back().timestamp - features.front().timestamp + window_s;
  if (span + kTimeEps < min_span_s)
    throw CalibrationError(
        fmt::format("insufficient calibration: {:.3f} s covered, {:.0f} s needed", span, min_span_s));

  const auto n = static_cast<Eigen::Index>(features.size());
  Eigen::MatrixXd sums(n, StimulusSet::kSize);
  for (Eigen::Index i = 0; i < n; ++i)
    for (const auto& s : stimuli.entries()) sums(i, s.id) = harmonic_sum(features[i], s.id);

  CalibrationModel m;
  m.baseline_mean = sums.colwise().mean().transpose();
  const Eigen::MatrixXd centered = sums.rowwise() - m.baseline_mean.transpose();
  m.baseline_std = (centered.colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt().transpose();
  m.validate();
  return m;
}

double harmonic_sum(const FeatureVector& fv, ClassId cls) {
  check_vector(fv, cls);
  return fv.magnitudes.row(cls).sum();
}

double normalized_sum(const FeatureVector& fv, ClassId cls, const CalibrationModel& calib) {
  if (cls < 0 || cls >= calib.baseline_mean.size())
    throw InvalidArgument(fmt::format("calibration has no entry for class {}", cls));
  const double mean = calib.baseline_mean[cls];
  if (!(mean > 0.0) || !std::isfinite(mean))
    throw CalibrationError(fmt::format("invalid calibration: baseline_mean[{}] = {}", cls, mean));
  return harmonic_sum(fv, cls) / mean;
}

HsdClassifier::HsdClassifier(StimulusSet stimuli, CalibrationModel calib, ClassifierConfig cfg,
                             double hop_s)
    : stimuli_(stimuli), calib_(std::move(calib)), cfg_(cfg), hop_s_(hop_s),
      last_normalized_(Eigen::VectorXd::Zero(StimulusSet::kSize)) {
  calib_.validate();
  cfg_.validate();
  if (!(hop_s_ > 0.0)) throw InvalidArgument("hop must be positive");
}

double HsdClassifier::dwell(ClassId cls) const {
  return cls == stimuli_.toggle() ? cfg_.dwell_toggle : cfg_.dwell_nav;
}

double HsdClassifier::toggle_threshold() const {
  const ClassId t = stimuli_.toggle();
  return 1.0 + cfg_.toggle_threshold_k * calib_.baseline_std[t] / calib_.baseline_mean[t];
}

std::optional<ClassId> HsdClassifier::winner(const FeatureVector& fv,
                                             const DetectorGate& gate) const {
  Eigen::VectorXd ns = Eigen::VectorXd::Constant(StimulusSet::kSize, -1.0);
  for (const auto& s : stimuli_.entries())
    if (gate.is_active(s.id)) ns[s.id] = normalized_sum(fv, s.id, calib_);

  if (!gate.control_active) {
    const ClassId t = stimuli_.toggle();
    if (gate.is_active(t) && ns[t] > toggle_threshold()) return t;
    return std::nullopt;
  }
  std::optional<ClassId> best;
  for (const auto& s : stimuli_.entries()) {
    if (!gate.is_active(s.id)) continue;
    bool dominates = true;
    for (const auto& o : stimuli_.entries())
      if (o.id != s.id && gate.is_active(o.id) && !(ns[s.id] > ns[o.id])) dominates = false;
    if (dominates) best = s.id;
  }
  return best;
}

std::optional<Decision> HsdClassifier::step(const FeatureVector& fv, const DetectorGate& gate) {
  for (const auto& s : stimuli_.entries()) {
    if (gate.is_active(s.id))
      last_normalized_[s.id] = normalized_sum(fv, s.id, calib_);
    else if (s.id < fv.magnitudes.rows() && fv.magnitudes.row(s.id).allFinite())
      last_normalized_[s.id] = fv.magnitudes.row(s.id).sum() / calib_.baseline_mean[s.id];
  }

  if (!gate_ || !(*gate_ == gate)) {
    gate_ = gate;
    candidate_.reset();
  }

  const double interval_start = fv.timestamp - hop_s_;
  if (last_decision_ && interval_start + kTimeEps < *last_decision_ + cfg_.refractory) {
    candidate_.reset();
    return std::nullopt;
  }

  const auto won = winner(fv, gate);
  if (!won) {
    candidate_.reset();
    return std::nullopt;
  }
  if (candidate_ != won) {
    candidate_ = won;
    span_start_ = interval_start;
  }
  if (fv.timestamp - span_start_ + kTimeEps < dwell(*won)) return std::nullopt;

  Decision d{*won, fv.timestamp, *won == stimuli_.toggle() ? DecisionKind::Toggle : DecisionKind::Nav};
  last_decision_ = fv.timestamp;
  candidate_.reset();
  return d;
}

void write_decision_log(const std::string& path, const std::vector<DecisionLogRow>& rows) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot open " + path);
  f << "timestamp_s,class_id,kind,gate_state\n";
  for (const auto& r : rows)
    f << fmt::format("{:.4f},{},{},{}\n", r.decision.timestamp, r.decision.cls,
                     to_string(r.decision.kind), r.control_active ? "CONTROL" : "NO_CONTROL");
}

}  // namespace ssvep
