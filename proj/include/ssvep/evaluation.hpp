#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ssvep/task.hpp"

namespace ssvep {

enum class Period { Control, NoControl };
enum class Label { TpC, FpC, FpNc };
std::string_view to_string(Period p);
std::string_view to_string(Label l);

struct LabeledEvent {
  double timestamp;
  ClassId cls;
  DecisionKind kind;
  Period period;
  Label label;
};

/// A NAV decision is TP_C iff it equals the oracle command at the pose it was
/// made from. A toggle is TP_C iff it is the scheduled activation (first
/// toggle once pre-rest has elapsed) or the deactivation at waypoint 2. Every
/// other decision is FP_C with detectors on and FP_NC with detectors off.
/// The scheduled activation opens the control period and is counted in it.
/// Throws ParseError on a malformed log.
std::vector<LabeledEvent> label_events(const std::vector<TaskEvent>& log, const Course& course,
                                       const TaskConfig& cfg, const StimulusSet& stimuli = {});

struct PeriodDurations {
  double control_s = 0.0;
  double no_control_s = 0.0;
  double total() const { return control_s + no_control_s; }
};

/// Control = detectors fully on; everything else up to run_end is no-control.
PeriodDurations measure_periods(const std::vector<TaskEvent>& log, double run_end);

struct RunReport {
  int tp_c = 0;
  int fp_c = 0;
  int fp_nc = 0;
  double tp_c_rate = 0.0;  ///< per minute of control
  double fp_c_rate = 0.0;
  double fp_nc_rate = 0.0;  ///< per minute of no-control
  std::optional<double> ppv;  ///< absent when no decisions were made
  std::optional<double> time_to_completion;  ///< absent on timeout
  double control_duration = 0.0;
  double no_control_duration = 0.0;
  std::string trajectory_file;

  bool completed() const { return time_to_completion.has_value(); }
};

/// Throws ConsistencyError when events fall in a period of zero length or past
/// the measured run.
RunReport compute_report(const std::vector<LabeledEvent>& labeled, const PeriodDurations& periods,
                         std::optional<double> time_to_completion);

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;  ///< population
  int n = 0;         ///< runs contributing
};

struct Aggregate {
  int runs = 0;
  MetricStats ppv, tp_c_rate, fp_c_rate, fp_nc_rate, time_to_completion;
  double completion_fraction = 0.0;
};

/// Mean and population std per metric. PPV and time average over the runs
/// where they exist. Throws InvalidArgument on an empty list.
Aggregate aggregate(const std::vector<RunReport>& reports);

/// Column layout of the results table: PPV (%), TP_C, FP_C, FP_NC
/// (per minute), time (s).
std::string format_summary_table(const std::vector<std::string>& row_names,
                                 const std::vector<RunReport>& reports, const Aggregate& agg);

}  // namespace ssvep
