#include "ssvep/evaluation.hpp"

#include <fmt/format.h>

#include <cmath>

#include "ssvep/errors.hpp"

namespace ssvep {
namespace {

MetricStats stats(const std::vector<double>& v) {
  MetricStats s;
  s.n = static_cast<int>(v.size());
  if (v.empty()) return s;
  const Eigen::Map<const Eigen::VectorXd> x(v.data(), static_cast<Eigen::Index>(v.size()));
  s.mean = x.mean();
  s.std = std::sqrt((x.array() - s.mean).square().mean());
  return s;
}

}  // namespace

std::string_view to_string(Period p) { return p == Period::Control ? "CONTROL" : "NO_CONTROL"; }

std::string_view to_string(Label l) {
  switch (l) {
    case Label::TpC: return "TP_C";
    case Label::FpC: return "FP_C";
    case Label::FpNc: return "FP_NC";
  }
  return "?";
}

std::vector<LabeledEvent> label_events(const std::vector<TaskEvent>& log, const Course& course,
                                       const TaskConfig& cfg, const StimulusSet& stimuli) {
  std::vector<LabeledEvent> out;
  bool activated = false;
  double last_t = 0.0;
  for (const auto& e : log) {
    if (!std::isfinite(e.t) || e.t + 1e-9 < last_t)
      throw ParseError(fmt::format("event log: timestamp {} out of order", e.t));
    last_t = e.t;
    if (e.type != EventType::Decision) continue;
    if (!e.decision) throw ParseError("event log: decision event without a decision");
    const Decision& d = *e.decision;
    if (!stimuli.contains(d.cls))
      throw ParseError(fmt::format("event log: unknown class {}", d.cls));
    const bool is_toggle = d.cls == stimuli.toggle();
    if (is_toggle != (d.kind == DecisionKind::Toggle))
      throw ParseError("event log: decision kind does not match its class");

    LabeledEvent le{d.timestamp, d.cls, d.kind, e.control_before ? Period::Control : Period::NoControl,
                    Label::FpNc};
    if (is_toggle) {
      if (!activated && e.phase == Phase::PreRest && d.timestamp + 1e-9 >= cfg.pre_rest) {
        activated = true;
        le.period = Period::Control;
        le.label = Label::TpC;
      } else if (e.control_before && e.phase == Phase::Control && e.progress_before >= 2) {
        le.label = Label::TpC;
      } else {
        le.label = e.control_before ? Label::FpC : Label::FpNc;
      }
    } else {
      if (!e.control_before) throw ParseError("event log: navigation decision with detectors off");
      const Command issued = command_for(stimuli[d.cls].role);
      le.label = issued == oracle_command(e.pose_before, course, e.progress_before, cfg) ? Label::TpC
                                                                                         : Label::FpC;
    }
    out.push_back(le);
  }
  return out;
}

PeriodDurations measure_periods(const std::vector<TaskEvent>& log, double run_end) {
  PeriodDurations d;
  bool on = false;
  double since = 0.0;
  for (const auto& e : log) {
    if (e.control_before == e.control_after) continue;
    (on ? d.control_s : d.no_control_s) += e.t - since;
    since = e.t;
    on = e.control_after;
  }
  (on ? d.control_s : d.no_control_s) += std::max(0.0, run_end - since);
  return d;
}

RunReport compute_report(const std::vector<LabeledEvent>& labeled, const PeriodDurations& periods,
                         std::optional<double> time_to_completion) {
  RunReport r;
  for (const auto& e : labeled) {
    if (e.timestamp > periods.total() + 1e-9)
      throw ConsistencyError(fmt::format("event at {} s lies past the measured run", e.timestamp));
    const bool control = e.period == Period::Control;
    if ((control ? periods.control_s : periods.no_control_s) <= 0.0)
      throw ConsistencyError(
          fmt::format("event at {} s falls in a {} period of zero length", e.timestamp, to_string(e.period)));
    if ((e.label == Label::FpNc) == control)
      throw ConsistencyError("label does not match its period");
    switch (e.label) {
      case Label::TpC: ++r.tp_c; break;
      case Label::FpC: ++r.fp_c; break;
      case Label::FpNc: ++r.fp_nc; break;
    }
  }
  const double control_min = periods.control_s / 60.0;
  const double no_control_min = periods.no_control_s / 60.0;
  r.control_duration = periods.control_s;
  r.no_control_duration = periods.no_control_s;
  r.tp_c_rate = control_min > 0.0 ? r.tp_c / control_min : 0.0;
  r.fp_c_rate = control_min > 0.0 ? r.fp_c / control_min : 0.0;
  r.fp_nc_rate = no_control_min > 0.0 ? r.fp_nc / no_control_min : 0.0;
  const int total = r.tp_c + r.fp_c + r.fp_nc;
  if (total > 0) r.ppv = static_cast<double>(r.tp_c) / total;
  r.time_to_completion = time_to_completion;
  return r;
}

Aggregate aggregate(const std::vector<RunReport>& reports) {
  if (reports.empty()) throw InvalidArgument("aggregate needs at least one report");
  std::vector<double> ppv, tp, fpc, fpnc, time;
  int completed = 0;
  for (const auto& r : reports) {
    if (r.ppv) ppv.push_back(*r.ppv);
    tp.push_back(r.tp_c_rate);
    fpc.push_back(r.fp_c_rate);
    fpnc.push_back(r.fp_nc_rate);
    if (r.time_to_completion) {
      time.push_back(*r.time_to_completion);
      ++completed;
    }
  }
  Aggregate a;
  a.runs = static_cast<int>(reports.size());
  a.ppv = stats(ppv);
  a.tp_c_rate = stats(tp);
  a.fp_c_rate = stats(fpc);
  a.fp_nc_rate = stats(fpnc);
  a.time_to_completion = stats(time);
  a.completion_fraction = static_cast<double>(completed) / a.runs;
  return a;
}

std::string format_summary_table(const std::vector<std::string>& row_names,
                                 const std::vector<RunReport>& reports, const Aggregate& agg) {
  const auto opt = [](const std::optional<double>& v, double scale, int prec) {
    return v ? fmt::format("{:.{}f}", *v * scale, prec) : std::string("---");
  };
  std::string out = fmt::format("{:<12}{:>9}{:>9}{:>9}{:>10}{:>9}\n", "run", "PPV(%)", "TP_C/min",
                                "FP_C/min", "FP_NC/min", "Time(s)");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out += fmt::format("{:<12}{:>9}{:>9.1f}{:>9.1f}{:>10.1f}{:>9}\n",
                       i < row_names.size() ? row_names[i] : fmt::format("run{}", i),
                       opt(r.ppv, 100.0, 1), r.tp_c_rate, r.fp_c_rate, r.fp_nc_rate,
                       opt(r.time_to_completion, 1.0, 0));
  }
  const auto stat = [](const MetricStats& s, double scale, int prec, bool mean) {
    if (s.n == 0) return std::string("---");
    return fmt::format("{:.{}f}", (mean ? s.mean : s.std) * scale, prec);
  };
  for (bool mean : {true, false}) {
    out += fmt::format("{:<12}{:>9}{:>9}{:>9}{:>10}{:>9}\n", mean ? "Mean" : "Std",
                       stat(agg.ppv, 100.0, 1, mean), stat(agg.tp_c_rate, 1.0, 1, mean),
                       stat(agg.fp_c_rate, 1.0, 1, mean), stat(agg.fp_nc_rate, 1.0, 1, mean),
                       stat(agg.time_to_completion, 1.0, 0, mean));
  }
  out += fmt::format("completed {}/{} runs\n",
                     static_cast<int>(std::lround(agg.completion_fraction * agg.runs)), agg.runs);
  return out;
}

}  // namespace ssvep
