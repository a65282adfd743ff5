#include "ssvep/dsp.hpp"

#include <fmt/format.h>

#include <fstream>

namespace ssvep {
namespace {

constexpr double kButterworthQ = std::numbers::sqrt2 / 2.0;

bool is_integer(double v) { return std::abs(v - std::round(v)) < 1e-9; }

}  // namespace

void PipelineConfig::validate(const StimulusSet& stimuli) const {
  std::vector<std::string> errors;
  if (!(fs > 0.0)) errors.emplace_back("pipeline.fs: must be positive");
  if (!(band_low > 0.0 && band_low < band_high))
    errors.emplace_back("pipeline.band_low: must be positive and below band_high");
  if (!(band_high < fs / 2.0)) errors.emplace_back("pipeline.band_high: must be below fs/2");
  if (!(notch_freq > 0.0 && notch_freq < fs / 2.0))
    errors.emplace_back("pipeline.notch_freq: must lie in (0, fs/2)");
  if (!(notch_q > 0.0)) errors.emplace_back("pipeline.notch_q: must be positive");
  if (window_len < 1) errors.emplace_back("pipeline.window_len: must be >= 1");
  if (hop < 1) errors.emplace_back("pipeline.hop: must be >= 1");
  if (window_len >= 1 && hop >= 1 && window_len % hop != 0)
    errors.emplace_back("pipeline.window_len: must be a multiple of hop");
  if (fs > 0.0 && window_len >= 1) {
    for (const auto& s : stimuli.entries()) {
      for (int h = 1; h <= 3; ++h) {
        const double f = h * s.frequency_hz;
        if (f >= fs / 2.0)
          errors.push_back(fmt::format("stimuli[{}]: harmonic {} Hz aliases at fs {}", s.id, f, fs));
        else if (!is_integer(f * static_cast<double>(window_len) / fs))
          errors.push_back(fmt::format(
              "pipeline.window_len: harmonic {} Hz of stimuli[{}] is not bin-aligned", f, s.id));
      }
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid pipeline config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

BiquadCascade<double> design_bandpass(const PipelineConfig& cfg) {
  return BiquadCascade<double>({Biquad<double>::highpass(cfg.band_low, cfg.fs, kButterworthQ),
                                Biquad<double>::lowpass(cfg.band_high, cfg.fs, kButterworthQ)});
}

BiquadCascade<double> design_notch(const PipelineConfig& cfg) {
  return BiquadCascade<double>({Biquad<double>::notch(cfg.notch_freq, cfg.fs, cfg.notch_q)});
}

BiquadCascade<double> design_chain(const PipelineConfig& cfg) {
  auto sections = design_bandpass(cfg).sections();
  sections.push_back(design_notch(cfg).sections().front());
  return BiquadCascade<double>(std::move(sections));
}

Signal bandpass(const Signal& x, const PipelineConfig& cfg) {
  if (x.size() == 0) throw InvalidArgument("bandpass: empty signal");
  Signal y = x;
  design_bandpass(cfg).process_inplace(y);
  return y;
}

Signal notch(const Signal& x, const PipelineConfig& cfg) {
  if (x.size() == 0) throw InvalidArgument("notch: empty signal");
  Signal y = x;
  design_notch(cfg).process_inplace(y);
  return y;
}

FeatureExtractor::FeatureExtractor(StimulusSet stimuli, PipelineConfig cfg)
    : stimuli_(stimuli), cfg_(cfg), history_(Signal::Zero(cfg.window_len)) {}

std::vector<FeatureVector> FeatureExtractor::push(const Eigen::Ref<const Signal>& samples) {
  std::vector<FeatureVector> out;
  const Eigen::Index w = cfg_.window_len;
  Signal buf(w + samples.size());
  buf << history_, samples;
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    ++seen_;
    if (seen_ >= w && (seen_ - w) % cfg_.hop == 0)
      out.push_back({static_cast<double>(seen_) / cfg_.fs,
                     harmonic_magnitudes(buf.segment(i + 1, w), stimuli_, cfg_.fs)});
  }
  history_ = buf.tail(w);
  return out;
}

std::vector<FeatureVector> extract_features(const Signal& stream, const StimulusSet& stimuli,
                                            const PipelineConfig& cfg) {
  std::vector<FeatureVector> out;
  const Eigen::Index w = cfg.window_len;
  for (Eigen::Index end = w; end <= stream.size(); end += cfg.hop)
    out.push_back({static_cast<double>(end) / cfg.fs,
                   harmonic_magnitudes(stream.segment(end - w, w), stimuli, cfg.fs)});
  return out;
}

void write_features_csv(const std::string& path, const std::vector<FeatureVector>& features) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot open " + path);
  f << "timestamp_s";
  for (int c = 0; c < StimulusSet::kSize; ++c)
    for (int h = 1; h <= 3; ++h) f << fmt::format(",c{}_h{}", c, h);
  f << '\n';
  for (const auto& fv : features) {
    f << fmt::format("{:.4f}", fv.timestamp);
    for (Eigen::Index c = 0; c < fv.magnitudes.rows(); ++c)
      for (int h = 0; h < 3; ++h) f << fmt::format(",{:.6f}", fv.magnitudes(c, h));
    f << '\n';
  }
}

}  // namespace ssvep
