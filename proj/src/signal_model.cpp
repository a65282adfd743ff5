#include "ssvep/signal_model.hpp"

#include <fmt/format.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>
#include <unsupported/Eigen/FFT>

#include "ssvep/errors.hpp"

namespace ssvep {
namespace {

constexpr Eigen::Index kBackgroundBlock = Eigen::Index{1} << 18;

enum class Stream : std::uint32_t { White = 1, Alpha = 2, Jitter = 3, Block = 4 };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

std::uint64_t block_seed(std::uint64_t seed, std::uint64_t block) {
  auto rng = make_rng(seed, Stream::Block, block);
  return rng();
}

Eigen::Index first_index_at_or_after(double t, double fs) {
  return static_cast<Eigen::Index>(std::ceil(t * fs - 1e-9));
}

double alpha_phase(std::uint64_t seed) {
  auto rng = make_rng(seed, Stream::Alpha);
  return std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
}

double episode_phase(const SubjectProfile& p, std::uint64_t seed, std::size_t episode) {
  if (p.phase_jitter == 0.0) return 0.0;
  auto rng = make_rng(seed, Stream::Jitter, episode);
  return p.phase_jitter * std::normal_distribution<double>(0.0, 1.0)(rng);
}

void check_targets(const AttentionTimeline& timeline, const StimulusSet& stimuli) {
  for (const auto& e : timeline.entries())
    if (e.target && !stimuli.contains(*e.target))
      throw InvalidArgument("attention timeline references unknown stimulus " +
                            std::to_string(*e.target));
}

// Background (pink + alpha) for samples [start, start + n).
Signal background(const SubjectProfile& p, std::uint64_t seed, Eigen::Index start, Eigen::Index n,
                  double fs) {
  Signal out = Signal::Zero(n);
  if (p.noise_scale > 0.0) {
    Eigen::Index done = 0;
    while (done < n) {
      const Eigen::Index abs = start + done;
      const Eigen::Index block = abs / kBackgroundBlock;
      const Eigen::Index offset = abs % kBackgroundBlock;
      const Eigen::Index take = std::min(n - done, kBackgroundBlock - offset);
      const Signal noise = pink_noise(block_seed(seed, static_cast<std::uint64_t>(block)),
                                      kBackgroundBlock, p.pink_exponent, fs);
      out.segment(done, take) = p.noise_scale * noise.segment(offset, take);
      done += take;
    }
  }
  if (p.alpha_amplitude > 0.0) {
    const double phi = alpha_phase(seed);
    const double w = 2.0 * std::numbers::pi * kAlphaHz;
    for (Eigen::Index i = 0; i < n; ++i)
      out[i] += p.alpha_amplitude * std::sin(w * static_cast<double>(start + i) / fs + phi);
  }
  return out;
}

// Adds the SSVEP of every attention episode overlapping [start, start + n).
void add_ssvep(Signal& out, const SubjectProfile& p, const StimulusSet& stimuli,
               const AttentionTimeline& timeline, std::uint64_t seed, Eigen::Index start,
               double fs) {
  const auto& entries = timeline.entries();
  const Eigen::Index end = start + out.size();
  for (std::size_t j = 0; j < entries.size(); ++j) {
    if (!entries[j].target) continue;
    const Eigen::Index seg_begin =
        first_index_at_or_after(entries[j].start_s + p.attention_latency, fs);
    const Eigen::Index seg_end =
        j + 1 < entries.size()
            ? first_index_at_or_after(entries[j + 1].start_s + p.attention_latency, fs)
            : end;
    const Eigen::Index lo = std::max(seg_begin, start);
    const Eigen::Index hi = std::min(seg_end, end);
    if (hi <= lo) continue;
    out.segment(lo - start, hi - lo) +=
        ssvep_component(stimuli[*entries[j].target].frequency_hz,
                        p.stimulus_gains[*entries[j].target] * p.harmonic_gains,
                        episode_phase(p, seed, j), static_cast<double>(lo) / fs, hi - lo, fs);
  }
}

}  // namespace

void SubjectProfile::validate(bool allow_noiseless) const {
  const auto finite = [](double v) { return std::isfinite(v); };
  if (!harmonic_gains.allFinite() || (harmonic_gains.array() < 0.0).any())
    throw InvalidArgument("harmonic_gains must be finite and non-negative");
  if (!(harmonic_gains[0] >= harmonic_gains[1] && harmonic_gains[1] >= harmonic_gains[2]))
    throw InvalidArgument("harmonic_gains must not increase with harmonic order");
  if (!finite(noise_scale) || noise_scale < 0.0)
    throw InvalidArgument("noise_scale must be finite and non-negative");
  if (noise_scale == 0.0 && !allow_noiseless)
    throw InvalidArgument("noise_scale must be positive outside noiseless test profiles");
  if (!finite(pink_exponent) || pink_exponent < 0.5 || pink_exponent > 1.5)
    throw InvalidArgument("pink_exponent must lie in [0.5, 1.5]");
  if (!finite(alpha_amplitude) || alpha_amplitude < 0.0)
    throw InvalidArgument("alpha_amplitude must be finite and non-negative");
  if (!finite(attention_latency) || attention_latency < 0.0)
    throw InvalidArgument("attention_latency must be finite and >= 0");
  if (!finite(phase_jitter) || phase_jitter < 0.0)
    throw InvalidArgument("phase_jitter must be finite and >= 0");
  if (!stimulus_gains.allFinite() || (stimulus_gains.array() < 0.0).any())
    throw InvalidArgument("stimulus_gains must be finite and non-negative");
}

// Preset gains frozen from `ssvep calibrate-presets` (see data/presets.json).
SubjectProfile SubjectProfile::experienced() {
  SubjectProfile p;
  p.name = "experienced";
  p.harmonic_gains = Eigen::Vector3d(0.9, 0.45, 0.225);
  p.stimulus_gains = Eigen::Vector4d(1.0, 1.0, 1.0, 3.5);
  p.noise_scale = 10.0;
  p.pink_exponent = 1.0;
  p.alpha_amplitude = 4.0;
  return p;
}

SubjectProfile SubjectProfile::naive() {
  SubjectProfile p = experienced();
  p.name = "naive";
  p.harmonic_gains = Eigen::Vector3d(0.6, 0.3, 0.15);
  return p;
}

SubjectProfile SubjectProfile::noiseless_ideal() {
  SubjectProfile p;
  p.name = "noiseless";
  p.harmonic_gains = Eigen::Vector3d(4.0, 2.0, 1.0);
  p.noise_scale = 0.0;
  p.alpha_amplitude = 0.0;
  return p;
}

AttentionTimeline::AttentionTimeline(std::optional<ClassId> initial) : entries_{{0.0, initial}} {}

AttentionTimeline::AttentionTimeline(std::vector<Entry> entries) : entries_(std::move(entries)) {
  if (entries_.empty() || entries_.front().start_s != 0.0)
    throw InvalidArgument("attention timeline must start at t = 0");
  for (std::size_t i = 1; i < entries_.size(); ++i)
    if (!(entries_[i].start_s > entries_[i - 1].start_s))
      throw InvalidArgument("attention timeline start times must be strictly increasing");
}

void AttentionTimeline::switch_to(double start_s, std::optional<ClassId> target) {
  if (!(start_s > entries_.back().start_s))
    throw InvalidArgument("attention switch must come after the previous one");
  entries_.push_back({start_s, target});
}

std::optional<ClassId> AttentionTimeline::target_at(double t) const {
  std::optional<ClassId> current;
  for (const auto& e : entries_) {
    if (e.start_s > t) break;
    current = e.target;
  }
  return current;
}

Signal pink_noise(std::uint64_t seed, Eigen::Index n, double exponent, double fs) {
  if (n < 1) throw InvalidArgument("pink_noise needs n >= 1");
  if (!std::isfinite(exponent)) throw InvalidArgument("pink_noise exponent must be finite");
  if (!(fs > 0.0)) throw InvalidArgument("sampling rate must be positive");

  auto rng = make_rng(seed, Stream::White);
  std::normal_distribution<double> normal(0.0, 1.0);
  Signal white(n);
  for (Eigen::Index i = 0; i < n; ++i) white[i] = normal(rng);

  Eigen::FFT<double> fft;
  Eigen::VectorXcd spectrum;
  fft.fwd(spectrum, white);
  spectrum[0] = 0.0;
  for (Eigen::Index k = 1; k < n; ++k) {
    const double f = static_cast<double>(std::min(k, n - k)) * fs / static_cast<double>(n);
    spectrum[k] *= std::pow(f, -0.5 * exponent);
  }
  Signal out;
  fft.inv(out, spectrum);
  out.array() -= out.mean();
  const double rms = std::sqrt(out.squaredNorm() / static_cast<double>(n));
  if (rms > 0.0) out /= rms;
  return out;
}

Signal ssvep_component(double base_freq, const Eigen::Vector3d& gains, double phase, double t0,
                       Eigen::Index n, double fs) {
  if (!(base_freq > 0.0)) throw InvalidArgument("base frequency must be positive");
  if (3.0 * base_freq >= fs / 2.0)
    throw AliasingError(fmt::format("3rd harmonic {} Hz is at or above Nyquist {} Hz",
                                    3.0 * base_freq, fs / 2.0));
  if (n < 0) throw InvalidArgument("negative sample count");
  Signal out = Signal::Zero(n);
  for (int h = 0; h < 3; ++h) {
    if (gains[h] == 0.0) continue;
    const double w = 2.0 * std::numbers::pi * (h + 1) * base_freq;
    for (Eigen::Index i = 0; i < n; ++i)
      out[i] += gains[h] * std::sin(w * (t0 + static_cast<double>(i) / fs) + phase);
  }
  return out;
}

Signal generate(const SubjectProfile& profile, const AttentionTimeline& timeline, double duration_s,
                std::uint64_t seed, const StimulusSet& stimuli, double fs) {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s))
    throw InvalidArgument("duration must be positive");
  profile.validate(true);
  check_targets(timeline, stimuli);
  const auto n = static_cast<Eigen::Index>(std::llround(duration_s * fs));
  Signal out = background(profile, seed, 0, n, fs);
  add_ssvep(out, profile, stimuli, timeline, seed, 0, fs);
  return out;
}

SignalSource::SignalSource(SubjectProfile profile, StimulusSet stimuli, std::uint64_t seed,
                           double capacity_s, double fs)
    : profile_(std::move(profile)), stimuli_(stimuli), seed_(seed), fs_(fs) {
  profile_.validate(true);
  const auto n = static_cast<Eigen::Index>(std::llround(capacity_s * fs));
  background_ = background(profile_, seed_, 0, std::max<Eigen::Index>(n, 1), fs_);
}

void SignalSource::attend(std::optional<ClassId> target) {
  if (target && !stimuli_.contains(*target))
    throw InvalidArgument("attend: unknown stimulus " + std::to_string(*target));
  if (timeline_.entries().back().target == target) return;
  const double now = time();
  if (now > timeline_.entries().back().start_s) {
    timeline_.switch_to(now, target);
  } else {
    // Re-decided at the same instant: keep only the latest choice.
    auto entries = timeline_.entries();
    entries.back().target = target;
    timeline_ = AttentionTimeline(std::move(entries));
  }
}

Signal SignalSource::next(Eigen::Index n) {
  Signal out(n);
  const Eigen::Index have = std::max<Eigen::Index>(0, std::min(n, background_.size() - position_));
  if (have > 0) out.head(have) = background_.segment(position_, have);
  if (have < n) out.tail(n - have) = background(profile_, seed_, position_ + have, n - have, fs_);
  add_ssvep(out, profile_, stimuli_, timeline_, seed_, position_, fs_);
  position_ += n;
  return out;
}

void write_signal_csv(const std::string& path, const Signal& x) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot open " + path);
  f << "uv\n";
  for (Eigen::Index i = 0; i < x.size(); ++i) f << fmt::format("{:.6f}\n", x[i]);
}

}  // namespace ssvep
