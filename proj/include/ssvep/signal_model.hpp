#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssvep/stimulus.hpp"

namespace ssvep {

template <typename Scalar>
using SignalT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Signal = SignalT<double>;

inline constexpr double kDefaultFs = 256.0;
inline constexpr double kAlphaHz = 10.0;

/// Generative parameters of one simulated subject. Amplitudes in microvolts.
struct SubjectProfile {
  std::string name = "custom";
  Eigen::Vector3d harmonic_gains{0.0, 0.0, 0.0};  ///< SSVEP amplitude at f, 2f, 3f
  double noise_scale = 1.0;                       ///< RMS of the pink background
  double pink_exponent = 1.0;
  double alpha_amplitude = 0.0;
  double attention_latency = 0.5;  ///< s, attention switch -> SSVEP onset/offset
  double phase_jitter = 0.0;       ///< rad, std of per-episode SSVEP phase
  /// Relative response to each stimulus (class id order), multiplying
  /// harmonic_gains. Stimulus placement and motion differ, so real subjects
  /// do not respond equally to all four.
  Eigen::Vector4d stimulus_gains = Eigen::Vector4d::Ones();

  /// Throws InvalidArgument. A zero noise_scale is accepted only when
  /// allow_noiseless is set.
  void validate(bool allow_noiseless = false) const;
  bool noiseless() const { return noise_scale == 0.0; }

  static SubjectProfile experienced();
  static SubjectProfile naive();
  /// Zero background, zero alpha, strong SSVEP. Test profile only.
  static SubjectProfile noiseless_ideal();
};

/// Which stimulus (if any) the subject attends, as a step function of time.
class AttentionTimeline {
 public:
  struct Entry {
    double start_s;
    std::optional<ClassId> target;
  };

  /// Starts with (0, target).
  explicit AttentionTimeline(std::optional<ClassId> initial = std::nullopt);
  /// Throws InvalidArgument unless entries are strictly increasing from 0.
  explicit AttentionTimeline(std::vector<Entry> entries);

  /// Appends a switch. Throws InvalidArgument if start_s is not after the last entry.
  void switch_to(double start_s, std::optional<ClassId> target);
  std::optional<ClassId> target_at(double t) const;
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

/// Zero-mean, unit-RMS noise with PSD proportional to 1/f^exponent, made by
/// shaping the spectrum of seeded white Gaussian noise. Bit-identical per seed.
Signal pink_noise(std::uint64_t seed, Eigen::Index n, double exponent, double fs = kDefaultFs);

/// sum_h gains[h] * sin(2 pi (h+1) f t + phase) for t = t0 + i/fs.
Signal ssvep_component(double base_freq, const Eigen::Vector3d& gains, double phase, double t0,
                       Eigen::Index n, double fs = kDefaultFs);

/// Pink background + alpha + SSVEP of the attended target, with the SSVEP
/// trailing each attention switch by profile.attention_latency.
Signal generate(const SubjectProfile& profile, const AttentionTimeline& timeline, double duration_s,
                std::uint64_t seed, const StimulusSet& stimuli = {}, double fs = kDefaultFs);

/// Streaming form of generate() for closed-loop use: attention is switched at
/// the current stream position, samples are pulled in chunks. Produces the
/// same samples as generate() given the same switches.
class SignalSource {
 public:
  SignalSource(SubjectProfile profile, StimulusSet stimuli, std::uint64_t seed, double capacity_s,
               double fs = kDefaultFs);

  void attend(std::optional<ClassId> target);
  Signal next(Eigen::Index n);

  double time() const { return static_cast<double>(position_) / fs_; }
  Eigen::Index position() const { return position_; }
  const AttentionTimeline& timeline() const { return timeline_; }

 private:
  SubjectProfile profile_;
  StimulusSet stimuli_;
  std::uint64_t seed_;
  double fs_;
  Signal background_;
  AttentionTimeline timeline_;
  Eigen::Index position_ = 0;
};

/// Single-column CSV with header "uv".
void write_signal_csv(const std::string& path, const Signal& x);

}  // namespace ssvep
