#pragma once

#include <Eigen/Core>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "ssvep/errors.hpp"
#include "ssvep/signal_model.hpp"
#include "ssvep/stimulus.hpp"

namespace ssvep {

/// Acquisition and feature-window parameters.
struct PipelineConfig {
  double fs = kDefaultFs;
  double band_low = 0.5;
  double band_high = 100.0;
  double notch_freq = 50.0;
  double notch_q = 10.0;
  Eigen::Index window_len = 256;
  Eigen::Index hop = 16;

  double hop_s() const { return static_cast<double>(hop) / fs; }
  double window_s() const { return static_cast<double>(window_len) / fs; }

  /// Throws ConfigError listing every violated constraint, including bin
  /// alignment of all three harmonics of every stimulus.
  void validate(const StimulusSet& stimuli = {}) const;
};

/// Second-order IIR section, transposed direct form II, a0 normalized to 1.
template <typename Scalar>
class Biquad {
 public:
  Biquad() = default;
  Biquad(Scalar b0, Scalar b1, Scalar b2, Scalar a1, Scalar a2)
      : b0_(b0), b1_(b1), b2_(b2), a1_(a1), a2_(a2) {}

  Scalar process(Scalar x) {
    const Scalar y = b0_ * x + z1_;
    z1_ = b1_ * x - a1_ * y + z2_;
    z2_ = b2_ * x - a2_ * y;
    return y;
  }

  template <typename Derived>
  void process_inplace(Eigen::DenseBase<Derived>& x) {
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = process(x(i));
  }

  void reset() { z1_ = z2_ = Scalar(0); }

  std::complex<Scalar> response(Scalar freq, Scalar fs) const {
    const std::complex<Scalar> z1 =
        std::polar(Scalar(1), -Scalar(2) * std::numbers::pi_v<Scalar> * freq / fs);
    const std::complex<Scalar> z2 = z1 * z1;
    return (b0_ + b1_ * z1 + b2_ * z2) / (Scalar(1) + a1_ * z1 + a2_ * z2);
  }

  static Biquad lowpass(Scalar f0, Scalar fs, Scalar q) {
    const auto [c, alpha] = prewarp(f0, fs, q);
    return normalized((1 - c) / 2, 1 - c, (1 - c) / 2, 1 + alpha, -2 * c, 1 - alpha);
  }
  static Biquad highpass(Scalar f0, Scalar fs, Scalar q) {
    const auto [c, alpha] = prewarp(f0, fs, q);
    return normalized((1 + c) / 2, -(1 + c), (1 + c) / 2, 1 + alpha, -2 * c, 1 - alpha);
  }
  static Biquad notch(Scalar f0, Scalar fs, Scalar q) {
    const auto [c, alpha] = prewarp(f0, fs, q);
    return normalized(1, -2 * c, 1, 1 + alpha, -2 * c, 1 - alpha);
  }

 private:
  struct Warp {
    Scalar cos_w0, alpha;
  };
  static Warp prewarp(Scalar f0, Scalar fs, Scalar q) {
    const Scalar w0 = Scalar(2) * std::numbers::pi_v<Scalar> * f0 / fs;
    return {std::cos(w0), std::sin(w0) / (Scalar(2) * q)};
  }
  static Biquad normalized(Scalar b0, Scalar b1, Scalar b2, Scalar a0, Scalar a1, Scalar a2) {
    return Biquad(b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0);
  }

  Scalar b0_{1}, b1_{0}, b2_{0}, a1_{0}, a2_{0};
  Scalar z1_{0}, z2_{0};
};

/// Serial chain of biquads; stateful, one writer per instance.
template <typename Scalar>
class BiquadCascade {
 public:
  BiquadCascade() = default;
  explicit BiquadCascade(std::vector<Biquad<Scalar>> sections) : sections_(std::move(sections)) {}

  template <typename Derived>
  void process_inplace(Eigen::DenseBase<Derived>& x) {
    for (auto& s : sections_) s.process_inplace(x);
  }
  template <typename Derived>
  void process_inplace(Eigen::DenseBase<Derived>&& x) {
    process_inplace(x);
  }

  void reset() {
    for (auto& s : sections_) s.reset();
  }

  Scalar magnitude(Scalar freq, Scalar fs) const {
    std::complex<Scalar> h(1);
    for (const auto& s : sections_) h *= s.response(freq, fs);
    return std::abs(h);
  }

  const std::vector<Biquad<Scalar>>& sections() const { return sections_; }

 private:
  std::vector<Biquad<Scalar>> sections_;
};

/// 4th-order band-pass: Butterworth 2nd-order high-pass at band_low followed
/// by Butterworth 2nd-order low-pass at band_high.
BiquadCascade<double> design_bandpass(const PipelineConfig& cfg);
BiquadCascade<double> design_notch(const PipelineConfig& cfg);
/// Band-pass then notch.
BiquadCascade<double> design_chain(const PipelineConfig& cfg);

/// Causal band-pass of a whole signal from rest. Throws on empty input.
Signal bandpass(const Signal& x, const PipelineConfig& cfg);
Signal notch(const Signal& x, const PipelineConfig& cfg);

/// Magnitude of DFT bin k = freq * N / fs of a rectangular window, computed
/// with the Goertzel recurrence. freq must be bin-aligned.
template <typename Derived>
double goertzel(const Eigen::DenseBase<Derived>& window, double freq, double fs) {
  const auto n = window.size();
  const double bin = freq * static_cast<double>(n) / fs;
  const double k = std::round(bin);
  if (n == 0 || std::abs(bin - k) > 1e-9)
    throw InvalidArgument("goertzel: frequency is not bin-aligned for this window");
  const double w = 2.0 * std::numbers::pi * k / static_cast<double>(n);
  const double coeff = 2.0 * std::cos(w);
  double s1 = 0.0;
  double s2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s0 = static_cast<double>(window(i)) + coeff * s1 - s2;
    s2 = s1;
    s1 = s0;
  }
  // X[k] = e^{jw} s1 - s2 (up to a unit-modulus factor)
  const double re = s1 * std::cos(w) - s2;
  const double im = s1 * std::sin(w);
  return std::hypot(re, im);
}

/// Harmonic magnitudes (rows: classes, columns: f, 2f, 3f) of one window.
using HarmonicMagnitudes = Eigen::Matrix<double, Eigen::Dynamic, 3>;

struct FeatureVector {
  double timestamp = 0.0;  ///< right edge of the window, s
  HarmonicMagnitudes magnitudes;

  Eigen::VectorXd harmonic_sums() const { return magnitudes.rowwise().sum(); }
};

template <typename Derived>
HarmonicMagnitudes harmonic_magnitudes(const Eigen::DenseBase<Derived>& window,
                                       const StimulusSet& stimuli, double fs) {
  HarmonicMagnitudes m(StimulusSet::kSize, 3);
  for (const auto& s : stimuli.entries())
    for (int h = 0; h < 3; ++h) m(s.id, h) = goertzel(window, (h + 1) * s.frequency_hz, fs);
  return m;
}

/// Streaming sliding-window feature extractor: one vector every hop samples
/// once a full window is available.
class FeatureExtractor {
 public:
  FeatureExtractor(StimulusSet stimuli, PipelineConfig cfg);

  /// Appends filtered samples; returns the vectors completed by them.
  std::vector<FeatureVector> push(const Eigen::Ref<const Signal>& samples);
  Eigen::Index samples_seen() const { return seen_; }

 private:
  StimulusSet stimuli_;
  PipelineConfig cfg_;
  Signal history_;  // last window_len samples, oldest first
  Eigen::Index seen_ = 0;
};

std::vector<FeatureVector> extract_features(const Signal& stream, const StimulusSet& stimuli,
                                            const PipelineConfig& cfg);

/// timestamp + 12 magnitudes per row.
void write_features_csv(const std::string& path, const std::vector<FeatureVector>& features);

}  // namespace ssvep
