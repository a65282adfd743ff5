#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "ssvep/dsp.hpp"
#include "ssvep/errors.hpp"

using namespace ssvep;

namespace {

double db(double gain) { return 20 * std::log10(gain); }

// Steady-state amplitude of a unit sinusoid after `stage`, from the last 2 s of 10 s.
template <typename Stage>
double measured_gain(double freq, Stage stage) {
  const Signal y = stage(oracle::sine(freq, 256, 2560));
  return oracle::tone_amplitude(y, freq, 256, 512);
}

const PipelineConfig kCfg;

}  // namespace

TEST_CASE("band-pass meets its frequency-response bounds") {
  const auto bp = [](const Signal& x) { return bandpass(x, kCfg); };
  const auto design = design_bandpass(kCfg);
  CHECK(db(design.magnitude(0.5, 256)) <= -3.0);
  CHECK(db(design.magnitude(100, 256)) <= -3.0);
  for (double f = 10; f <= 40; f += 1) CHECK(db(measured_gain(f, bp)) >= -1.0);
  CHECK(db(design.magnitude(0.0, 256)) <= -20.0);
  CHECK(db(design.magnitude(0.05, 256)) <= -20.0);

  const double g15 = measured_gain(15, bp);
  CHECK(g15 >= 0.89);
  CHECK(g15 <= 1.0);
  CHECK(g15 == doctest::Approx(design.magnitude(15, 256)).epsilon(1e-3));
  CHECK(measured_gain(120, bp) < 0.2);
}

TEST_CASE("band-pass rejects DC") {
  const Signal y = bandpass(Signal::Ones(256 * 6), kCfg);
  CHECK(y.tail(256 * 4).cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("notch removes 50 Hz and keeps its neighbours") {
  const auto nf = [](const Signal& x) { return notch(x, kCfg); };
  CHECK(measured_gain(50, nf) < 0.032);
  CHECK(db(measured_gain(45, nf)) >= -3.0);
  CHECK(db(measured_gain(55, nf)) >= -3.0);
  CHECK(measured_gain(15, nf) >= 0.95);
  CHECK(db(design_notch(kCfg).magnitude(50, 256)) <= -30.0);
  CHECK(notch(Signal::Zero(300), kCfg).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("whole chain: 30 dB at 50 Hz, -1 dB at 15 Hz, -20 dB at DC") {
  const auto chain = [](const Signal& x) {
    Signal y = x;
    design_chain(kCfg).process_inplace(y);
    return y;
  };
  CHECK(db(measured_gain(50, chain)) <= -30.0);
  CHECK(db(measured_gain(15, chain)) >= -1.0);
  const Signal dc = chain(Signal::Ones(2560));
  CHECK(db(dc.tail(512).cwiseAbs().maxCoeff()) <= -20.0);
  CHECK(measured_gain(60, chain) > 0.8);
}

TEST_CASE("filters are stable and finite") {
  Signal impulse = Signal::Zero(256 * 20);
  impulse[0] = 1.0;
  Signal h = impulse;
  design_chain(kCfg).process_inplace(h);
  CHECK(std::isfinite(h.squaredNorm()));
  CHECK(h.tail(256).cwiseAbs().maxCoeff() < 1e-3);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  Signal x(4096);
  for (auto& v : x) v = u(rng);
  design_chain(kCfg).process_inplace(x);
  CHECK(x.allFinite());
  CHECK_THROWS_AS(bandpass(Signal(0), kCfg), InvalidArgument);
  CHECK_THROWS_AS(notch(Signal(0), kCfg), InvalidArgument);
}

TEST_CASE("biquads work in single precision") {
  auto cd = design_chain(kCfg);
  BiquadCascade<float> cf([&] {
    std::vector<Biquad<float>> s;
    s.push_back(Biquad<float>::highpass(0.5f, 256.f, 0.70710678f));
    s.push_back(Biquad<float>::lowpass(100.f, 256.f, 0.70710678f));
    s.push_back(Biquad<float>::notch(50.f, 256.f, 10.f));
    return s;
  }());
  for (double f : {1.0, 15.0, 50.0, 90.0})
    CHECK(cf.magnitude(static_cast<float>(f), 256.f) == doctest::Approx(cd.magnitude(f, 256)).epsilon(1e-4));
  Eigen::VectorXf x = oracle::sine(15, 256, 1024).cast<float>();
  cf.process_inplace(x);
  CHECK(x.allFinite());
}

TEST_CASE("Goertzel closed-form cases") {
  Signal c(256);
  for (int i = 0; i < 256; ++i) c[i] = std::cos(2 * oracle::kPi * 12 * i / 256.0);
  CHECK(goertzel(c, 12, 256) == doctest::Approx(128).epsilon(1e-12));
  CHECK(goertzel(c, 13, 256) < 1e-9);
  CHECK_THROWS_AS(goertzel(c, 12.5, 256), InvalidArgument);
}

TEST_CASE("Goertzel equals a direct DFT on random windows") {
  const StimulusSet stim;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n(0, 10);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Signal w(256);
    for (auto& v : w) v = n(rng);
    for (const auto& s : stim.entries())
      for (int h = 1; h <= 3; ++h) {
        const double ref = oracle::dft_bin(w, std::lround(h * s.frequency_hz));
        worst = std::max(worst, std::abs(goertzel(w, h * s.frequency_hz, 256) - ref) / ref);
      }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("feature count and timestamps") {
  const auto fv = extract_features(Signal::Zero(512), {}, kCfg);
  REQUIRE(fv.size() == 17);
  for (std::size_t i = 0; i < fv.size(); ++i) CHECK(fv[i].timestamp == 1.0 + 0.0625 * i);
  CHECK(extract_features(Signal::Zero(255), {}, kCfg).empty());
}

TEST_CASE("pure 12 Hz tone: the 12 Hz base magnitude is the largest entry") {
  const auto fv = extract_features(oracle::sine(12, 256, 1024, 3.0, 0.3), {}, kCfg);
  for (const auto& f : fv) {
    Eigen::Index r, c;
    f.magnitudes.maxCoeff(&r, &c);
    CHECK(r == 0);
    CHECK(c == 0);
  }
}

TEST_CASE("features are linear in the input magnitude") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  Signal x(700);
  for (auto& v : x) v = n(rng);
  const auto a = extract_features(x, {}, kCfg);
  const auto b = extract_features(-2.5 * x, {}, kCfg);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK((b[i].magnitudes - 2.5 * a[i].magnitudes).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("streaming extractor equals the batch extractor for any chunking") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n;
  Signal x(2000);
  for (auto& v : x) v = n(rng);
  const auto batch = extract_features(x, {}, kCfg);
  FeatureExtractor ex({}, kCfg);
  std::vector<FeatureVector> streamed;
  std::uniform_int_distribution<int> len(1, 70);
  for (Eigen::Index pos = 0; pos < x.size();) {
    const Eigen::Index k = std::min<Eigen::Index>(len(rng), x.size() - pos);
    for (auto& f : ex.push(x.segment(pos, k))) streamed.push_back(f);
    pos += k;
  }
  REQUIRE(streamed.size() == batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(streamed[i].timestamp == batch[i].timestamp);
    CHECK((streamed[i].magnitudes - batch[i].magnitudes).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("pipeline config checks bin alignment and bands") {
  CHECK_NOTHROW(kCfg.validate());
  const StimulusSet stim;
  for (const auto& s : stim.entries())
    for (int h = 1; h <= 3; ++h) {
      const double bin = h * s.frequency_hz * kCfg.window_len / kCfg.fs;
      CHECK(bin == std::round(bin));
    }

  PipelineConfig c = kCfg;
  c.window_len = 200;
  c.hop = 20;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = kCfg;
  c.hop = 17;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("pipeline.window_len"), ConfigError);
  c = kCfg;
  c.band_high = 130;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("pipeline.band_high"), ConfigError);
  c = kCfg;
  c.fs = 100;
  c.window_len = 100;
  c.hop = 10;
  c.band_high = 40;
  c.notch_freq = 45;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("aliases"), ConfigError);
}
