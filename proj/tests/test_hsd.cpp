#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "ssvep/dsp.hpp"
#include "ssvep/errors.hpp"
#include "ssvep/hsd.hpp"
#include "ssvep/signal_model.hpp"

using namespace ssvep;

namespace {

constexpr double kHop = 0.0625;
const StimulusSet kStim;

CalibrationModel unit_calibration() {
  return {Eigen::VectorXd::Ones(4), Eigen::VectorXd::Constant(4, 0.1)};
}

// Vector i (0-based) stamped (i+1)*hop; `winner` gets the strictly largest sum.
FeatureVector vec(long i, int winner, double level = 2.0) {
  FeatureVector f;
  f.timestamp = (i + 1) * kHop;
  f.magnitudes = HarmonicMagnitudes::Constant(4, 3, 1.0 / 3);
  if (winner >= 0) f.magnitudes.row(winner).setConstant(level / 3);
  return f;
}

std::vector<std::pair<long, int>> run(HsdClassifier& c, const std::vector<int>& winners, bool control) {
  std::vector<std::pair<long, int>> out;
  const auto gate = gate_for(control);
  for (long i = 0; i < static_cast<long>(winners.size()); ++i)
    if (auto d = c.step(vec(i, winners[i]), gate)) {
      CHECK(d->timestamp == doctest::Approx((i + 1) * kHop));
      out.emplace_back(i, d->cls);
    }
  return out;
}

std::vector<int> random_winners(std::mt19937_64& rng, long n, bool control) {
  std::uniform_real_distribution<double> u;
  std::uniform_int_distribution<int> pick(control ? -1 : 0, control ? 3 : 1);
  std::vector<int> w(n);
  int cur = -1;
  for (auto& v : w) {
    if (u(rng) < 0.08) {
      cur = pick(rng);
      if (!control) cur = cur == 1 ? 3 : -1;
    }
    v = cur;
  }
  return w;
}

}  // namespace

TEST_CASE("calibrate on constant features") {
  std::vector<FeatureVector> fv;
  for (int i = 0; i < 60 * 16; ++i) {
    FeatureVector f;
    f.timestamp = 1.0 + i * kHop;
    f.magnitudes = HarmonicMagnitudes::Constant(4, 3, 1.0);
    f.magnitudes.row(3) << 2.0, 1.5, 0.5;
    fv.push_back(f);
  }
  const auto m = calibrate(fv, kStim);
  CHECK(m.baseline_mean[3] == 4.0);
  CHECK(m.baseline_std[3] == 0.0);
  CHECK(m.baseline_mean[0] == 3.0);

  const std::vector<FeatureVector> half(fv.begin(), fv.begin() + 30 * 16);
  CHECK_THROWS_AS(calibrate(half, kStim), CalibrationError);
  CHECK_THROWS_AS(calibrate({}, kStim), CalibrationError);
}

TEST_CASE("calibration on 60 s of pink noise has positive baselines") {
  PipelineConfig cfg;
  SubjectProfile p = SubjectProfile::experienced();
  p.alpha_amplitude = 0;
  Signal x = generate(p, AttentionTimeline(), 61.0, 3);
  design_chain(cfg).process_inplace(x);
  const auto m = calibrate(extract_features(x, kStim, cfg), kStim);
  for (int c = 0; c < 4; ++c) {
    CHECK(m.baseline_mean[c] > 0);
    CHECK(m.baseline_std[c] > 0);
  }
}

TEST_CASE("harmonic sums") {
  FeatureVector f;
  f.magnitudes = HarmonicMagnitudes::Zero(4, 3);
  f.magnitudes.row(2) << 3, 2, 1;
  CHECK(harmonic_sum(f, 2) == 6.0);
  CHECK(harmonic_sum(f, 0) == 0.0);
  CHECK_THROWS_AS(harmonic_sum(f, 4), InvalidArgument);
  CHECK_THROWS_AS(harmonic_sum(f, -1), InvalidArgument);

  CalibrationModel c{Eigen::Vector4d(1, 1, 3, 1), Eigen::Vector4d::Zero()};
  CHECK(normalized_sum(f, 2, c) == 2.0);
  c.baseline_mean[2] = 6.0;
  CHECK(normalized_sum(f, 2, c) == 1.0);
  c.baseline_mean[2] = 0.0;
  CHECK_THROWS_AS(normalized_sum(f, 2, c), CalibrationError);
}

TEST_CASE("harmonic sum of a raw window matches the DFT oracle") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 3);
  Signal w(256);
  for (auto& v : w) v = n(rng);
  const auto f = extract_features(w, kStim, PipelineConfig{}).front();
  for (const auto& s : kStim.entries()) {
    const double ref = oracle::dft_bin(w, std::lround(s.frequency_hz)) +
                       oracle::dft_bin(w, std::lround(2 * s.frequency_hz)) +
                       oracle::dft_bin(w, std::lround(3 * s.frequency_hz));
    CHECK(harmonic_sum(f, s.id) == doctest::Approx(ref).epsilon(1e-9));
  }
}

TEST_CASE("noiseless attended 12 Hz wins the normalized comparison in every window") {
  PipelineConfig cfg;
  Signal rest = generate(SubjectProfile::experienced(), AttentionTimeline(), 61.0, 8);
  design_chain(cfg).process_inplace(rest);
  const auto calib = calibrate(extract_features(rest, kStim, cfg), kStim);

  Signal x = generate(SubjectProfile::noiseless_ideal(), AttentionTimeline(0), 6.0, 1);
  design_chain(cfg).process_inplace(x);
  for (const auto& f : extract_features(x.tail(256 * 4), kStim, cfg))
    for (int c : {1, 2, 3}) CHECK(normalized_sum(f, 0, calib) > normalized_sum(f, c, calib));
}

TEST_CASE("gate_for") {
  CHECK(gate_for(true).active.count() == 4);
  CHECK(gate_for(false).active.count() == 1);
  CHECK(gate_for(false).is_active(kStim.toggle()));
}

TEST_CASE("dwell: 16 consecutive winning vectors give the first decision at 1.0 s") {
  HsdClassifier c(kStim, unit_calibration(), {}, kHop);
  const auto d = run(c, std::vector<int>(40, 1), true);
  REQUIRE(!d.empty());
  CHECK(d.front() == std::pair<long, int>{15, 1});
}

TEST_CASE("dwell: dominance broken at vector 10 restarts the count") {
  std::vector<int> w(40, 1);
  w[9] = -1;
  HsdClassifier c(kStim, unit_calibration(), {}, kHop);
  const auto d = run(c, w, true);
  REQUIRE(!d.empty());
  CHECK(d.front().first == 9 + 16);
}

TEST_CASE("toggle needs 1.5 s and nav decisions are spaced by dwell + refractory") {
  HsdClassifier c(kStim, unit_calibration(), {}, kHop);
  const auto d = run(c, std::vector<int>(200, 3), true);
  REQUIRE(d.size() >= 2);
  CHECK(d[0].first == 23);
  CHECK(d[1].first - d[0].first == 24 + 48);

  HsdClassifier n(kStim, unit_calibration(), {}, kHop);
  const auto e = run(n, std::vector<int>(200, 2), true);
  REQUIRE(e.size() >= 2);
  CHECK(e[1].first - e[0].first == 16 + 48);
}

TEST_CASE("step equals the span-scanning oracle on random winner sequences") {
  std::mt19937_64 rng(77);
  int mismatches = 0, decisions = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const bool control = trial % 4 != 0;
    const auto w = random_winners(rng, 300, control);
    HsdClassifier c(kStim, unit_calibration(), {}, kHop);
    const auto got = run(c, w, control);
    const auto want = oracle::dwell_decisions(w, {16, 16, 16, 24}, 48);
    decisions += static_cast<int>(want.size());
    if (got != want) ++mismatches;
  }
  CHECK(mismatches == 0);
  CHECK(decisions > 1000);
}

TEST_CASE("decision rates stay under the dwell + refractory bound") {
  std::mt19937_64 rng(78);
  for (int trial = 0; trial < 200; ++trial) {
    const auto w = random_winners(rng, 16 * 600, true);
    HsdClassifier c(kStim, unit_calibration(), {}, kHop);
    const auto d = run(c, w, true);
    for (std::size_t i = 1; i < d.size(); ++i) {
      const long need = d[i].second == 3 ? 24 + 48 : 16 + 48;
      CHECK(d[i].first - d[i - 1].first >= need);
    }
    // 600 s run: at most 10 min * 15/min
    CHECK(d.size() <= 150);
  }
}

TEST_CASE("common scaling of all features leaves control decisions unchanged") {
  std::mt19937_64 rng(79);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::uniform_int_distribution<int> boost(0, 3);
  const CalibrationModel calib{Eigen::Vector4d(1.0, 1.3, 0.8, 1.1), Eigen::Vector4d::Constant(0.2)};
  HsdClassifier a(kStim, calib, {}, kHop), b(kStim, calib, {}, kHop);
  int decisions = 0, cur = 0;
  for (long i = 0; i < 16 * 300; ++i) {
    if (i % 40 == 0) cur = boost(rng);
    FeatureVector f;
    f.timestamp = (i + 1) * kHop;
    f.magnitudes = HarmonicMagnitudes::NullaryExpr(4, 3, [&] { return u(rng); });
    f.magnitudes.row(cur) *= 2.0;
    FeatureVector g = f;
    g.magnitudes *= 37.5;
    const auto da = a.step(f, gate_for(true));
    const auto db = b.step(g, gate_for(true));
    CHECK(da == db);
    decisions += da.has_value();
  }
  CHECK(decisions > 10);
}

TEST_CASE("gate change restarts dwell counting, refractory survives it") {
  HsdClassifier c(kStim, unit_calibration(), {}, kHop);
  long i = 0;
  for (; i < 10; ++i) CHECK_FALSE(c.step(vec(i, 3), gate_for(true)));
  std::optional<Decision> d;
  long at = 0;
  for (; i < 100 && !d; ++i) {
    d = c.step(vec(i, 3), gate_for(false));
    at = i;
  }
  REQUIRE(d);
  CHECK(at == 10 + 23);

  // Straight after a decision the gate flips back; nothing may fire during refractory.
  for (long j = at + 1; j <= at + 48; ++j) CHECK_FALSE(c.step(vec(j, 1), gate_for(true)));
  std::optional<Decision> next;
  long k = at + 49;
  for (; k < at + 200 && !next; ++k) next = c.step(vec(k, 1), gate_for(true));
  REQUIRE(next);
  CHECK(next->timestamp - d->timestamp == doctest::Approx(1.0 + 3.0));
}

TEST_CASE("no-control toggle uses the calibrated threshold") {
  const CalibrationModel calib{Eigen::Vector4d::Ones(), Eigen::Vector4d(0.1, 0.1, 0.1, 0.2)};
  HsdClassifier c(kStim, calib, {}, kHop);
  CHECK(c.toggle_threshold() == doctest::Approx(1.6));
  CHECK_FALSE(c.winner(vec(0, 3, 1.59), gate_for(false)));
  CHECK(c.winner(vec(0, 3, 1.61), gate_for(false)) == 3);
  // Navigation classes never win with detectors off, however strong.
  CHECK_FALSE(c.winner(vec(0, 1, 50.0), gate_for(false)));
  // Ties give no winner in control state.
  CHECK_FALSE(c.winner(vec(0, -1), gate_for(true)));
}

TEST_CASE("missing class in the feature vector is an invalid argument") {
  HsdClassifier c(kStim, unit_calibration(), {}, kHop);
  FeatureVector f;
  f.timestamp = kHop;
  f.magnitudes = HarmonicMagnitudes::Ones(2, 3);
  CHECK_THROWS_AS(c.step(f, gate_for(true)), InvalidArgument);
}

TEST_CASE("false toggles in no-control fall as k rises") {
  PipelineConfig cfg;
  const SubjectProfile p = SubjectProfile::experienced();
  std::vector<double> rate;
  for (double k : {1.0, 2.0, 3.0}) {
    int count = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Signal x = generate(p, AttentionTimeline(), 121.0, seed);
      design_chain(cfg).process_inplace(x);
      const auto fv = extract_features(x, kStim, cfg);
      const std::vector<FeatureVector> rest(fv.begin(), fv.begin() + 60 * 16);
      ClassifierConfig cc;
      cc.toggle_threshold_k = k;
      HsdClassifier c(kStim, calibrate(rest, kStim), cc, kHop);
      for (auto it = fv.begin() + 60 * 16; it != fv.end(); ++it) count += c.step(*it, gate_for(false)).has_value();
    }
    rate.push_back(count / 10.0);
  }
  CHECK(rate[0] > rate[1]);
  CHECK(rate[1] >= rate[2]);
}

TEST_CASE("classifier config validation and decision log") {
  ClassifierConfig cc;
  cc.refractory = 0;
  CHECK_THROWS_WITH_AS(cc.validate(), doctest::Contains("classifier.refractory"), ConfigError);

  const auto path = std::filesystem::temp_directory_path() / "ssvep_decisions.csv";
  write_decision_log(path.string(), {{{1, 32.5, DecisionKind::Nav}, true}, {{3, 40.0, DecisionKind::Toggle}, false}});
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "timestamp_s,class_id,kind,gate_state");
  std::getline(in, line);
  CHECK(line.find(",1,NAV,") != std::string::npos);
}
