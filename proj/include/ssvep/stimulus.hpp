#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace ssvep {

enum class Role { NavLeft, NavForward, NavRight, Toggle };

using ClassId = int;

struct Stimulus {
  ClassId id;
  double frequency_hz;
  Role role;
};

std::string_view to_string(Role role);

/// The four flickering targets: three navigation commands and the on/off
/// toggle. Class ids are the indices 0..3.
///
/// Known overlap: with the default frequencies, 12 Hz x 2 and 8 Hz x 3 share
/// the 24 Hz bin. Both classes see that bin; nothing is reassigned.
class StimulusSet {
 public:
  static constexpr int kSize = 4;

  /// LEFT 12 Hz, FORWARD 15 Hz, RIGHT 20 Hz, TOGGLE 8 Hz.
  StimulusSet();
  /// Throws InvalidArgument unless frequencies are distinct and positive and
  /// exactly one entry is the toggle.
  explicit StimulusSet(const std::array<Stimulus, kSize>& entries);

  const Stimulus& operator[](ClassId id) const;
  const std::array<Stimulus, kSize>& entries() const { return entries_; }
  ClassId toggle() const { return toggle_; }
  ClassId by_role(Role role) const;
  bool contains(ClassId id) const { return id >= 0 && id < kSize; }
  std::optional<ClassId> find_frequency(double hz) const;
  double max_frequency() const;

 private:
  std::array<Stimulus, kSize> entries_;
  ClassId toggle_ = 3;
};

}  // namespace ssvep
