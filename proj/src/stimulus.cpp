#include "ssvep/stimulus.hpp"

#include <algorithm>
#include <cmath>

#include "ssvep/errors.hpp"

namespace ssvep {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::NavLeft: return "LEFT";
    case Role::NavForward: return "FORWARD";
    case Role::NavRight: return "RIGHT";
    case Role::Toggle: return "TOGGLE";
  }
  return "?";
}

StimulusSet::StimulusSet()
    : StimulusSet({{{0, 12.0, Role::NavLeft},
                    {1, 15.0, Role::NavForward},
                    {2, 20.0, Role::NavRight},
                    {3, 8.0, Role::Toggle}}}) {}

StimulusSet::StimulusSet(const std::array<Stimulus, kSize>& entries) : entries_(entries) {
  int toggles = 0;
  for (int i = 0; i < kSize; ++i) {
    const auto& s = entries_[i];
    if (s.id != i) throw InvalidArgument("stimulus ids must be 0..3 in order");
    if (!(std::isfinite(s.frequency_hz) && s.frequency_hz > 0.0))
      throw InvalidArgument("stimulus frequency must be positive");
    for (int j = 0; j < i; ++j)
      if (entries_[j].frequency_hz == s.frequency_hz)
        throw InvalidArgument("stimulus frequencies must be pairwise distinct");
    if (s.role == Role::Toggle) {
      ++toggles;
      toggle_ = i;
    }
  }
  if (toggles != 1) throw InvalidArgument("exactly one stimulus must be the toggle");
  for (Role r : {Role::NavLeft, Role::NavForward, Role::NavRight})
    if (std::none_of(entries_.begin(), entries_.end(), [r](const Stimulus& s) { return s.role == r; }))
      throw InvalidArgument("every navigation role needs a stimulus");
}

const Stimulus& StimulusSet::operator[](ClassId id) const {
  if (!contains(id)) throw InvalidArgument("unknown stimulus class " + std::to_string(id));
  return entries_[static_cast<std::size_t>(id)];
}

ClassId StimulusSet::by_role(Role role) const {
  for (const auto& s : entries_)
    if (s.role == role) return s.id;
  throw InvalidArgument("no stimulus with that role");
}

std::optional<ClassId> StimulusSet::find_frequency(double hz) const {
  for (const auto& s : entries_)
    if (std::abs(s.frequency_hz - hz) < 1e-9) return s.id;
  return std::nullopt;
}

double StimulusSet::max_frequency() const {
  double m = 0.0;
  for (const auto& s : entries_) m = std::max(m, s.frequency_hz);
  return m;
}

}  // namespace ssvep
