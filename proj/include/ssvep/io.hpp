#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ssvep/evaluation.hpp"
#include "ssvep/task.hpp"

namespace ssvep {

/// Full run event log, one row per TaskEvent. Doubles are written in
/// shortest round-trip form so parse_event_log reproduces the log exactly.
std::string event_log_to_csv(const std::vector<TaskEvent>& log);
/// Throws ParseError on malformed rows.
std::vector<TaskEvent> parse_event_log(const std::string& csv);

void write_text(const std::string& path, std::string_view text);
std::string read_text(const std::string& path);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string digest(std::string_view text);

}  // namespace ssvep
