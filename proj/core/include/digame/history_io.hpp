#pragma once

#include "digame/dynamics.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace digame {

// CSV with header `t,phi_0..phi_{m-1},u_0..u_{d-1},uo_0..uo_{d-1}` and
// every value printed with 17 significant digits.
std::string history_to_csv(const History& history);
// Throws ParseError with the 1-based line number of the offending row.
History history_from_csv(std::string_view text);

void save_history(const History& history, const std::filesystem::path& path);
History load_history(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

std::string format_double(double x);

}  // namespace digame
