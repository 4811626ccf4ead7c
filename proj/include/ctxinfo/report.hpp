// Text table and SVG grouped bar chart rendered from results.json.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace ctxinfo {

// "<delta nll> (<ablated information>)", e.g. "0.000 (0.00)".
std::string bar_label(double delta_nll, double a);

std::string render_table(const nlohmann::json& results);
std::string render_chart(const nlohmann::json& results);

// Reads <dir>/results.json and writes report.txt and chart.svg next to it.
// Returns one warning per missing or degenerate row.
std::vector<std::string> emit_report(const std::filesystem::path& dir);

}  // namespace ctxinfo
