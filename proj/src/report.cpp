#include "ctxinfo/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ctxinfo/experiment.hpp"

namespace ctxinfo {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Rows store NaN as null.
double number(const json& row, const char* key) {
  auto it = row.find(key);
  if (it == row.end() || !it->is_number()) return std::nan("");
  return it->get<double>();
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  // "-0.000" reads as a sign where there is none.
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) {
    s.erase(0, 1);
  }
  return s;
}

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::vector<std::string> ordered_unique(const json& rows, const char* key) {
  std::vector<std::string> out;
  for (const auto& row : rows) {
    const auto v = row.at(key).get<std::string>();
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

bool row_missing(const json& row) {
  return row.value("missing", false) || !std::isfinite(number(row, "A"));
}

}  // namespace

std::string bar_label(double delta_nll, double a) {
  return fixed(delta_nll, 3) + " (" + fixed(a, 2) + ")";
}

std::string render_table(const json& results) {
  const json& rows = results.at("rows");
  std::ostringstream out;
  out << "model: " << results.value("model", "") << "\n"
      << "paradigm: " << results.value("paradigm", "") << "\n"
      << "status: " << results.value("status", "") << "\n\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %-11s %9s %9s %9s %9s %8s %19s\n",
                "spec", "condition", "full", "none", "ablated", "dNLL", "A",
                "CI");
  out << line;
  for (const auto& row : rows) {
    std::string ci = "[" + fixed(number(row, "ci_low"), 3) + ", " +
                     fixed(number(row, "ci_high"), 3) + "]";
    std::string a = fixed(number(row, "A"), 3);
    if (row.value("missing", false)) {
      a = "missing";
    } else if (row.value("degenerate", false)) {
      a = "degen.";
    }
    std::snprintf(line, sizeof line,
                  "%-28s %-11s %9s %9s %9s %9s %8s %19s\n",
                  row.at("spec").get<std::string>().c_str(),
                  row.at("condition").get<std::string>().c_str(),
                  fixed(number(row, "full_nll"), 4).c_str(),
                  fixed(number(row, "none_nll"), 4).c_str(),
                  fixed(number(row, "ablated_nll"), 4).c_str(),
                  fixed(number(row, "delta_nll"), 4).c_str(), a.c_str(),
                  ci.c_str());
    out << line;
  }
  return out.str();
}

std::string render_chart(const json& results) {
  const json& rows = results.at("rows");
  const auto specs = ordered_unique(rows, "spec");
  const auto conditions = ordered_unique(rows, "condition");
  static const char* colors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52"};

  double lo = 0.0, hi = 1.0;
  std::vector<std::string> warnings;
  for (const auto& row : rows) {
    if (row_missing(row)) {
      warnings.push_back(row.at("spec").get<std::string>() + " / " +
                         row.at("condition").get<std::string>() +
                         (row.value("missing", false) ? ": missing arm"
                                                      : ": degenerate"));
      continue;
    }
    for (const char* key : {"A", "ci_low", "ci_high"}) {
      const double v = number(row, key);
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  const double bar_w = 26.0, gap = 22.0, left = 70.0, top = 40.0;
  const double plot_h = 320.0;
  const double group_w = bar_w * static_cast<double>(conditions.size()) + gap;
  const double plot_w = group_w * static_cast<double>(specs.size()) + gap;
  const double width = left + plot_w + 20.0;
  const double height = top + plot_h + 150.0 + 16.0 * warnings.size();
  auto y_of = [&](double v) { return top + (hi - v) / (hi - lo) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << coord(width)
      << "\" height=\"" << coord(height) << "\" font-family=\"sans-serif\" "
      << "font-size=\"10\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << coord(left) << "\" y=\"20\" font-size=\"13\">"
      << "Ablated information by ablation; labels: dNLL (A)</text>\n";
  // Axis with ticks every 0.25.
  svg << "<line x1=\"" << coord(left) << "\" y1=\"" << coord(top)
      << "\" x2=\"" << coord(left) << "\" y2=\"" << coord(top + plot_h)
      << "\" stroke=\"black\"/>\n";
  for (double t = std::ceil(lo * 4.0) / 4.0; t <= hi + 1e-12; t += 0.25) {
    svg << "<line x1=\"" << coord(left - 4) << "\" y1=\"" << coord(y_of(t))
        << "\" x2=\"" << coord(left + plot_w) << "\" y2=\"" << coord(y_of(t))
        << "\" stroke=\"" << (std::abs(t) < 1e-12 ? "black" : "#dddddd")
        << "\"/>\n";
    svg << "<text x=\"" << coord(left - 8) << "\" y=\"" << coord(y_of(t) + 3)
        << "\" text-anchor=\"end\">" << fixed(t, 2) << "</text>\n";
  }
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const double gx = left + gap + group_w * static_cast<double>(s);
    for (std::size_t c = 0; c < conditions.size(); ++c) {
      const double x = gx + bar_w * static_cast<double>(c);
      const json* row = nullptr;
      for (const auto& r : rows) {
        if (r.at("spec") == specs[s] && r.at("condition") == conditions[c]) {
          row = &r;
        }
      }
      if (row == nullptr || row_missing(*row)) {
        svg << "<text x=\"" << coord(x + bar_w / 2) << "\" y=\""
            << coord(y_of(0) - 4) << "\" text-anchor=\"middle\" fill=\"#c00\">"
            << "!</text>\n";
        continue;
      }
      const double a = number(*row, "A");
      const double y0 = y_of(0.0), y1 = y_of(a);
      svg << "<rect x=\"" << coord(x + 1) << "\" y=\""
          << coord(std::min(y0, y1)) << "\" width=\"" << coord(bar_w - 2)
          << "\" height=\"" << coord(std::abs(y1 - y0)) << "\" fill=\""
          << colors[c % 4] << "\"/>\n";
      const double cl = number(*row, "ci_low"), ch = number(*row, "ci_high");
      if (std::isfinite(cl) && std::isfinite(ch)) {
        const double cx = x + bar_w / 2;
        svg << "<path d=\"M" << coord(cx) << " " << coord(y_of(cl)) << "V"
            << coord(y_of(ch)) << "M" << coord(cx - 4) << " " << coord(y_of(cl))
            << "h8M" << coord(cx - 4) << " " << coord(y_of(ch))
            << "h8\" stroke=\"black\" fill=\"none\"/>\n";
      }
      const double ly = std::min(y1, y_of(std::isfinite(ch) ? ch : a)) - 4;
      svg << "<text x=\"" << coord(x + bar_w / 2) << "\" y=\"" << coord(ly)
          << "\" text-anchor=\"start\" transform=\"rotate(-90 "
          << coord(x + bar_w / 2 + 3) << " " << coord(ly) << ")\">"
          << xml_escape(bar_label(number(*row, "delta_nll"), a))
          << "</text>\n";
    }
    const double lx = gx + bar_w * static_cast<double>(conditions.size()) / 2;
    const double ly = top + plot_h + 12;
    svg << "<text x=\"" << coord(lx) << "\" y=\"" << coord(ly)
        << "\" text-anchor=\"end\" transform=\"rotate(-45 " << coord(lx)
        << " " << coord(ly) << ")\">" << xml_escape(specs[s]) << "</text>\n";
  }
  double ly = top + plot_h + 110;
  for (std::size_t c = 0; c < conditions.size(); ++c) {
    const double lx = left + 120.0 * static_cast<double>(c);
    svg << "<rect x=\"" << coord(lx) << "\" y=\"" << coord(ly - 9)
        << "\" width=\"10\" height=\"10\" fill=\"" << colors[c % 4]
        << "\"/><text x=\"" << coord(lx + 14) << "\" y=\"" << coord(ly)
        << "\">" << xml_escape(conditions[c]) << "</text>\n";
  }
  for (const auto& w : warnings) {
    ly += 16;
    svg << "<text x=\"" << coord(left) << "\" y=\"" << coord(ly)
        << "\" fill=\"#c00\">warning: " << xml_escape(w) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::string> emit_report(const fs::path& dir) {
  std::ifstream in(dir / "results.json");
  if (!in) throw std::runtime_error("no results.json in " + dir.string());
  const json results = json::parse(in);
  std::vector<std::string> warnings;
  for (const auto& row : results.at("rows")) {
    const std::string where = row.at("spec").get<std::string>() + " / " +
                              row.at("condition").get<std::string>();
    if (row.value("missing", false)) {
      warnings.push_back(where + ": missing arm");
    } else if (row.value("degenerate", false)) {
      warnings.push_back(where + ": degenerate denominator");
    }
  }
  write_atomic(dir / "report.txt", render_table(results));
  write_atomic(dir / "chart.svg", render_chart(results));
  return warnings;
}

}  // namespace ctxinfo
