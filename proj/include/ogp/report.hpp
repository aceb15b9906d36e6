#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ogp/manifest.hpp"

namespace ogp {

namespace detail {

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;  // NaN for empty fields
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open: " + path.string());
  CsvTable t;
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (line.back() == ',') fields.push_back("");
    if (header) {
      t.columns = fields;
      header = false;
      continue;
    }
    std::vector<double> row;
    for (const auto& s : fields) {
      if (s.empty()) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        try {
          row.push_back(std::stod(s));
        } catch (...) {
          row.push_back(std::numeric_limits<double>::quiet_NaN());
        }
      }
    }
    row.resize(t.columns.size(), std::numeric_limits<double>::quiet_NaN());
    t.rows.push_back(std::move(row));
  }
  return t;
}

// Inline SVG line chart: x values against one polyline per y series.
inline std::string svg_chart(const std::string& title, const std::vector<double>& xs,
                             const std::vector<std::pair<std::string, std::vector<double>>>& series) {
  const int W = 560, H = 300, ml = 60, mb = 40, mt = 30, mr = 10;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (double x : xs) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
  }
  for (const auto& [name, ys] : series)
    for (std::size_t i = 0; i < ys.size(); ++i)
      if (std::isfinite(ys[i])) {
        ymin = std::min(ymin, ys[i]);
        ymax = std::max(ymax, ys[i]);
      }
  if (!(xmax > xmin)) xmax = xmin + 1;
  if (!(ymax > ymin)) ymax = ymin + 1;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mb - mt); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream os;
  os << "<svg width='" << W << "' height='" << H << "' xmlns='http://www.w3.org/2000/svg'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='" << W / 2 << "' y='18' text-anchor='middle' font-size='14'>" << title
     << "</text>\n";
  os << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
     << "' stroke='black'/>\n";
  os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
     << "' stroke='black'/>\n";
  os.precision(4);
  os << "<text x='" << ml << "' y='" << H - mb + 16 << "' font-size='10'>" << xmin << "</text>\n";
  os << "<text x='" << W - mr << "' y='" << H - mb + 16 << "' text-anchor='end' font-size='10'>"
     << xmax << "</text>\n";
  os << "<text x='" << ml - 4 << "' y='" << H - mb << "' text-anchor='end' font-size='10'>" << ymin
     << "</text>\n";
  os << "<text x='" << ml - 4 << "' y='" << mt + 8 << "' text-anchor='end' font-size='10'>" << ymax
     << "</text>\n";
  int ci = 0;
  for (const auto& [name, ys] : series) {
    const char* color = colors[ci % 6];
    os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
      if (!std::isfinite(ys[i])) continue;
      os << px(xs[i]) << "," << py(ys[i]) << " ";
    }
    os << "'/>\n";
    os << "<text x='" << W - mr - 4 << "' y='" << mt + 14 + 14 * ci
       << "' text-anchor='end' font-size='11' fill='" << color << "'>" << name << "</text>\n";
    ++ci;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace detail

// Build a static HTML summary of everything found under `runs_dir`:
// training-log CSVs become loss-curve charts, eval reports become
// per-horizon IS charts and summary tables, PNG montages are embedded by
// relative path.
inline void write_report(const std::filesystem::path& runs_dir,
                         const std::filesystem::path& out_html) {
  namespace fs = std::filesystem;
  std::vector<fs::path> csvs, evals, pngs;
  for (auto it = fs::recursive_directory_iterator(runs_dir); it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    const fs::path& p = it->path();
    if (p.extension() == ".csv" && p.filename().string().find("log") != std::string::npos)
      csvs.push_back(p);
    else if (p.extension() == ".png")
      pngs.push_back(p);
    else if (p.extension() == ".json") {
      try {
        json j = load_json(p);
        if (j.value("format", "") == "ogp-eval-report") evals.push_back(p);
      } catch (...) {
      }
    }
  }
  std::sort(csvs.begin(), csvs.end());
  std::sort(evals.begin(), evals.end());
  std::sort(pngs.begin(), pngs.end());

  std::ostringstream html;
  html << "<!DOCTYPE html><html><head><meta charset='utf-8'><title>run report</title>\n"
       << "<style>body{font-family:sans-serif;margin:24px;}h2{border-bottom:1px solid #ccc;}"
       << "table{border-collapse:collapse;}td,th{border:1px solid #999;padding:4px 8px;}"
       << "img{image-rendering:pixelated;border:1px solid #ccc;}</style></head><body>\n"
       << "<h1>Run report</h1>\n";

  if (!csvs.empty()) html << "<h2>Training curves</h2>\n";
  for (const auto& p : csvs) {
    detail::CsvTable t = detail::read_csv(p);
    if (t.columns.empty() || t.columns[0] != "step" || t.rows.empty()) continue;
    std::vector<double> xs;
    for (const auto& r : t.rows) xs.push_back(r[0]);
    std::vector<std::pair<std::string, std::vector<double>>> series;
    for (std::size_t c = 1; c < t.columns.size(); ++c) {
      std::vector<double> ys;
      for (const auto& r : t.rows) ys.push_back(r[c]);
      series.emplace_back(t.columns[c], std::move(ys));
    }
    html << "<h3>" << fs::relative(p, runs_dir).string() << "</h3>\n";
    html << detail::svg_chart("training losses", xs, series);
  }

  if (!evals.empty()) html << "<h2>Evaluation</h2>\n";
  for (const auto& p : evals) {
    json j = load_json(p);
    html << "<h3>" << fs::relative(p, runs_dir).string() << "</h3>\n";
    const auto& overall = j.at("overall");
    html << "<table><tr><th></th><th>IS</th><th>MSE</th></tr>"
         << "<tr><td>overall (n=" << overall.at("n").get<int>() << ")</td><td>"
         << overall.at("is_mean").get<double>() << " &plusmn; " << overall.at("is_se").get<double>()
         << "</td><td>" << overall.at("mse_mean").get<double>() << " &plusmn; "
         << overall.at("mse_se").get<double>() << "</td></tr></table>\n";
    std::vector<double> xs, is_mean;
    for (const auto& h : j.at("per_horizon")) {
      xs.push_back(h.at("step").get<double>());
      is_mean.push_back(h.at("is_mean").get<double>());
    }
    if (!xs.empty())
      html << detail::svg_chart("IS by horizon step", xs, {{"is_mean", is_mean}});
  }

  if (!pngs.empty()) html << "<h2>Montages</h2>\n";
  for (const auto& p : pngs) {
    const std::string rel = fs::relative(p, out_html.parent_path().empty()
                                                ? fs::path(".")
                                                : out_html.parent_path())
                                .string();
    html << "<h3>" << fs::relative(p, runs_dir).string() << "</h3>\n"
         << "<img src='" << rel << "' width='480'/>\n";
  }
  html << "</body></html>\n";

  if (out_html.has_parent_path()) fs::create_directories(out_html.parent_path());
  std::ofstream os(out_html, std::ios::trunc);
  if (!os) throw Error("cannot open for writing: " + out_html.string());
  os << html.str();
}

}  // namespace ogp
