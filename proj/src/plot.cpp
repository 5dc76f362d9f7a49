#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hermes/bench.hpp"
#include "hermes/stats.hpp"

namespace hermes::bench {

namespace {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err_low;  // optional error bars, absolute values
  std::vector<double> err_high;
  bool line = true;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

// Round tick step (1, 2 or 5 times a power of ten) giving about n ticks.
double nice_step(double span, int n) {
  if (span <= 0.0) return 1.0;
  const double raw = span / n;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10.0 * mag;
}

void render(const Chart& chart, const std::string& path) {
  const double W = 720, H = 480, left = 80, right = 180, top = 50, bottom = 60;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = 0.0, ymax = -xmin;
  for (const auto& s : chart.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      const double hi = i < s.err_high.size() ? s.err_high[i] : s.y[i];
      const double lo = i < s.err_low.size() ? s.err_low[i] : s.y[i];
      ymax = std::max(ymax, hi);
      ymin = std::min(ymin, lo);
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = 0;
    xmax = 1;
  }
  if (!std::isfinite(ymax)) ymax = 1;
  xmin = std::min(xmin, 0.0);
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  const double xstep = nice_step(xmax - xmin, 6), ystep = nice_step(ymax - ymin, 6);
  xmax = std::ceil(xmax / xstep) * xstep;
  ymax = std::ceil(ymax / ystep) * ystep;
  ymin = std::floor(ymin / ystep) * ystep;

  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">" << escape(chart.title)
      << "</text>\n";
  for (double x = xmin; x <= xmax + xstep / 2; x += xstep) {
    svg << "<line x1=\"" << px(x) << "\" y1=\"" << top << "\" x2=\"" << px(x) << "\" y2=\"" << top + ph
        << "\" stroke=\"#eee\"/>\n";
    svg << "<text x=\"" << px(x) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << fmt(x)
        << "</text>\n";
  }
  for (double y = ymin; y <= ymax + ystep / 2; y += ystep) {
    svg << "<line x1=\"" << left << "\" y1=\"" << py(y) << "\" x2=\"" << left + pw << "\" y2=\"" << py(y)
        << "\" stroke=\"#eee\"/>\n";
    svg << "<text x=\"" << left - 8 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << fmt(y) << "</text>\n";
  }
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">"
      << escape(chart.x_label) << "</text>\n";
  svg << "<text transform=\"translate(20," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(chart.y_label) << "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    const char* color = kColors[k % std::size(kColors)];
    if (s.line && s.x.size() > 1) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) svg << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
      svg << "\"/>\n";
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i < s.err_low.size() && i < s.err_high.size()) {
        svg << "<line x1=\"" << px(s.x[i]) << "\" y1=\"" << py(s.err_low[i]) << "\" x2=\"" << px(s.x[i])
            << "\" y2=\"" << py(s.err_high[i]) << "\" stroke=\"" << color << "\"/>\n";
      }
      svg << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"4\" fill=\"" << color
          << "\"/>\n";
    }
    const double ly = top + 10 + 20.0 * static_cast<double>(k);
    svg << "<rect x=\"" << left + pw + 15 << "\" y=\"" << ly - 8 << "\" width=\"12\" height=\"12\" fill=\"" << color
        << "\"/>\n";
    svg << "<text x=\"" << left + pw + 33 << "\" y=\"" << ly + 2 << "\">" << escape(s.name) << "</text>\n";
  }
  svg << "</svg>\n";
  std::ofstream(path) << svg.str();
}

using Table = std::vector<std::map<std::string, std::string>>;

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  Table rows;
  std::string line;
  std::vector<std::string> header;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  if (std::getline(in, line)) header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::optional<double> number(const std::map<std::string, std::string>& row, const std::string& key) {
  auto it = row.find(key);
  if (it == row.end() || it->second.empty()) return std::nullopt;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<std::string> plot_suite(const std::string& dir) {
  const std::filesystem::path d(dir);
  const Table summary = read_csv((d / "summary.csv").string());
  std::vector<std::string> written;

  auto out = [&](const char* name) {
    written.push_back((d / name).string());
    return written.back();
  };

  {
    Chart c{"Main stream event rate", "drivers", "events per minute", {}};
    Series measured{"measured", {}, {}, {}, {}, false};
    for (const auto& row : summary) {
      auto n = number(row, "drivers");
      auto r = number(row, "events_per_minute");
      if (n && r) {
        measured.x.push_back(*n);
        measured.y.push_back(*r);
      }
    }
    c.series.push_back(measured);
    if (measured.x.size() >= 2) {
      auto fit = stats::linear_fit(measured.x, measured.y);
      Series line{"fit, slope " + fmt(fit.slope), {}, {}, {}, {}, true};
      const double x0 = *std::min_element(measured.x.begin(), measured.x.end());
      const double x1 = *std::max_element(measured.x.begin(), measured.x.end());
      line.x = {x0, x1};
      line.y = {fit.intercept + fit.slope * x0, fit.intercept + fit.slope * x1};
      c.series.push_back(line);
    }
    render(c, out("rate_vs_drivers.svg"));
  }

  {
    Chart c{"Utilization per component", "drivers", "busy fraction of a minute", {}};
    for (const char* comp : {"balancer", "collectors_mean", "collectors_sum", "shortterm", "hub_main", "hub_storage"}) {
      Series s{comp, {}, {}, {}, {}, true};
      for (const auto& row : summary) {
        auto n = number(row, "drivers");
        auto u = number(row, std::string("util_") + comp);
        if (n && u) {
          s.x.push_back(*n);
          s.y.push_back(*u);
        }
      }
      if (!s.x.empty()) c.series.push_back(s);
    }
    render(c, out("utilization_vs_drivers.svg"));
  }

  {
    Chart c{"Hub utilization versus event rate", "events per minute", "busy fraction of a minute", {}};
    Series s{"hub main stream", {}, {}, {}, {}, true};
    for (const auto& row : summary) {
      auto r = number(row, "events_per_minute");
      auto u = number(row, "util_hub_main");
      if (r && u) {
        s.x.push_back(*r);
        s.y.push_back(*u);
      }
    }
    c.series.push_back(s);
    render(c, out("hub_utilization_vs_rate.svg"));
  }

  {
    Chart c{"Admission delay (mean, 95% CI)", "drivers", "milliseconds", {}};
    for (const char* which : {"d_collector", "d_storage"}) {
      Series s{std::string(which) == "d_collector" ? "collector" : "storage stream", {}, {}, {}, {}, true};
      for (const auto& row : summary) {
        auto n = number(row, "drivers");
        auto m = number(row, std::string(which) + "_mean");
        auto lo = number(row, std::string(which) + "_ci_low");
        auto hi = number(row, std::string(which) + "_ci_high");
        if (n && m && lo && hi) {
          s.x.push_back(*n);
          s.y.push_back(*m);
          s.err_low.push_back(*lo);
          s.err_high.push_back(*hi);
        }
      }
      c.series.push_back(s);
    }
    render(c, out("delay_vs_drivers.svg"));
  }
  return written;
}

}  // namespace hermes::bench
