#include "cfts/overlay.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "cfts/error.hpp"

namespace cfts {

namespace {

constexpr double kWidth = 960.0;
constexpr double kLeft = 90.0;
constexpr double kRight = 20.0;
constexpr double kHeader = 44.0;
constexpr double kRowHeight = 90.0;
constexpr double kRowGap = 10.0;
constexpr double kBottom = 12.0;

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

std::string render_overlay(const MultivariateSeries& original, const MultivariateSeries& counterfactual,
                           const SubstitutionSet& subs, const OverlayLabels& labels) {
  if (!original.same_shape(counterfactual)) throw DataError("overlay: series shapes differ");
  const std::size_t V = original.variable_count();
  const std::size_t T = original.timesteps();
  std::size_t t0 = 0;
  std::size_t t1 = T;
  if (subs.window) {
    t0 = subs.window->t0;
    t1 = subs.window->t1;
    if (!(t0 < t1 && t1 <= T)) throw DataError("overlay: invalid window");
  }
  for (std::size_t v : subs.variables) {
    if (v >= V) throw DataError("overlay: substituted variable out of range");
  }

  auto a = original.values();
  auto b = counterfactual.values();
  double lo = std::min(*std::min_element(a.begin(), a.end()), *std::min_element(b.begin(), b.end()));
  double hi = std::max(*std::max_element(a.begin(), a.end()), *std::max_element(b.begin(), b.end()));
  const double span = hi - lo;
  const double pad = span > 0.0 ? 0.05 * span : 0.5;
  lo -= pad;
  hi += pad;

  const double plot_width = kWidth - kLeft - kRight;
  const double height = kHeader + static_cast<double>(V) * (kRowHeight + kRowGap) + kBottom;
  auto x_of = [&](std::size_t t) {
    return kLeft + (T > 1 ? plot_width * static_cast<double>(t) / static_cast<double>(T - 1) : plot_width / 2.0);
  };
  auto points = [&](const MultivariateSeries& s, std::size_t v, std::size_t from, std::size_t to) {
    const double top = kHeader + static_cast<double>(v) * (kRowHeight + kRowGap);
    std::string out;
    for (std::size_t t = from; t < to; ++t) {
      const double y = top + (hi - s.at(v, t)) / (hi - lo) * kRowHeight;
      if (t != from) out += ' ';
      out += fmt(x_of(t)) + "," + fmt(y);
    }
    return out;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\"" << fmt(height)
      << "\" viewBox=\"0 0 " << fmt(kWidth) << ' ' << fmt(height) << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << fmt(kWidth) << "\" height=\"" << fmt(height) << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fmt(kLeft) << "\" y=\"26\" font-family=\"sans-serif\" font-size=\"16\">"
      << "original prediction: " << escape_xml(labels.original_prediction)
      << " | counterfactual target: " << escape_xml(labels.target) << "</text>\n";
  for (std::size_t v = 0; v < V; ++v) {
    const double top = kHeader + static_cast<double>(v) * (kRowHeight + kRowGap);
    svg << "<g class=\"row\" data-row=\"" << v << "\">\n";
    svg << "<text x=\"8\" y=\"" << fmt(top + kRowHeight / 2.0 + 5.0)
        << "\" font-family=\"sans-serif\" font-size=\"13\">" << escape_xml(original.variables()[v]) << "</text>\n";
    svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(top + kRowHeight) << "\" x2=\"" << fmt(kWidth - kRight)
        << "\" y2=\"" << fmt(top + kRowHeight) << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    if (std::find(subs.variables.begin(), subs.variables.end(), v) != subs.variables.end()) {
      svg << "<polyline class=\"counterfactual\" data-row=\"" << v
          << "\" fill=\"none\" stroke=\"red\" stroke-width=\"2\" points=\"" << points(counterfactual, v, t0, t1)
          << "\"/>\n";
    }
    svg << "<polyline class=\"original\" data-row=\"" << v
        << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\" points=\"" << points(original, v, 0, T) << "\"/>\n";
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace cfts
