#include "cpsvuln/svg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "cpsvuln/serialize.hpp"

namespace cpsvuln {

namespace {

constexpr double kWidth = 640.0;
constexpr double kPanel = 220.0;
constexpr double kMargin = 56.0;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double x) {
  std::ostringstream o;
  o.precision(4);
  o << x;
  return o.str();
}

struct Axis {
  double lo, hi;
  bool log;
  double map(double v, double px0, double px1) const {
    double a = lo, b = hi, x = v;
    if (log) {
      a = std::log10(lo);
      b = std::log10(hi);
      x = std::log10(std::max(v, lo));
    }
    const double f = b > a ? (x - a) / (b - a) : 0.5;
    return px0 + f * (px1 - px0);
  }
};

void panel(std::ostringstream& out, const std::vector<double>& ys, double top, bool log,
           const std::string& label, const char* color) {
  const double left = kMargin, right = kWidth - 16.0, bottom = top + kPanel;
  double lo = INFINITY, hi = 0.0;
  for (double y : ys) {
    if (!std::isfinite(y)) continue;
    hi = std::max(hi, y);
    if (!log || y > 0) lo = std::min(lo, y);
  }
  if (!std::isfinite(lo)) lo = log ? 1e-16 : 0.0;
  if (!log) lo = std::min(lo, 0.0);
  if (log) lo = std::max(lo, hi * 1e-16);
  if (!(hi > lo)) hi = lo + (log ? lo * 10.0 + 1e-300 : 1.0);
  const Axis ax{lo, hi, log};
  const double T = std::max<double>(1.0, static_cast<double>(ys.size()) - 1.0);

  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << right - left
      << "\" height=\"" << kPanel << "\" fill=\"none\" stroke=\"#444\"/>\n";
  out << "<text x=\"" << left << "\" y=\"" << top - 6 << "\" font-size=\"12\">"
      << escape(label) << (log ? " (log scale)" : "") << "</text>\n";
  out << "<text x=\"4\" y=\"" << top + 10 << "\" font-size=\"10\">" << fmt(hi) << "</text>\n";
  out << "<text x=\"4\" y=\"" << bottom << "\" font-size=\"10\">" << fmt(lo) << "</text>\n";
  out << "<text x=\"" << right - 30 << "\" y=\"" << bottom + 14 << "\" font-size=\"10\">t="
      << static_cast<long long>(T) << "</text>\n";
  out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
  for (size_t t = 0; t < ys.size(); ++t) {
    if (!std::isfinite(ys[t])) continue;
    const double px = left + (right - left) * static_cast<double>(t) / T;
    const double py = ax.map(ys[t], bottom, top);
    out << format_double(px) << ',' << format_double(py) << ' ';
  }
  out << "\"/>\n";
}

}  // namespace

std::string svg_delta_plot(const DeltaTrajectory& tr, const std::string& title, bool log_de) {
  std::vector<double> de, dz;
  for (Index t = 0; t <= tr.horizon(); ++t) {
    de.push_back(tr.de_norm(t));
    dz.push_back(tr.dz_norm(t));
  }
  const double height = 2 * kPanel + 110.0;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << height << "\" viewBox=\"0 0 " << kWidth << ' ' << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kMargin << "\" y=\"20\" font-size=\"14\">" << escape(title) << "</text>\n";
  panel(out, de, 50.0, log_de, "||Delta e_t||", "#c0392b");
  panel(out, dz, 50.0 + kPanel + 40.0, false, "||Delta z_t||", "#2471a3");
  out << "</svg>\n";
  return out.str();
}

std::string svg_reachset_plot(const ReachSetEstimate& est, const std::string& title) {
  const std::vector<Vec> verts = support_polygon(est);
  double extent = est.bound.bound;
  for (const Vec& v : verts) extent = std::max(extent, v.cwiseAbs().maxCoeff());
  for (const InnerSample& s : est.inner) {
    extent = std::max(extent, std::max(std::abs(s.endpoint(est.plane_i)),
                                       std::abs(s.endpoint(est.plane_j))));
  }
  if (!(extent > 0.0)) extent = 1.0;
  extent *= 1.05;
  const double size = 560.0, pad = 40.0;
  auto px = [&](double x) { return pad + (x + extent) / (2 * extent) * size; };
  auto py = [&](double y) { return pad + (extent - y) / (2 * extent) * size; };

  std::ostringstream out;
  const double total = size + 2 * pad;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total << "\" height=\""
      << total << "\" viewBox=\"0 0 " << total << ' ' << total << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << pad << "\" y=\"24\" font-size=\"14\">" << escape(title) << "</text>\n";
  out << "<line x1=\"" << px(-extent) << "\" y1=\"" << py(0) << "\" x2=\"" << px(extent)
      << "\" y2=\"" << py(0) << "\" stroke=\"#bbb\"/>\n";
  out << "<line x1=\"" << px(0) << "\" y1=\"" << py(-extent) << "\" x2=\"" << px(0)
      << "\" y2=\"" << py(extent) << "\" stroke=\"#bbb\"/>\n";
  out << "<text x=\"" << total - pad - 60 << "\" y=\"" << py(0) - 4 << "\" font-size=\"11\">de_"
      << est.plane_i << "</text>\n";
  out << "<text x=\"" << px(0) + 4 << "\" y=\"" << pad + 10 << "\" font-size=\"11\">de_"
      << est.plane_j << "</text>\n";
  const double r = est.bound.bound / (2 * extent) * size;
  out << "<circle cx=\"" << px(0) << "\" cy=\"" << py(0) << "\" r=\"" << format_double(r)
      << "\" fill=\"none\" stroke=\"#c0392b\" stroke-dasharray=\"6,3\"/>\n";
  out << "<polygon fill=\"none\" stroke=\"#27ae60\" stroke-width=\"1.2\" points=\"";
  for (const Vec& v : verts) out << format_double(px(v(0))) << ',' << format_double(py(v(1))) << ' ';
  out << "\"/>\n";
  for (const InnerSample& s : est.inner) {
    out << "<circle cx=\"" << format_double(px(s.endpoint(est.plane_i))) << "\" cy=\""
        << format_double(py(s.endpoint(est.plane_j))) << "\" r=\"1.8\" fill=\"#2471a3\"/>\n";
  }
  out << "<text x=\"" << pad << "\" y=\"" << total - 10 << "\" font-size=\"11\">bound "
      << fmt(est.bound.bound) << " (dashed), support polygon (green), " << est.inner.size()
      << " sampled endpoints</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace cpsvuln
