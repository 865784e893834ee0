#pragma once

// Plain SVG output: regime plots over s, phase portraits, convergence plots.

#include "pbv/regimes.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace pbv::svg {

struct Box {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

  void include(double x, double y) {
    x0 = std::min(x0, x), x1 = std::max(x1, x);
    y0 = std::min(y0, y), y1 = std::max(y1, y);
  }
  static Box empty() {
    const double inf = std::numeric_limits<double>::infinity();
    return {inf, -inf, inf, -inf};
  }
  Box padded(double frac) const {
    const double dx = std::max(x1 - x0, 1e-12) * frac, dy = std::max(y1 - y0, 1e-12) * frac;
    return {x0 - dx, x1 + dx, y0 - dy, y1 + dy};
  }
};

/// Canvas mapping a data box to a pixel frame with margins for labels.
class Canvas {
 public:
  Canvas(Box data, double width = 720, double height = 420)
      : box_(data), w_(width), h_(height) {
    if (!(box_.x1 > box_.x0)) box_.x1 = box_.x0 + 1.0;
    if (!(box_.y1 > box_.y0)) box_.y1 = box_.y0 + 1.0;
    body_ << std::setprecision(6);
  }

  double px(double x) const { return kLeft + (x - box_.x0) / (box_.x1 - box_.x0) * plot_w(); }
  double py(double y) const { return kTop + (box_.y1 - y) / (box_.y1 - box_.y0) * plot_h(); }

  void polyline(const std::vector<double>& x, const std::vector<double>& y,
                const std::string& color, const std::string& dash = "", double width = 1.5) {
    if (x.size() < 2) return;
    body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << "\"";
    if (!dash.empty()) body_ << " stroke-dasharray=\"" << dash << "\"";
    body_ << " points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
      body_ << px(x[i]) << ',' << py(y[i]) << ' ';
    }
    body_ << "\"/>\n";
  }

  void rect(double xa, double ya, double xb, double yb, const std::string& fill, double opacity) {
    const double l = px(std::min(xa, xb)), r = px(std::max(xa, xb));
    const double t = py(std::max(ya, yb)), b = py(std::min(ya, yb));
    body_ << "<rect x=\"" << l << "\" y=\"" << t << "\" width=\"" << r - l << "\" height=\""
          << b - t << "\" fill=\"" << fill << "\" fill-opacity=\"" << opacity
          << "\" stroke=\"none\" shape-rendering=\"crispEdges\"/>\n";
  }

  void vline(double x, const std::string& color, const std::string& dash = "4,3") {
    body_ << "<line x1=\"" << px(x) << "\" y1=\"" << kTop << "\" x2=\"" << px(x) << "\" y2=\""
          << kTop + plot_h() << "\" stroke=\"" << color << "\" stroke-dasharray=\"" << dash
          << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, int size = 12,
            const std::string& anchor = "middle") {
    body_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-family=\"sans-serif\" font-size=\""
          << size << "\" text-anchor=\"" << anchor << "\">" << escape(s) << "</text>\n";
  }

  /// Text placed at data coordinates.
  void label(double x, double y, const std::string& s, int size = 11) { text(px(x), py(y), s, size); }

  void legend(const std::vector<std::pair<std::string, std::string>>& entries,
              const std::vector<std::string>& dashes) {
    double y = kTop + 14;
    for (std::size_t i = 0; i < entries.size(); ++i, y += 16) {
      const double x = kLeft + plot_w() - 90;
      body_ << "<line x1=\"" << x << "\" y1=\"" << y - 4 << "\" x2=\"" << x + 24 << "\" y2=\""
            << y - 4 << "\" stroke=\"" << entries[i].second << "\" stroke-width=\"1.5\"";
      if (i < dashes.size() && !dashes[i].empty())
        body_ << " stroke-dasharray=\"" << dashes[i] << "\"";
      body_ << "/>\n";
      text(x + 30, y, entries[i].first, 12, "start");
    }
  }

  std::string render(const std::string& title, const std::string& xlabel,
                     const std::string& ylabel) const {
    std::ostringstream os;
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_
       << "\" viewBox=\"0 0 " << w_ << ' ' << h_ << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w()
       << "\" height=\"" << plot_h() << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << body_.str();
    axes(os);
    os << "<text x=\"" << w_ / 2 << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\" "
       << "text-anchor=\"middle\">" << escape(title) << "</text>\n";
    os << "<text x=\"" << kLeft + plot_w() / 2 << "\" y=\"" << h_ - 8
       << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
       << escape(xlabel) << "</text>\n";
    os << "<text x=\"14\" y=\"" << kTop + plot_h() / 2
       << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
       << kTop + plot_h() / 2 << ")\">" << escape(ylabel) << "</text>\n";
    os << "</svg>\n";
    return os.str();
  }

  const Box& box() const { return box_; }

 private:
  static constexpr double kLeft = 60, kRight = 20, kTop = 30, kBottom = 45;

  double plot_w() const { return w_ - kLeft - kRight; }
  double plot_h() const { return h_ - kTop - kBottom; }

  static std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
      if (c == '<') o += "&lt;";
      else if (c == '>') o += "&gt;";
      else if (c == '&') o += "&amp;";
      else o += c;
    }
    return o;
  }

  static std::vector<double> ticks(double a, double b) {
    const double span = b - a;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double f : {1.0, 2.0, 5.0, 10.0})
      if (f * mag >= raw) { step = f * mag; break; }
    std::vector<double> t;
    for (double v = std::ceil(a / step) * step; v <= b + 1e-9 * span; v += step)
      t.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
    return t;
  }

  void axes(std::ostringstream& os) const {
    const double bottom = kTop + plot_h();
    for (double v : ticks(box_.x0, box_.x1)) {
      os << "<line x1=\"" << px(v) << "\" y1=\"" << bottom << "\" x2=\"" << px(v) << "\" y2=\""
         << bottom + 4 << "\" stroke=\"black\"/>\n";
      os << "<text x=\"" << px(v) << "\" y=\"" << bottom + 16
         << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" << v
         << "</text>\n";
    }
    for (double v : ticks(box_.y0, box_.y1)) {
      os << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << py(v) << "\" x2=\"" << kLeft << "\" y2=\""
         << py(v) << "\" stroke=\"black\"/>\n";
      os << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(v) + 3
         << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << v
         << "</text>\n";
    }
  }

  Box box_;
  double w_, h_;
  std::ostringstream body_;
};

/// t (dotted), u (full) and z (dashed) over s with regime boundaries.
inline std::string regime_plot(const ParameterizedCurve& c, const std::vector<RegimeSegment>& segs,
                               const std::string& title) {
  Box b = Box::empty();
  for (std::size_t j = 0; j < c.size(); ++j) {
    b.include(c.s[j], c.t[j]);
    b.include(c.s[j], c.q[j].u[0]);
    b.include(c.s[j], c.q[j].z[0]);
  }
  b = b.padded(0.05);
  b.y1 += 0.08 * (b.y1 - b.y0);  // room for labels
  Canvas cv(b);
  std::vector<double> t(c.size()), u(c.size()), z(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) t[j] = c.t[j], u[j] = c.q[j].u[0], z[j] = c.q[j].z[0];
  cv.polyline(c.s, t, "#444444", "2,3");
  cv.polyline(c.s, u, "#1f4e9c");
  cv.polyline(c.s, z, "#c0392b", "7,4");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (i > 0) cv.vline(segs[i].s_a, "#888888");
    cv.label(0.5 * (segs[i].s_a + segs[i].s_b), b.y1 - 0.04 * (b.y1 - b.y0), to_string(segs[i].label));
  }
  cv.legend({{"t", "#444444"}, {"u", "#1f4e9c"}, {"z", "#c0392b"}}, {"2,3", "", "7,4"});
  return cv.render(title, "s", "t, u, z");
}

struct PhaseTrack {
  std::vector<double> z, u;
  std::string color = "#1f4e9c";
};

/// (z,u)-plane with the locally stable region {-D_zE(t,q) in K(q)} shaded
/// by sampling a grid of cells.
inline std::string phase_plot(const EnergyModel& model, const Potentials& pot, double t, Box zu,
                              const std::vector<PhaseTrack>& tracks, const std::string& title,
                              int grid = 240) {
  if (model.n() != 1 || model.m() != 1) throw ConfigError("phase_plot: scalar models only");
  if (grid < 2) throw ConfigError("phase_plot: grid too coarse");
  Canvas cv(zu);
  const double dz = (zu.x1 - zu.x0) / grid, du = (zu.y1 - zu.y0) / grid;
  auto stable = [&](double z, double u) {
    const State q = State::scalar(u, z);
    return pot.r0.in_stable_set(q, -model.Dz(t, q), 0.0);
  };
  // Corner values are shared between cells; a cell is shaded when its center
  // or a corner is stable so thin parts of the region stay visible.
  std::vector<char> corner((grid + 1) * (grid + 1));
  for (int i = 0; i <= grid; ++i)
    for (int k = 0; k <= grid; ++k) corner[i * (grid + 1) + k] = stable(zu.x0 + i * dz, zu.y0 + k * du);
  for (int i = 0; i < grid; ++i) {
    for (int k = 0; k < grid; ++k) {
      const bool on = stable(zu.x0 + (i + 0.5) * dz, zu.y0 + (k + 0.5) * du) ||
                      corner[i * (grid + 1) + k] || corner[(i + 1) * (grid + 1) + k] ||
                      corner[i * (grid + 1) + k + 1] || corner[(i + 1) * (grid + 1) + k + 1];
      if (on)
        cv.rect(zu.x0 + i * dz, zu.y0 + k * du, zu.x0 + (i + 1) * dz, zu.y0 + (k + 1) * du,
                "#f4d03f", 0.55);
    }
  }
  for (const auto& tr : tracks) cv.polyline(tr.z, tr.u, tr.color);
  return cv.render(title, "z", "u");
}

/// log10 of y against log10 of x, one polyline per series.
inline std::string loglog_plot(const std::vector<double>& x,
                               const std::vector<std::pair<std::string, std::vector<double>>>& series,
                               const std::string& title, const std::string& xlabel) {
  static const char* colors[] = {"#1f4e9c", "#c0392b", "#27ae60", "#8e44ad", "#444444"};
  Box b = Box::empty();
  std::vector<double> lx;
  for (double v : x) lx.push_back(v > 0 ? std::log10(v) : std::nan(""));
  std::vector<std::vector<double>> ly;
  for (const auto& s : series) {
    std::vector<double> l;
    for (std::size_t i = 0; i < s.second.size(); ++i) {
      const double v = s.second[i] > 0 ? std::log10(s.second[i]) : std::nan("");
      l.push_back(v);
      if (std::isfinite(v) && i < lx.size() && std::isfinite(lx[i])) b.include(lx[i], v);
    }
    ly.push_back(std::move(l));
  }
  if (!(b.x1 >= b.x0)) b = {0, 1, 0, 1};
  Canvas cv(b.padded(0.08));
  std::vector<std::pair<std::string, std::string>> legend;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const std::vector<double> xs(lx.begin(), lx.begin() + std::min(lx.size(), ly[k].size()));
    cv.polyline(xs, ly[k], colors[k % 5]);
    legend.emplace_back(series[k].first, colors[k % 5]);
  }
  cv.legend(legend, {});
  return cv.render(title, "log10 " + xlabel, "log10 value");
}

}  // namespace pbv::svg
