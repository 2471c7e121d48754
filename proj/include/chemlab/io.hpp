#pragma once

// Run artifacts: CSV series (17 significant digits, stable column order),
// CHLB binary snapshots for restart, native SVG line plots and reports.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chemlab/bounds.hpp"
#include "chemlab/errors.hpp"
#include "chemlab/functionals.hpp"
#include "chemlab/grid.hpp"
#include "chemlab/regimes.hpp"
#include "chemlab/scenarios.hpp"
#include "chemlab/solver.hpp"

namespace chemlab::io {

namespace fs = std::filesystem;

inline std::string fmt17(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
}

inline std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

inline void write_csv(std::ostream& os, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << fmt17(r[i]);
    os << '\n';
  }
}

inline void write_series_csv(const fs::path& path, const FunctionalSeries& s) {
  std::vector<std::vector<double>> rows;
  rows.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) rows.push_back(s.row(i));
  auto out = open_out(path);
  write_csv(out, s.columns(), rows);
}

inline void write_steps_csv(const fs::path& path, const std::vector<double>& t, const std::vector<double>& linf) {
  std::vector<std::vector<double>> rows;
  rows.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) rows.push_back({t[i], linf[i]});
  auto out = open_out(path);
  write_csv(out, {"t", "linf"}, rows);
}

/// Column-major view of a CSV file with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  const std::vector<double>& column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("CSV has no column '" + name + "'");
    return columns[it - header.begin()];
  }
  bool has(const std::string& name) const { return std::find(header.begin(), header.end(), name) != header.end(); }
};

inline CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + " is empty");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  t.columns.resize(t.header.size());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= t.columns.size()) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": too many fields");
      try {
        t.columns[c++].push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (c != t.columns.size()) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": too few fields");
  }
  return t;
}

// CHLB snapshot, all fields little-endian:
//   offset 0   char[4]  "CHLB"
//          4   u32      format version (1)
//          8   u32      dimension n
//         12   u32      cell count N
//         16   u32      mode (0 full, 1 reduced)
//         20   u32      reserved (0)
//         24   f64      R
//         32   f64      grading exponent
//         40   f64      t
//         48   f64      last accepted dt
//         56   f64[N]   u on cells
//    56 + 8N   f64[N+1] U on faces (reduced mode only)
struct Snapshot {
  int n = 0, N = 0;
  double R = 0.0, grading = 1.0;
  RadialState state;
};

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits;
  std::memcpy(&bits, &v, sizeof bits);
  std::array<char, sizeof(U)> b;
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(b.data(), b.size());
}

template <class T>
T get_le(std::istream& is) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  std::array<unsigned char, sizeof(U)> b;
  if (!is.read(reinterpret_cast<char*>(b.data()), b.size())) throw Error("truncated snapshot");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(b[i]) << (8 * i);
  T v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace detail

inline void write_snapshot(const fs::path& path, const RadialGrid& g, const RadialState& s) {
  auto out = open_out(path, std::ios::binary);
  out.write("CHLB", 4);
  detail::put_le<std::uint32_t>(out, 1);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.n()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.N()));
  detail::put_le<std::uint32_t>(out, s.mode == Backend::reduced ? 1u : 0u);
  detail::put_le<std::uint32_t>(out, 0);
  for (double x : {g.R(), g.grading(), s.t, s.dt_last}) detail::put_le<double>(out, x);
  for (double x : s.u) detail::put_le<double>(out, x);
  if (s.mode == Backend::reduced) {
    const auto U = s.U.empty() ? accumulate_mass(g, s.u) : s.U;
    for (double x : U) detail::put_le<double>(out, x);
  }
  if (!out) throw Error("failed writing " + path.string());
}

inline Snapshot read_snapshot(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read snapshot " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "CHLB", 4) != 0) throw ConfigError(path.string() + " is not a CHLB snapshot");
  if (detail::get_le<std::uint32_t>(in) != 1) throw ConfigError("unsupported snapshot version");
  Snapshot s;
  s.n = static_cast<int>(detail::get_le<std::uint32_t>(in));
  s.N = static_cast<int>(detail::get_le<std::uint32_t>(in));
  const auto mode = detail::get_le<std::uint32_t>(in);
  detail::get_le<std::uint32_t>(in);
  s.R = detail::get_le<double>(in);
  s.grading = detail::get_le<double>(in);
  s.state.t = detail::get_le<double>(in);
  s.state.dt_last = detail::get_le<double>(in);
  s.state.mode = mode == 1 ? Backend::reduced : Backend::full;
  s.state.u.resize(s.N);
  for (auto& x : s.state.u) x = detail::get_le<double>(in);
  if (s.state.mode == Backend::reduced) {
    s.state.U.resize(s.N + 1);
    for (auto& x : s.state.U) x = detail::get_le<double>(in);
  }
  return s;
}

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

/// Minimal SVG line chart; log_y drops nonpositive points.
inline std::string svg_plot(const std::string& title, const std::string& xlabel, const std::vector<PlotSeries>& series,
                            bool log_y = false) {
  const double W = 640, H = 420, L = 80, Rm = 20, T = 40, B = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (log_y && s.y[i] <= 0.0)) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (!(x1 >= x0)) x0 = 0, x1 = 1;
  if (!(y1 >= y0)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - Rm); };
  auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - Rm << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
    const double X = L + (W - L - Rm) * k / 4, Y = H - B - (H - T - B) * k / 4;
    char xl[32], yl[32];
    std::snprintf(xl, sizeof xl, "%.3g", xv);
    if (log_y) std::snprintf(yl, sizeof yl, "1e%.2g", yv);
    else std::snprintf(yl, sizeof yl, "%.3g", yv);
    os << "<text x=\"" << X << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << xl << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << Y + 4 << "\" text-anchor=\"end\">" << yl << "</text>\n";
  }
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* c = colors[k % 6];
    os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (log_y && s.y[i] <= 0.0)) continue;
      os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << L + 10 << "\" y=\"" << T + 16 + 14 * k << "\" fill=\"" << c << "\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

/// phi_p, max u and the moment functional against t.
inline void write_series_plots(const fs::path& dir, const FunctionalSeries& s, bool log_y) {
  ensure_dir(dir);
  write_text(dir / "phi_p.svg", svg_plot("energy phi_p", "t", {{"phi_p", s.t, s.phi_p}}, log_y));
  write_text(dir / "linf.svg", svg_plot("max u", "t", {{"||u||_inf", s.t, s.linf}}, log_y));
  write_text(dir / "moment_phi.svg", svg_plot("moment functional", "t", {{"phi", s.t, s.moment_phi}}, log_y));
}

inline nlohmann::json to_json(const regimes::RegimeReport& r) {
  nlohmann::json j;
  for (int i = 0; i < 5; ++i)
    j["assumptions"]["H" + std::to_string(i + 1)] = {{"holds", r.h[i].holds}, {"detail", r.h[i].detail}};
  j["path"] = regimes::to_string(r.path);
  j["blowup_predicted"] = r.blowup_predicted;
  if (r.improvement_over_wang) j["improvement_over_linear_sensitivity"] = regimes::to_string(*r.improvement_over_wang);
  return j;
}

inline nlohmann::json to_json(const OdiCoefficients& c) {
  return {{"A", c.A}, {"B", c.B}, {"C", c.C}, {"gamma", c.gamma}, {"delta", c.delta}, {"phi0", c.phi0},
          {"p", c.p}, {"domain_measure", c.domain_measure}, {"C_bar", c.C_bar()}, {"D", c.D()}};
}

inline nlohmann::json to_json(const BoundReport& b) {
  return {{"T_implicit", b.T_implicit}, {"T_explicit", b.T_explicit},
          {"quadrature_error_estimate", b.quadrature_error_estimate}, {"consistent", b.consistent}};
}

inline std::string render(const OdiCoefficients& c, const BoundReport& b) {
  std::ostringstream os;
  os << "ODI coefficients\n"
     << "  A = " << fmt17(c.A) << "\n  B = " << fmt17(c.B) << "\n  C = " << fmt17(c.C) << "\n"
     << "  gamma = " << fmt17(c.gamma) << "\n  delta = " << fmt17(c.delta) << "\n"
     << "  phi0 = " << fmt17(c.phi0) << "\n  C_bar = " << fmt17(c.C_bar()) << "\n  D = " << fmt17(c.D()) << "\n"
     << "lower bounds for the blow-up time\n"
     << "  T_implicit = " << fmt17(b.T_implicit) << "  (error estimate " << fmt17(b.quadrature_error_estimate) << ")\n"
     << "  T_explicit = " << fmt17(b.T_explicit) << "\n"
     << "  consistent (T_explicit <= T_implicit): " << (b.consistent ? "yes" : "no") << "\n";
  return os.str();
}

inline nlohmann::json to_json(const ExperimentReport& r) {
  nlohmann::json j;
  j["regime"] = to_json(r.regime);
  j["C"] = r.C;
  j["M0"] = r.M0;
  j["pfrak"] = r.pfrak;
  j["moment"] = {{"s0", r.moment.s0}, {"moment_gamma", r.moment.moment_gamma}, {"s_star", r.moment.s_star},
                 {"eps0", r.moment.eps0}, {"s0_binding", r.s0_choice.binding}};
  j["gamma_interval"] = {{"lower", r.gamma_interval.lo}, {"upper", r.gamma_interval.hi},
                        {"lower_binding", r.gamma_interval.lo_binding}, {"upper_binding", r.gamma_interval.hi_binding}};
  j["initial"] = {{"r_star", r.r_star}, {"height", r.initial.height}, {"mass", r.initial.mass},
                  {"inner_mass", r.initial.inner_mass}};
  j["constants"] = {{"c0", r.constants.c0}, {"c_sil9", r.constants.c_sil9}, {"L", r.constants.L}, {"K", r.constants.K}};
  j["status"] = to_string(r.status);
  j["stop_reason"] = r.stop_reason;
  j["steps"] = r.steps;
  if (r.T_blowup_observed) j["T_blowup_observed"] = *r.T_blowup_observed;
  if (r.sphi_entry_time) j["sphi_entry_time"] = *r.sphi_entry_time;
  j["phi0"] = r.phi0;
  for (const auto& v : r.theorem1)
    j["theorem1"].push_back({{"p", v.p}, {"growth", v.growth}, {"pass", v.pass}, {"note", v.note}});
  if (r.odi2) j["odi2"] = {{"c", r.odi2->c}, {"violations", r.odi2->violations}, {"samples", r.odi2->samples}};
  if (r.tmax) j["tmax"] = {{"T_est", r.tmax->T_est}, {"kappa", r.tmax->kappa}, {"residual", r.tmax->residual}};
  if (r.odi_fit) {
    j["odi_fit"] = to_json(r.odi_fit->coeffs);
    j["odi_fit"]["coverage"] = r.odi_fit->coverage;
    j["odi_fit"]["scale"] = r.odi_fit->scale;
  }
  if (r.bound) j["bound"] = to_json(*r.bound);
  for (const auto& v : r.verdicts)
    j["verdicts"].push_back({{"name", v.name}, {"pass", v.pass}, {"enforced", v.enforced}, {"detail", v.detail}});
  j["notes"] = r.notes;
  j["all_pass"] = r.all_pass();
  return j;
}

inline std::string render(const ExperimentReport& r) {
  std::ostringstream os;
  os << "blow-up experiment\n"
     << "  C = " << fmt17(r.C) << ", M0 = " << fmt17(r.M0) << ", pfrak = " << fmt17(r.pfrak) << "\n"
     << "  s0 = " << fmt17(r.moment.s0) << " (" << r.s0_choice.binding << "), moment gamma = "
     << fmt17(r.moment.moment_gamma) << "\n"
     << "  eps0 = " << fmt17(r.moment.eps0) << ", s_star = " << fmt17(r.moment.s_star) << ", r_star = " << fmt17(r.r_star)
     << "\n"
     << "  initial height = " << fmt17(r.initial.height) << ", inner mass = " << fmt17(r.initial.inner_mass) << "\n"
     << "  status: " << to_string(r.status) << " after " << r.steps << " steps (" << r.stop_reason << ")\n";
  if (r.T_blowup_observed) os << "  declared blow-up time: " << fmt17(*r.T_blowup_observed) << "\n";
  if (r.tmax) os << "  extrapolated T_max: " << fmt17(r.tmax->T_est) << " (kappa " << fmt17(r.tmax->kappa) << ")\n";
  if (r.bound) os << "  fitted ODI lower bound: T_implicit = " << fmt17(r.bound->T_implicit) << "\n";
  os << "verdicts\n";
  for (const auto& v : r.verdicts)
    os << "  " << (v.pass ? "PASS" : (v.enforced ? "FAIL" : "WARN")) << "  " << v.name << ": " << v.detail << "\n";
  for (const auto& n : r.notes) os << "  note: " << n << "\n";
  return os.str();
}

}  // namespace chemlab::io
