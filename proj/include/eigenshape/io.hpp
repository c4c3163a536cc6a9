#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "eigenshape/diagnostics.hpp"
#include "eigenshape/eigensolve.hpp"
#include "eigenshape/level_set.hpp"
#include "eigenshape/optimize.hpp"

namespace eigenshape {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "field payloads are little-endian; big-endian hosts need byte swaps");

namespace detail {

constexpr char kMagic[8] = {'L', 'S', 'E', 'T', 'S', 'H', 'P', '1'};

inline void write_container(const std::string& path, const json& header,
                            const std::vector<double>& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kMagic, 8);
  const std::string h = header.dump();
  const std::uint64_t len = h.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!out) throw IoError("short write: " + path);
}

inline json read_container(const std::string& path, std::vector<double>& payload) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw IoError("bad magic in " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  if (!in || len > (1u << 26)) throw IoError("bad header length in " + path);
  std::string h(len, '\0');
  in.read(h.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("truncated header in " + path);
  json header;
  try {
    header = json::parse(h);
  } catch (const json::parse_error& e) {
    throw IoError("bad header json in " + path + ": " + e.what());
  }
  index_t count = 1;
  for (const auto& d : header.at("dims")) count *= d.get<index_t>();
  payload.resize(static_cast<std::size_t>(count));
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!in) throw IoError("truncated payload in " + path);
  return header;
}

inline json grid_header(const Grid& g) {
  json dims = json::array();
  for (int a = 0; a < g.ndim; ++a) dims.push_back(g.dims[a]);
  json origin = json::array();
  for (int a = 0; a < g.ndim; ++a) origin.push_back(g.origin[a]);
  return json{{"dims", dims}, {"h", g.h}, {"origin", origin}};
}

inline Grid grid_from_header(const json& header) {
  const auto& jd = header.at("dims");
  if (jd.size() != 2 && jd.size() != 3) throw IoError("dims must have 2 or 3 entries");
  std::array<index_t, 3> dims{1, 1, 1};
  for (std::size_t a = 0; a < jd.size(); ++a) dims[a] = jd[a].get<index_t>();
  Point origin{0, 0, 0};
  const auto& jo = header.at("origin");
  for (std::size_t a = 0; a < jo.size() && a < 3; ++a) origin[a] = jo[a].get<double>();
  return Grid(dims, header.at("h").get<double>(), origin, static_cast<int>(jd.size()));
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// One-file checkpoint: 8-byte magic, 64-bit header length, JSON header
/// {dims,h,origin,step,metadata}, raw little-endian float64 phi (row-major).
inline void save_shape(const std::string& path, const LevelSetShape& shape, int step = 0,
                       json metadata = json::object()) {
  json header = detail::grid_header(shape.grid);
  header["step"] = step;
  header["metadata"] = std::move(metadata);
  detail::write_container(path, header, shape.phi);
}

inline LevelSetShape load_shape(const std::string& path, int* step_out = nullptr) {
  std::vector<double> phi;
  const json header = detail::read_container(path, phi);
  const Grid g = detail::grid_from_header(header);
  if (step_out) *step_out = header.value("step", 0);
  return make_shape(g, std::move(phi));
}

/// Spectrum export: <base>.json metadata plus one field container per
/// eigenfunction (same binary layout as shapes).
inline void save_spectrum(const std::string& base, const Spectrum& sp, const Grid& g) {
  json meta;
  meta["eigenvalues"] = sp.eigenvalues;
  meta["residuals"] = sp.residuals;
  meta["converged"] = sp.converged;
  meta["iterations"] = sp.iterations;
  json files = json::array();
  for (std::size_t k = 0; k < sp.eigenfunctions.size(); ++k) {
    const std::string fpath = base + "_u" + std::to_string(k + 1) + ".field";
    json header = detail::grid_header(g);
    header["step"] = 0;
    header["metadata"] = json{{"kind", "eigenfunction"},
                              {"k", k + 1},
                              {"lambda", sp.eigenvalues[k]}};
    detail::write_container(fpath, header, sp.eigenfunctions[k]);
    files.push_back(std::filesystem::path(fpath).filename().string());
  }
  meta["fields"] = files;
  std::ofstream out(base + ".json");
  if (!out) throw IoError("cannot open for writing: " + base + ".json");
  out << meta.dump(2) << "\n";
}

inline Spectrum load_spectrum(const std::string& json_path, const Grid& expected_grid) {
  std::ifstream in(json_path);
  if (!in) throw IoError("cannot open: " + json_path);
  json meta;
  try {
    in >> meta;
  } catch (const json::parse_error& e) {
    throw IoError(std::string("bad spectrum json: ") + e.what());
  }
  Spectrum sp;
  sp.eigenvalues = meta.at("eigenvalues").get<std::vector<double>>();
  sp.residuals = meta.at("residuals").get<std::vector<double>>();
  sp.converged = meta.value("converged", true);
  const auto dir = std::filesystem::path(json_path).parent_path();
  for (const auto& f : meta.at("fields")) {
    std::vector<double> u;
    const json header = detail::read_container((dir / f.get<std::string>()).string(), u);
    const Grid g = detail::grid_from_header(header);
    if (!g.same_layout(expected_grid)) throw IoError("eigenfunction grid mismatch: " + json_path);
    sp.eigenfunctions.push_back(std::move(u));
  }
  return sp;
}

/// History CSV: step,lambda_1..lambda_N,volume,objective,maxV,fb_residual.
inline std::string history_csv(const std::vector<HistoryRow>& rows) {
  std::string out = "step";
  const std::size_t n = rows.empty() ? 1 : rows[0].lambdas.size();
  for (std::size_t k = 1; k <= n; ++k) out += ",lambda_" + std::to_string(k);
  out += ",volume,objective,maxV,fb_residual\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step);
    for (double l : r.lambdas) out += "," + detail::fmt(l);
    out += "," + detail::fmt(r.volume);
    out += "," + detail::fmt(r.objective);
    out += "," + detail::fmt(r.max_velocity);
    out += "," + detail::fmt(r.fb_residual);
    out += "\n";
  }
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
}

inline json report_to_json(const DiagnosticsReport& rep) {
  json j;
  j["fb_residual"] = {{"sup", rep.fb_residual_sup}, {"l2", rep.fb_residual_l2}};
  {
    json rows = json::array();
    for (const auto& r : rep.nondegeneracy.min_ratio)
      rows.push_back({{"r", r.r}, {"min_ratio", r.value}});
    j["nondegeneracy"] = {{"profile", rows},
                          {"c0_estimate", rep.nondegeneracy.c0_estimate},
                          {"degenerate", rep.nondegeneracy.degenerate}};
  }
  {
    json rows = json::array();
    for (const auto& r : rep.density.range)
      rows.push_back({{"r", r.r}, {"min", r.lo}, {"max", r.hi}});
    j["density"] = {{"profile", rows}, {"warnings", rep.density.warnings}};
  }
  {
    json rows = json::array();
    for (const auto& r : rep.minkowski.ratio) rows.push_back({{"r", r.r}, {"ratio", r.value}});
    j["minkowski"] = {{"profile", rows}, {"growth_warning", rep.minkowski.growth_warning}};
  }
  {
    json rows = json::array();
    for (const auto& s : rep.weiss) rows.push_back({{"r", s.r}, {"phi", s.phi_r}});
    j["weiss"] = {{"samples", rows},
                  {"fitted_c", rep.weiss_c},
                  {"violations_at_fit", rep.weiss_violations_at_fit},
                  {"violations_at_zero", rep.weiss_violations_at_zero},
                  {"tolerance", rep.weiss_tol}};
  }
  {
    json rows = json::array();
    for (const auto& s : rep.acf.samples) rows.push_back({{"r", s.r}, {"J", s.value}});
    j["acf"] = {{"samples", rows},
                {"overlap_warning", rep.acf.overlap_warning},
                {"fields", rep.acf_fields}};
  }
  {
    json rows = json::array();
    for (const auto& s : rep.flatness.table) rows.push_back({{"r", s.r}, {"f", s.value}});
    j["flatness"] = {{"table", rows},
                     {"alpha", rep.flatness.alpha},
                     {"r2", rep.flatness.r2},
                     {"saturated", rep.flatness.saturated},
                     {"nonflat_samples", rep.nonflat_samples},
                     {"samples_checked", rep.flat_samples_checked}};
  }
  j["components"] = rep.components;
  j["skipped"] = rep.skipped;
  j["notes"] = rep.notes;
  return j;
}

/// Per-radius profiles as CSV rows: quantity,r,value,value2.
inline std::string report_profiles_csv(const DiagnosticsReport& rep) {
  std::string out = "quantity,r,value,value2\n";
  auto row = [&](const char* q, double r, double a, double b = std::nan("")) {
    out += std::string(q) + "," + detail::fmt(r) + "," + detail::fmt(a);
    if (!std::isnan(b)) out += "," + detail::fmt(b);
    out += "\n";
  };
  for (const auto& p : rep.nondegeneracy.min_ratio) row("nondegeneracy_min", p.r, p.value);
  for (const auto& p : rep.density.range) row("density", p.r, p.lo, p.hi);
  for (const auto& p : rep.minkowski.ratio) row("minkowski", p.r, p.value);
  for (const auto& s : rep.weiss) row("weiss", s.r, s.phi_r);
  for (const auto& s : rep.acf.samples) row("acf", s.r, s.value);
  for (const auto& s : rep.flatness.table) row("flatness", s.r, s.value);
  return out;
}

// ---------------------------------------------------------------------------
// self-contained SVG scatter plots

namespace detail {

struct SvgPlot {
  double x0, x1, y0, y1;
  std::string body;
  static constexpr int W = 560, H = 400, M = 60;

  double px(double x) const { return M + (x - x0) / (x1 - x0) * (W - 2 * M); }
  double py(double y) const { return H - M - (y - y0) / (y1 - y0) * (H - 2 * M); }

  void point(double x, double y, const char* color) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "<circle cx='%.1f' cy='%.1f' r='4' fill='%s'/>\n", px(x), py(y),
                  color);
    body += buf;
  }
  void line(double xa, double ya, double xb, double yb, const char* color) {
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "<line x1='%.1f' y1='%.1f' x2='%.1f' y2='%.1f' stroke='%s' stroke-width='1.5'/>\n",
                  px(xa), py(ya), px(xb), py(yb), color);
    body += buf;
  }
  std::string render(const std::string& title, const std::string& xlabel,
                     const std::string& ylabel) const {
    char head[700];
    std::snprintf(head, sizeof(head),
                  "<svg xmlns='http://www.w3.org/2000/svg' width='%d' height='%d' "
                  "viewBox='0 0 %d %d'>\n<rect width='%d' height='%d' fill='white'/>\n"
                  "<rect x='%d' y='%d' width='%d' height='%d' fill='none' stroke='black'/>\n"
                  "<text x='%d' y='24' font-size='15' text-anchor='middle'>%s</text>\n"
                  "<text x='%d' y='%d' font-size='12' text-anchor='middle'>%s</text>\n"
                  "<text x='16' y='%d' font-size='12' text-anchor='middle' "
                  "transform='rotate(-90 16 %d)'>%s</text>\n",
                  W, H, W, H, W, H, M, M, W - 2 * M, H - 2 * M, W / 2, title.c_str(), W / 2, H - 16,
                  xlabel.c_str(), H / 2, H / 2, ylabel.c_str());
    char ticks[400];
    std::snprintf(ticks, sizeof(ticks),
                  "<text x='%d' y='%d' font-size='11'>%.3g</text>"
                  "<text x='%d' y='%d' font-size='11' text-anchor='end'>%.3g</text>"
                  "<text x='%d' y='%d' font-size='11' text-anchor='end'>%.3g</text>"
                  "<text x='%d' y='%d' font-size='11' text-anchor='end'>%.3g</text>\n",
                  M, H - M + 16, x0, W - M, H - M + 16, x1, M - 4, H - M, y0, M - 4, M + 10, y1);
    return std::string(head) + ticks + body + "</svg>\n";
  }
};

}  // namespace detail

/// Log-log flatness decay scatter with the fitted power law.
inline std::string flatness_svg(const FlatnessDecay& dec) {
  if (dec.table.empty()) return "<svg xmlns='http://www.w3.org/2000/svg'/>\n";
  double lx0 = 1e300, lx1 = -1e300, ly0 = 1e300, ly1 = -1e300;
  for (const auto& p : dec.table) {
    const double lx = std::log10(p.r), ly = std::log10(std::max(p.value, 1e-12));
    lx0 = std::min(lx0, lx);
    lx1 = std::max(lx1, lx);
    ly0 = std::min(ly0, ly);
    ly1 = std::max(ly1, ly);
  }
  const double padx = 0.08 * (lx1 - lx0 + 0.1), pady = 0.08 * (ly1 - ly0 + 0.1);
  detail::SvgPlot plot{lx0 - padx, lx1 + padx, ly0 - pady, ly1 + pady, {}};
  if (!dec.saturated && std::isfinite(dec.alpha)) {
    // fitted line through the mean point with slope alpha (natural log fit
    // has the same slope in log10-log10 axes)
    double mx = 0, my = 0;
    for (const auto& p : dec.table) {
      mx += std::log10(p.r);
      my += std::log10(std::max(p.value, 1e-12));
    }
    mx /= static_cast<double>(dec.table.size());
    my /= static_cast<double>(dec.table.size());
    plot.line(lx0, my + dec.alpha * (lx0 - mx), lx1, my + dec.alpha * (lx1 - mx), "#888888");
  }
  for (const auto& p : dec.table)
    plot.point(std::log10(p.r), std::log10(std::max(p.value, 1e-12)), "#1f77b4");
  char title[120];
  std::snprintf(title, sizeof(title), "flatness decay: alpha=%.3f R2=%.3f%s", dec.alpha, dec.r2,
                dec.saturated ? " (saturated)" : "");
  return plot.render(title, "log10 r", "log10 f");
}

/// Weiss samples against radius with the C-corrected curve.
inline std::string weiss_svg(const std::vector<WeissSample>& samples, double C) {
  if (samples.empty()) return "<svg xmlns='http://www.w3.org/2000/svg'/>\n";
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : samples) {
    x0 = std::min(x0, s.r);
    x1 = std::max(x1, s.r);
    const double corr = std::isfinite(C) ? s.phi_r + 0.5 * C * s.r * s.r : s.phi_r;
    y0 = std::min({y0, s.phi_r, corr});
    y1 = std::max({y1, s.phi_r, corr});
  }
  const double padx = 0.08 * (x1 - x0 + 1e-12), pady = 0.08 * (y1 - y0 + 1e-12) + 1e-12;
  detail::SvgPlot plot{x0 - padx, x1 + padx, y0 - pady, y1 + pady, {}};
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    if (std::isfinite(C))
      plot.line(samples[i].r, samples[i].phi_r + 0.5 * C * samples[i].r * samples[i].r,
                samples[i + 1].r, samples[i + 1].phi_r + 0.5 * C * samples[i + 1].r * samples[i + 1].r,
                "#888888");
  }
  for (const auto& s : samples) plot.point(s.r, s.phi_r, "#d62728");
  char title[120];
  std::snprintf(title, sizeof(title), "Weiss energy samples (fitted C=%.2f)", C);
  return plot.render(title, "r", "phi(r)");
}

}  // namespace eigenshape
