#pragma once

// Text serializations: CSV tables, JSON reports and a small SVG line chart.
// Doubles are written with 17 significant digits so that files round-trip
// and are byte-identical across runs.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "treepoly/laplace.hpp"
#include "treepoly/measure.hpp"
#include "treepoly/stats.hpp"

namespace treepoly::io {

inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", x);
}

/// "# key: value" lines; `prefix` lets SVG reuse them inside a comment.
inline void write_header(std::ostream& os, const std::string& command, const nlohmann::json& config,
                         const std::string& prefix = "# ") {
  os << prefix << "treepoly " << tool_version() << " " << command << "\n";
  os << prefix << "schema_version: " << kSchemaVersion << "\n";
  os << prefix << "config: " << config.dump() << "\n";
}

inline void write_measure_csv(std::ostream& os, const RestrictedMeasure& mu) {
  os << "# provenance: " << to_string(mu.provenance) << "\n";
  os << "# " << (mu.provenance == Provenance::FiniteVolume ? "n" : "N") << ": " << mu.volume << "\n";
  os << "# m: " << mu.depth << "\n";
  os << "# seed: " << mu.seed << "\n";
  os << "# normalizer: " << num(mu.normalizer) << "\n";
  os << "vertex,probability\n";
  for (std::size_t u = 0; u < mu.probabilities.size(); ++u)
    os << Vertex(u, mu.depth).to_string() << "," << num(mu.probabilities[u]) << "\n";
}

struct CharacterRow {
  Character f;
  double finite = 0.0;
  double infinite = std::nan("");
};

inline void write_characters_csv(std::ostream& os, const std::vector<CharacterRow>& rows) {
  os << "F,E_prob_n,E_prob_inf\n";
  for (const auto& row : rows)
    os << '"' << row.f.to_string() << "\"," << num(row.finite) << "," << num(row.infinite) << "\n";
}

inline void write_laplace_csv(std::ostream& os, const std::vector<LaplaceCurve>& curves, bool overlay) {
  os << "beta,r,h,F" << (overlay ? ",ln_cosh" : "") << "\n";
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.r.size(); ++i) {
      os << num(c.beta) << "," << num(c.r[i]) << "," << num(c.h[i]) << "," << num(c.rate[i]);
      if (overlay) os << "," << num(weak_disorder_rate(c.r[i]));
      os << "\n";
    }
}

inline nlohmann::json laplace_json(const std::vector<LaplaceCurve>& curves) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : curves)
    out.push_back({{"beta", c.beta},
                   {"r", c.r},
                   {"h", c.h},
                   {"F", c.rate},
                   {"failures", c.failures},
                   {"flagged", c.flagged}});
  return out;
}

/// F against r, one polyline per curve, optional ln cosh r overlay.
inline void write_laplace_svg(std::ostream& os, const std::vector<LaplaceCurve>& curves, bool overlay,
                              const std::string& header_comment) {
  constexpr double width = 640, height = 480, left = 70, right = 150, top = 30, bottom = 60;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  double r_lo = INFINITY, r_hi = -INFINITY, f_lo = INFINITY, f_hi = -INFINITY;
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.r.size(); ++i) {
      r_lo = std::min(r_lo, c.r[i]);
      r_hi = std::max(r_hi, c.r[i]);
      if (std::isfinite(c.rate[i])) {
        f_lo = std::min(f_lo, c.rate[i]);
        f_hi = std::max(f_hi, c.rate[i]);
        if (overlay) f_hi = std::max(f_hi, weak_disorder_rate(c.r[i]));
      }
    }
  if (!(f_hi > f_lo)) f_hi = f_lo + 1.0;
  f_lo = std::min(f_lo, 0.0);
  const double pad = 0.05 * (f_hi - f_lo);
  f_hi += pad;
  auto sx = [&](double r) { return left + (r - r_lo) / (r_hi - r_lo) * plot_w; };
  auto sy = [&](double f) { return top + (f_hi - f) / (f_hi - f_lo) * plot_h; };
  auto fixed = [](double x) { return fmt::format("{:.2f}", x); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<!--\n" << header_comment << "-->\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
     << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int t = 0; t <= 4; ++t) {
    const double r = r_lo + (r_hi - r_lo) * t / 4.0;
    const double f = f_lo + (f_hi - f_lo) * t / 4.0;
    os << "<line x1=\"" << fixed(sx(r)) << "\" y1=\"" << fixed(top + plot_h) << "\" x2=\"" << fixed(sx(r))
       << "\" y2=\"" << fixed(top + plot_h + 5) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fixed(sx(r)) << "\" y=\"" << fixed(top + plot_h + 20)
       << "\" text-anchor=\"middle\">" << fmt::format("{:.2f}", r) << "</text>\n";
    os << "<line x1=\"" << fixed(left - 5) << "\" y1=\"" << fixed(sy(f)) << "\" x2=\"" << fixed(left)
       << "\" y2=\"" << fixed(sy(f)) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fixed(left - 8) << "\" y=\"" << fixed(sy(f) + 4) << "\" text-anchor=\"end\">"
       << fmt::format("{:.3f}", f) << "</text>\n";
  }
  if (f_lo < 0.0 && f_hi > 0.0)
    os << "<line x1=\"" << fixed(left) << "\" y1=\"" << fixed(sy(0)) << "\" x2=\"" << fixed(left + plot_w)
       << "\" y2=\"" << fixed(sy(0)) << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"3,3\"/>\n";
  os << "<text x=\"" << fixed(left + plot_w / 2) << "\" y=\"" << fixed(height - 15)
     << "\" text-anchor=\"middle\">r</text>\n";
  os << "<text x=\"18\" y=\"" << fixed(top + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << fixed(top + plot_h / 2) << ")\">F(r)</text>\n";

  auto polyline = [&](const std::vector<double>& rs, const std::vector<double>& fs, const char* color,
                      const char* dash) {
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
    if (dash) os << " stroke-dasharray=\"" << dash << "\"";
    os << " points=\"";
    bool first = true;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (!std::isfinite(fs[i])) continue;
      os << (first ? "" : " ") << fixed(sx(rs[i])) << "," << fixed(sy(fs[i]));
      first = false;
    }
    os << "\"/>\n";
  };
  double legend_y = top + 10;
  auto legend = [&](const std::string& label, const char* color, const char* dash) {
    const double x = left + plot_w + 10;
    os << "<line x1=\"" << fixed(x) << "\" y1=\"" << fixed(legend_y) << "\" x2=\"" << fixed(x + 25)
       << "\" y2=\"" << fixed(legend_y) << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
    if (dash) os << " stroke-dasharray=\"" << dash << "\"";
    os << "/>\n<text x=\"" << fixed(x + 30) << "\" y=\"" << fixed(legend_y + 4) << "\">" << label
       << "</text>\n";
    legend_y += 18;
  };

  const double bc = critical_beta();
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const char* color = colors[k % 6];
    polyline(curves[k].r, curves[k].rate, color, nullptr);
    legend(fmt::format("beta = {:.3g} beta_c", curves[k].beta / bc), color, nullptr);
  }
  if (overlay && !curves.empty()) {
    std::vector<double> weak;
    for (double r : curves.front().r) weak.push_back(weak_disorder_rate(r));
    polyline(curves.front().r, weak, "#7f7f7f", "6,4");
    legend("ln cosh r", "#7f7f7f", "6,4");
  }
  os << "</svg>\n";
}

inline void write_summary_csv(std::ostream& os, const EnsembleSummary& s) {
  os << "k";
  for (const char* stat : {"z", "log_z", "d", "ratio"})
    for (const char* col : {"q10", "q25", "q50", "q75", "q90", "mean", "stderr", "count"})
      os << "," << stat << "_" << col;
  os << ",invalid\n";
  for (const auto& row : s.rows) {
    os << row.depth;
    for (const auto* st : {&row.z, &row.log_z, &row.d, &row.ratio})
      os << "," << num(st->q10) << "," << num(st->q25) << "," << num(st->q50) << "," << num(st->q75)
         << "," << num(st->q90) << "," << num(st->mean) << "," << num(st->stderr_) << "," << st->count;
    os << "," << row.invalid << "\n";
  }
}

inline void write_clt_csv(std::ostream& os, const CltReport& r) {
  os << "# median_ks: " << num(r.median_ks) << "\n# median_raw_ks: " << num(r.median_raw_ks) << "\n";
  os << "environment,seed,ks,raw_ks\n";
  for (std::size_t e = 0; e < r.ks.size(); ++e)
    os << e << "," << r.config.replicate_seed(e) << "," << num(r.ks[e]) << "," << num(r.raw_ks[e]) << "\n";
}

inline void write_variance_csv(std::ostream& os, const VarianceReport& r) {
  os << "# target: " << num(r.target) << "\n# median_exact: " << num(r.median_exact)
     << "\n# median_sampled: " << num(r.median_sampled) << "\n# gap: " << num(r.gap) << "\n";
  os << "environment,seed,sampled,sampled_stderr,exact\n";
  for (std::size_t e = 0; e < r.exact.size(); ++e)
    os << e << "," << r.config.replicate_seed(e) << "," << num(r.sampled[e]) << ","
       << num(r.sampled_stderr[e]) << "," << num(r.exact[e]) << "\n";
}

inline void write_seneta_heyde_csv(std::ostream& os, const SenetaHeydeReport& r) {
  os << "# target_c: " << num(r.target) << "\n";
  os << "k,valid,valid_fraction,median_ratio,distance\n";
  for (const auto& row : r.rows)
    os << row.depth << "," << row.valid << "," << num(row.valid_fraction) << "," << num(row.median_ratio)
       << "," << num(row.distance) << "\n";
}

}  // namespace treepoly::io
