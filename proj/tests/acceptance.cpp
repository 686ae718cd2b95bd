// Acceptance checks, one criterion per invocation: `acceptance c1` .. `acceptance c10`.
// Each check prints one PASS/FAIL line; the exit status is nonzero if any failed.

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <fmt/format.h>

#include "treepoly/io.hpp"

namespace fs = std::filesystem;
using namespace treepoly;

namespace {

const double kBetaC = critical_beta();

class Report {
 public:
  explicit Report(std::string criterion) : criterion_(std::move(criterion)) {}

  bool check(const std::string& id, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << criterion_ << "." << id << ": " << detail << std::endl;
    failed_ |= !ok;
    return ok;
  }
  void note(const std::string& text) { std::cout << "     " << criterion_ << ": " << text << std::endl; }
  int status() const { return failed_ ? 1 : 0; }

 private:
  std::string criterion_;
  bool failed_ = false;
};

std::string g(double x) { return fmt::format("{:.6g}", x); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path out_dir() {
  const fs::path dir = TREEPOLY_ACCEPTANCE_DIR;
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string command = std::string(TREEPOLY_CLI) + " " + args;
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// CSV table written by the CLI: '#' lines skipped, first other line is the header.
struct Table {
  std::map<std::string, std::string> meta;  // "# key: value" lines
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::vector<double> column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw std::runtime_error("no column " + name);
    const auto idx = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    for (const auto& row : rows) out.push_back(std::stod(row[idx]));
    return out;
  }
};

Table read_table(const fs::path& path) {
  Table t;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      const auto colon = line.find(": ");
      if (colon != std::string::npos) t.meta[line.substr(2, colon - 2)] = line.substr(colon + 2);
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (t.columns.empty()) t.columns = cells;
    else t.rows.push_back(cells);
  }
  return t;
}

// CLI runs used by criteria 5-8; criterion 10 repeats each one with --jobs 8.
struct CliRun {
  std::string name;
  std::string args;
  std::string ext;
};

const std::vector<CliRun>& cli_runs() {
  static const std::vector<CliRun> runs{
      {"c5_plot", "laplace --beta 2bc --r-min -2 --r-max 2 --steps 201 --format svg --overlay", "svg"},
      {"c5_curve", "laplace --beta 2bc --r-min -2 --r-max 2 --steps 201", "csv"},
      {"c6_weak", "simulate --beta 0.5bc --depth 20 --replicates 200 --seed 1", "csv"},
      {"c6_critical", "simulate --beta bc --depth 20 --replicates 200 --seed 1", "csv"},
      {"c6_strong", "simulate --beta 1.5bc --depth 20 --replicates 200 --seed 1", "csv"},
      {"c7_ratio", "ratio --beta bc --depth 20 --replicates 500 --depths 8,12,16,20 --seed 1", "csv"},
      {"c8_weak", "clt --beta 0.5bc --depth 22 --replicates 20 --paths 100000 --seed 1", "csv"},
      {"c8_control", "clt --dist deterministic --depth 22 --replicates 1 --paths 100000 --seed 1", "csv"},
  };
  return runs;
}

fs::path run_path(const CliRun& run, int jobs) {
  return out_dir() / fmt::format("{}.jobs{}.{}", run.name, jobs, run.ext);
}

/// Runs a CLI acceptance command with --jobs 1 and returns the output path.
fs::path cli_output(const std::string& name, Report& report) {
  for (const auto& run : cli_runs()) {
    if (run.name != name) continue;
    const auto path = run_path(run, 1);
    const int code = run_cli(run.args + " --jobs 1 --out " + path.string());
    report.check("cli_" + name, code == 0, "treepoly " + run.args + " exited " + std::to_string(code));
    return path;
  }
  throw std::runtime_error("unknown run " + name);
}

// ---------------------------------------------------------------------------

int criterion1() {
  Report r("c1");
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& spec : {DisorderSpec::lognormal(kBetaC), DisorderSpec::two_point(0.1, 0.5)}) {
    double worst_z = 0.0, worst_d = 0.0;
    for (std::uint64_t i = 0; i < 100; ++i) {
      const WeightOracle oracle(mix_seed(1, i), spec);
      const auto series = martingale_series(oracle, 12);
      for (int n = 0; n <= 12; ++n) {
        double z = 0.0, d = 0.0, scale = 0.0;
        for (const auto& row : enumerate_leaves(oracle, Vertex::root(), n)) {
          z += row.product;
          d += row.position * row.product;
          scale += std::abs(row.position) * row.product;
        }
        z = std::ldexp(z, -n);
        d = std::ldexp(d, -n);
        scale = std::ldexp(scale, -n);
        const auto k = static_cast<std::size_t>(n);
        worst_z = std::max(worst_z, std::abs(series.z[k] - z) / z);
        // D is a signed sum; its error is measured against sum |V| e^{-V}.
        if (n > 0) worst_d = std::max(worst_d, std::abs(series.d[k] - d) / scale);
      }
    }
    const std::string kind(spec.kind_name());
    r.check("z_" + kind, worst_z <= 1e-10, "max rel. error of Z_n vs enumeration = " + g(worst_z));
    r.check("d_" + kind, worst_d <= 1e-10, "max rel. error of D_n vs enumeration = " + g(worst_d));
  }
  const double elapsed = seconds_since(t0);
  r.check("runtime", elapsed < 60.0, "total " + g(elapsed) + " s (target < 60 s)");
  return r.status();
}

int criterion2() {
  Report r("c2");
  const auto spec = DisorderSpec::lognormal(1.5 * kBetaC);
  double worst_sum = 0.0, worst_refine = 0.0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const WeightOracle oracle(mix_seed(2, i), spec);
    for (int n = 1; n <= 16; ++n) {
      std::vector<RestrictedMeasure> levels;
      for (int m = 0; m <= 8; ++m) levels.push_back(restricted_measure_n(oracle, n, m));
      for (int m = 1; m <= 8; ++m) {
        const auto& mu = levels[static_cast<std::size_t>(m)];
        worst_sum = std::max(worst_sum, std::abs(mu.total() - 1.0));
        const auto coarse = mu.coarsen();
        const auto& exact = levels[static_cast<std::size_t>(m) - 1];
        for (std::size_t u = 0; u < coarse.probabilities.size(); ++u)
          worst_refine = std::max(worst_refine, std::abs(coarse.probabilities[u] - exact.probabilities[u]) /
                                                    exact.probabilities[u]);
      }
    }
  }
  r.check("prob_n_sum", worst_sum <= 1e-12, "max |sum - 1| over n<=16, m<=8, 20 seeds = " + g(worst_sum));
  r.check("prob_n_refine", worst_refine <= 1e-12, "max rel. refinement defect = " + g(worst_refine));

  double worst_inf = 0.0;
  bool identical = true;
  int failures = 0, computed = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const WeightOracle oracle(mix_seed(2, i), DisorderSpec::lognormal(kBetaC));
    for (int m = 1; m <= 8; ++m) {
      try {
        set_jobs(1);
        const auto a = restricted_measure_inf(oracle, m, 12);
        set_jobs(8);
        const auto b = restricted_measure_inf(oracle, m, 12);
        set_jobs(0);
        worst_inf = std::max(worst_inf, std::abs(a.total() - 1.0));
        identical &= a.probabilities == b.probabilities && a.normalizer == b.normalizer;
        ++computed;
      } catch (const NonpositiveNormalizerError&) {
        set_jobs(0);
        ++failures;
      }
    }
  }
  r.check("prob_inf_sum", worst_inf <= 1e-12,
          "max |sum - 1| = " + g(worst_inf) + " over " + std::to_string(computed) + " estimates (N = 12)");
  r.check("prob_inf_bitwise", identical, "jobs 1 vs jobs 8 estimates bit-identical");
  r.note(std::to_string(failures) + " estimates stopped with a nonpositive normalizer");
  return r.status();
}

int criterion3() {
  Report r("c3");
  int passing = 0;
  std::string pvalues;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const WeightOracle oracle(mix_seed(3, i), DisorderSpec::lognormal(1.5 * kBetaC));
    const int n = 8;
    const PolymerSampler sampler(oracle, n);
    const auto exact = restricted_measure_n(oracle, n, n);
    std::vector<std::uint64_t> counts(exact.probabilities.size(), 0);
    CounterStream rng(mix_seed(33, i), 0);
    for (int k = 0; k < 100000; ++k) ++counts[sampler.sample(rng).vertex().index()];
    const auto test = chi_square_test(counts, exact.probabilities);
    if (test.p_value > 0.001) ++passing;
    pvalues += (pvalues.empty() ? "" : " ") + g(test.p_value);
  }
  r.check("chi_square", passing >= 9, std::to_string(passing) + "/10 environments with p > 0.001 (p = " + pvalues + ")");
  return r.status();
}

int criterion4() {
  Report r("c4");
  for (double m : {1.0, 1.5, 2.0}) {
    const double beta = m * kBetaC;
    const std::string tag = fmt::format("beta={}bc", m);
    const double h0 = solve_h(beta, 0.0);
    r.check("h0_" + tag, h0 == kBetaC / beta, "h(0) = " + fmt::format("{:.17g}", h0) + ", beta_c/beta = " +
                                                  fmt::format("{:.17g}", kBetaC / beta));
    const double f0 = laplace_rate(beta, 0.0);
    r.check("F0_" + tag, std::abs(f0) <= 1e-12, "F(0) = " + g(f0));
    auto f = [beta](double x) { return laplace_rate(beta, x); };
    const double d1 = richardson_first_derivative(f, 0.0);
    r.check("F1_" + tag, std::abs(d1) <= 1e-6, "F'(0) = " + g(d1));
    const double d2 = richardson_second_derivative(f, 0.0);
    const double stated = (2.0 * beta * kBetaC - kBetaC * kBetaC) / (beta * beta);
    r.check("F2_" + tag, std::abs(d2 - stated) <= 1e-4,
            "F''(0) = " + fmt::format("{:.10f}", d2) + " vs (2 beta beta_c - beta_c^2)/beta^2 = " +
                fmt::format("{:.10f}", stated) + "; beta_c/beta = " + fmt::format("{:.10f}", kBetaC / beta));
  }
  r.check("sigma2_bc", asymptotic_variance(kBetaC) == 1.0, "sigma^2(beta_c) = " + g(asymptotic_variance(kBetaC)));
  r.check("sigma2_2bc", asymptotic_variance(2.0 * kBetaC) == 0.75,
          "sigma^2(2 beta_c) = " + g(asymptotic_variance(2.0 * kBetaC)));
  double worst = 0.0;
  const WeightOracle flat(1, DisorderSpec::deterministic());
  for (int n = 1; n <= 20; ++n)
    for (double rr : {0.1, 0.5, 1.0})
      worst = std::max(worst, std::abs(empirical_laplace_rate(flat, n, rr) - weak_disorder_rate(rr)));
  r.check("deterministic_rate", worst <= 1e-12, "max |empirical - ln cosh r| over n <= 20 = " + g(worst));
  return r.status();
}

int criterion5() {
  Report r("c5");
  const auto curve = laplace_curve(2.0 * kBetaC, -2.0, 2.0, 201);
  double asym = 0.0, min_second = INFINITY, lowest = INFINITY;
  std::size_t argmin = 0;
  for (std::size_t i = 0; i < 201; ++i) {
    asym = std::max(asym, std::abs(curve.rate[i] - curve.rate[200 - i]));
    if (curve.rate[i] < lowest) {
      lowest = curve.rate[i];
      argmin = i;
    }
  }
  for (std::size_t i = 1; i + 1 < 201; ++i)
    min_second = std::min(min_second, curve.rate[i + 1] - 2.0 * curve.rate[i] + curve.rate[i - 1]);
  r.check("solved", curve.failures.empty(), std::to_string(curve.failures.size()) + " failed points");
  r.check("even", asym <= 1e-10, "max |F(r) - F(-r)| = " + g(asym));
  r.check("convex", min_second >= 0.0, "min second difference = " + g(min_second));
  r.check("minimum", curve.r[argmin] == 0.0 && std::abs(lowest) <= 1e-12,
          "minimum " + g(lowest) + " at r = " + g(curve.r[argmin]));
  double worst_residual = 0.0;
  for (std::size_t i = 0; i < 201; ++i)
    worst_residual = std::max(worst_residual, std::abs(h_equation(curve.beta, curve.r[i], curve.h[i])));
  r.check("residual", worst_residual <= kResidualTolerance, "max |g(h)| = " + g(worst_residual));

  const auto svg_path = cli_output("c5_plot", r);
  const auto svg = slurp(svg_path);
  r.check("svg", svg.find("<polyline") != std::string::npos && svg.find("</svg>") != std::string::npos,
          "SVG written to " + svg_path.string());

  const auto csv = read_table(cli_output("c5_curve", r));
  const auto golden = read_table(fs::path(TREEPOLY_FIXTURE_DIR) / "laplace_2bc_curve.csv");
  bool same_grid = csv.rows.size() == golden.rows.size() && !csv.rows.empty();
  double worst_golden = same_grid ? 0.0 : INFINITY;
  if (same_grid) {
    const auto f = csv.column("F"), fg = golden.column("F"), h = csv.column("h"), hg = golden.column("h");
    for (std::size_t i = 0; i < f.size(); ++i)
      worst_golden = std::max({worst_golden, std::abs(f[i] - fg[i]), std::abs(h[i] - hg[i])});
  }
  r.check("golden", worst_golden <= 1e-12, "max deviation from pinned curve = " + g(worst_golden));
  return r.status();
}

double median_log_z_slope_of(const fs::path& path) {
  const auto t = read_table(path);
  const auto ks = t.column("k");
  const auto med = t.column("log_z_q50");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < ks.size(); ++i)
    if (ks[i] >= 1) {
      x.push_back(ks[i]);
      y.push_back(med[i]);
    }
  return least_squares_slope(x, y);
}

int criterion6() {
  Report r("c6");
  const auto t0 = std::chrono::steady_clock::now();
  const double weak = median_log_z_slope_of(cli_output("c6_weak", r));
  const double critical = median_log_z_slope_of(cli_output("c6_critical", r));
  const double strong = median_log_z_slope_of(cli_output("c6_strong", r));
  const double elapsed = seconds_since(t0);
  r.check("weak", weak > -0.01, "slope(0.5 beta_c) = " + g(weak));
  r.check("strong", strong < -0.05, "slope(1.5 beta_c) = " + g(strong));
  r.check("critical", strong < critical && critical < weak, "slope(beta_c) = " + g(critical));
  r.check("runtime", elapsed < 600.0, "three ensembles in " + g(elapsed) + " s (target < 600 s)");
  return r.status();
}

int criterion7() {
  Report r("c7");
  const auto t = read_table(cli_output("c7_ratio", r));
  const auto ks = t.column("k");
  const auto frac = t.column("valid_fraction");
  const auto med = t.column("median_ratio");
  const auto dist = t.column("distance");
  bool monotone = true;
  std::string fracs, meds;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (i && frac[i] < frac[i - 1]) monotone = false;
    fracs += fmt::format("{}k={}:{}", i ? " " : "", ks[i], g(frac[i]));
    meds += fmt::format("{}k={}:{}", i ? " " : "", ks[i], g(med[i]));
  }
  const double c = std::stod(t.meta.at("target_c"));
  r.check("target", std::abs(c - 0.6777) < 5e-5, "c = " + g(c));
  r.check("valid_fraction", monotone, "fraction of D_k > 0 non-decreasing (" + fracs + ")");
  r.check("median_ratio", ks.size() == 4 && dist[3] < dist[0],
          "|median R_k - c|: k=8 " + g(dist[0]) + ", k=20 " + g(dist[3]) + " (medians " + meds + ")");
  return r.status();
}

int criterion8() {
  Report r("c8");
  const auto weak = read_table(cli_output("c8_weak", r));
  const auto control = read_table(cli_output("c8_control", r));
  const double weak_ks = std::stod(weak.meta.at("median_ks"));
  const double control_ks = std::stod(control.meta.at("median_ks"));
  r.check("weak", weak_ks < 0.1, "median KS over 20 environments = " + g(weak_ks));
  r.check("control", control_ks < 0.01, "deterministic KS = " + g(control_ks));
  r.note("KS is taken on lattice midpoints; plain KS (bounded below by half the largest atom): weak " +
         weak.meta.at("median_raw_ks") + ", control " + control.meta.at("median_raw_ks"));
  return r.status();
}

int criterion9() {
  Report r("c9");
  const Character f({1, 2});
  int better = 0, unusable = 0;
  std::vector<double> gap8, gap20;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const WeightOracle oracle(mix_seed(9, i), DisorderSpec::lognormal(kBetaC));
    try {
      const double inf = character_expectation_inf(oracle, f, 24);
      const double e8 = character_expectation_n(oracle, 8, f);
      const double e20 = character_expectation_n(oracle, 20, f);
      gap8.push_back(std::abs(e8 - inf));
      gap20.push_back(std::abs(e20 - inf));
      if (gap20.back() < gap8.back()) ++better;
    } catch (const NonpositiveNormalizerError&) {
      ++unusable;
    }
  }
  r.check("trend", better >= 35,
          fmt::format("{}/50 seeds with |E_20 - E_inf| < |E_8 - E_inf| (need 35); median gaps {} -> {}", better,
                      g(gap8.empty() ? NAN : median(gap8)), g(gap20.empty() ? NAN : median(gap20))));
  if (unusable) r.note(std::to_string(unusable) + " seeds had a nonpositive normalizer at N = 24");
  return r.status();
}

int criterion10() {
  Report r("c10");
  for (const auto& run : cli_runs()) {
    const auto one = run_path(run, 1), eight = run_path(run, 8);
    const int c1 = run_cli(run.args + " --jobs 1 --out " + one.string());
    const int c8 = run_cli(run.args + " --jobs 8 --out " + eight.string());
    const auto a = slurp(one), b = slurp(eight);
    r.check(run.name, c1 == 0 && c8 == 0 && !a.empty() && a == b,
            fmt::format("{} bytes, jobs 1 vs jobs 8 {}", a.size(), a == b ? "identical" : "differ"));
  }
  return r.status();
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<std::string, std::function<int()>> criteria{
      {"c1", criterion1}, {"c2", criterion2}, {"c3", criterion3}, {"c4", criterion4},  {"c5", criterion5},
      {"c6", criterion6}, {"c7", criterion7}, {"c8", criterion8}, {"c9", criterion9}, {"c10", criterion10}};
  if (argc != 2 || !criteria.count(argv[1])) {
    std::cerr << "usage: acceptance c1..c10\n";
    return 2;
  }
  try {
    return criteria.at(argv[1])();
  } catch (const std::exception& e) {
    std::cout << "FAIL " << argv[1] << ": " << e.what() << std::endl;
    return 1;
  }
}
