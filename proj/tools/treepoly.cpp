// treepoly command-line tool. See README.md for the subcommands and flags.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "treepoly/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace treepoly::cli {

// Betas this close to beta_c are taken to be beta_c exactly, so that a
// printed value such as 1.1774100226 classifies as critical.
constexpr double kSnapTolerance = 1e-10;

/// "bc", "1.5bc", "1.5*bc" or a plain number.
double parse_beta(std::string text) {
  const double bc = critical_beta();
  std::erase(text, ' ');
  try {
    if (text.size() >= 2 && text.compare(text.size() - 2, 2, "bc") == 0) {
      std::string factor = text.substr(0, text.size() - 2);
      if (!factor.empty() && factor.back() == '*') factor.pop_back();
      if (factor.empty()) return bc;
      std::size_t used = 0;
      const double m = std::stod(factor, &used);
      if (used != factor.size()) throw std::invalid_argument(text);
      return m == 1.0 ? bc : m * bc;
    }
    std::size_t used = 0;
    const double beta = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return std::abs(beta - bc) <= kSnapTolerance ? bc : beta;
  } catch (const std::logic_error&) {
    throw ConfigError("cannot parse beta '" + text + "'");
  }
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoi(item));
    } catch (const std::logic_error&) {
      throw ConfigError("cannot parse integer list '" + text + "'");
    }
  }
  return out;
}

/// "1,2;3" -> {1,2}, {3}
std::vector<Character> parse_characters(const std::string& text) {
  std::vector<Character> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) out.emplace_back(parse_int_list(item));
  return out;
}

struct RunConfig {
  std::string dist = "lognormal";
  std::string beta = "bc";
  double a = 0.1;
  double p = 0.5;
  std::optional<DisorderSpec> spec_override;  // from a config file "spec" object
  int depth = 12;
  int replicates = 100;
  std::uint64_t seed = 1;
  std::size_t paths = 100000;
  double r_min = -2.0;
  double r_max = 2.0;
  int steps = 201;
  int big_n = 16;
  int level = 0;  // 0: min(depth, 8)
  std::string chars;
  std::string depths;
  std::string betas = "bc,1.5bc,2bc";
  bool overlay = false;
  std::string format;
  std::string out;
  int jobs = 0;

  DisorderSpec spec() const {
    if (spec_override) return *spec_override;
    if (dist == "lognormal") return DisorderSpec::lognormal(parse_beta(beta));
    if (dist == "twopoint") return DisorderSpec::two_point(a, p);
    if (dist == "deterministic") return DisorderSpec::deterministic();
    throw ConfigError("unknown --dist '" + dist + "' (lognormal, twopoint, deterministic)");
  }

  int measure_level() const { return level > 0 ? level : std::min(depth, 8); }
};

/// The resolved run parameters written into every output. Accepted back by
/// --config, so outputs can be regenerated from their own headers.
json resolved(const std::string& command, const RunConfig& c) {
  json j = {{"command", command}, {"spec", c.spec().to_json()}};
  auto ensemble = [&] {
    j["depth"] = c.depth;
    j["replicates"] = c.replicates;
    j["seed"] = c.seed;
  };
  if (command == "simulate") ensemble();
  if (command == "measure") {
    j["depth"] = c.depth;
    j["seed"] = c.seed;
    j["level"] = c.measure_level();
    j["big_n"] = c.big_n;
    j["chars"] = c.chars;
  }
  if (command == "laplace" || command == "plot") {
    j["r_min"] = c.r_min;
    j["r_max"] = c.r_max;
    j["steps"] = c.steps;
    j["overlay"] = c.overlay;
    if (command == "plot") {
      json betas = json::array();
      std::stringstream ss(c.betas);
      std::string item;
      while (std::getline(ss, item, ',')) betas.push_back(parse_beta(item));
      j["betas"] = betas;
      j.erase("spec");
    }
  }
  if (command == "clt" || command == "variance") {
    ensemble();
    j["paths"] = c.paths;
  }
  if (command == "ratio") {
    ensemble();
    j["depths"] = c.depths;
  }
  j["format"] = c.format;
  return j;
}

/// Copies config-file values into `c` for every flag not given on the
/// command line.
void apply_config_file(const std::string& path, RunConfig& c, const CLI::App& app) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  auto given = [&](const std::string& flag) {
    const auto* opt = app.get_option_no_throw("--" + flag);
    return opt != nullptr && opt->count() > 0;
  };
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      std::string flag = key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      const json& v = it.value();
      if (key == "command") continue;
      if (key == "spec") {
        if (!given("dist") && !given("beta") && !given("a") && !given("p"))
          c.spec_override = DisorderSpec::from_json(v);
        continue;
      }
      if (key == "betas" && v.is_array()) {
        if (given("betas")) continue;
        std::string joined;
        for (const auto& b : v) joined += (joined.empty() ? "" : ",") + io::num(b.get<double>());
        c.betas = joined;
        continue;
      }
      if (given(flag)) continue;
      if (key == "dist") c.dist = v.get<std::string>();
      else if (key == "beta") c.beta = v.is_string() ? v.get<std::string>() : io::num(v.get<double>());
      else if (key == "a") c.a = v.get<double>();
      else if (key == "p") c.p = v.get<double>();
      else if (key == "depth") c.depth = v.get<int>();
      else if (key == "replicates") c.replicates = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "paths") c.paths = v.get<std::size_t>();
      else if (key == "r_min") c.r_min = v.get<double>();
      else if (key == "r_max") c.r_max = v.get<double>();
      else if (key == "steps") c.steps = v.get<int>();
      else if (key == "big_n") c.big_n = v.get<int>();
      else if (key == "level") c.level = v.get<int>();
      else if (key == "chars") c.chars = v.get<std::string>();
      else if (key == "depths") c.depths = v.get<std::string>();
      else if (key == "overlay") c.overlay = v.get<bool>();
      else if (key == "format") c.format = v.get<std::string>();
      else if (key == "out") c.out = v.get<std::string>();
      else if (key == "jobs") c.jobs = v.get<int>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  // Flags given explicitly replace a config-file spec.
  if (c.spec_override && (given("dist") || given("beta") || given("a") || given("p")))
    c.spec_override.reset();
}

/// Output sink: the --out file, or stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_.open(path, std::ios::binary);
    if (!file_) throw ConfigError("cannot write '" + path + "'");
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

std::string format_or(const RunConfig& c, const std::string& fallback,
                      std::initializer_list<const char*> allowed) {
  const std::string f = c.format.empty() ? fallback : c.format;
  for (const char* a : allowed)
    if (f == a) return f;
  throw ConfigError("format '" + f + "' is not available for this command");
}

json with_header(json body, const std::string& command, const json& config) {
  body["schema_version"] = kSchemaVersion;
  body["tool_version"] = tool_version();
  body["command"] = command;
  body["run_config"] = config;
  return body;
}

int cmd_classify(const RunConfig& c) {
  const auto spec = c.spec();
  const auto format = format_or(c, "csv", {"csv", "json"});
  const double bc = critical_beta();
  std::optional<double> s2;
  if (sigma_squared(spec) > 0.0) s2 = sigma_squared(spec);
  const auto config = resolved("classify", c);
  Output out(c.out);
  auto& os = out.stream();
  if (format == "json") {
    json body = {{"E_XlnX", disorder_parameter(spec)},
                 {"ln2", kLn2},
                 {"sigma2", sigma_squared(spec)},
                 {"beta_c", bc},
                 {"regime", std::string(to_string(classify(spec)))}};
    if (s2) body["seneta_heyde_c"] = seneta_heyde_constant(spec);
    os << with_header(body, "classify", config).dump(2) << "\n";
    return 0;
  }
  io::write_header(os, "classify", config);
  os << "quantity,value\n";
  os << "E_XlnX," << io::num(disorder_parameter(spec)) << "\n";
  os << "ln2," << io::num(kLn2) << "\n";
  os << "sigma2," << io::num(sigma_squared(spec)) << "\n";
  os << "beta_c," << io::num(bc) << "\n";
  if (s2) os << "seneta_heyde_c," << io::num(seneta_heyde_constant(spec)) << "\n";
  os << "regime," << to_string(classify(spec)) << "\n";
  return 0;
}

EnsembleConfig ensemble_config(const RunConfig& c) {
  return {c.spec(), c.depth, c.replicates, c.seed};
}

int cmd_simulate(const RunConfig& c) {
  const auto format = format_or(c, "csv", {"csv", "json"});
  const auto config = resolved("simulate", c);
  const auto summary = run_ensemble(ensemble_config(c));
  Output out(c.out);
  if (format == "json") {
    out.stream() << with_header(summary.to_json(), "simulate", config).dump(2) << "\n";
  } else {
    io::write_header(out.stream(), "simulate", config);
    io::write_summary_csv(out.stream(), summary);
  }
  return 0;
}

int cmd_measure(const RunConfig& c) {
  format_or(c, "csv", {"csv"});
  const auto config = resolved("measure", c);
  const WeightOracle oracle(c.seed, c.spec());
  const int m = c.measure_level();
  const auto chars = parse_characters(c.chars);

  // Everything that can fail is computed before any file is written.
  const auto finite = restricted_measure_n(oracle, c.depth, m);
  std::optional<RestrictedMeasure> infinite;
  std::string inf_error;
  double inf_normalizer = 0.0;
  try {
    infinite = restricted_measure_inf(oracle, m, c.big_n);
  } catch (const NonpositiveNormalizerError& e) {
    inf_error = e.what();
    inf_normalizer = e.normalizer();
  }
  std::vector<io::CharacterRow> rows;
  for (const auto& f : chars) {
    io::CharacterRow row{f, character_expectation_n(oracle, c.depth, f), std::nan("")};
    if (infinite) row.infinite = character_expectation(*infinite, f);
    rows.push_back(row);
  }

  auto emit = [&](std::ostream& os, const std::string& what) {
    io::write_header(os, "measure " + what, config);
    if (what == "prob_n") io::write_measure_csv(os, finite);
    if (what == "prob_inf") io::write_measure_csv(os, *infinite);
    if (what == "characters") io::write_characters_csv(os, rows);
  };
  std::vector<std::string> parts{"prob_n"};
  if (infinite) parts.push_back("prob_inf");
  if (!chars.empty()) parts.push_back("characters");
  if (c.out.empty() || c.out == "-") {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) std::cout << "\n";
      emit(std::cout, parts[i]);
    }
  } else {
    fs::create_directories(c.out);
    for (const auto& part : parts) {
      Output file((fs::path(c.out) / (part + ".csv")).string());
      emit(file.stream(), part);
    }
  }
  if (!infinite) {
    std::cerr << "treepoly: " << inf_error << " (normalizer " << io::num(inf_normalizer) << ", N = "
              << c.big_n << ")\n";
    return NumericError("").exit_code();
  }
  return 0;
}

std::vector<double> plot_betas(const RunConfig& c) {
  std::vector<double> out;
  std::stringstream ss(c.betas);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_beta(item));
  if (out.empty()) throw ConfigError("--betas is empty");
  return out;
}

int write_curves(const RunConfig& c, const std::string& command, const std::vector<double>& betas,
                 const std::string& default_format) {
  const auto format = format_or(c, default_format, {"csv", "json", "svg"});
  const auto config = resolved(command, c);
  std::vector<LaplaceCurve> curves;
  for (double beta : betas) curves.push_back(laplace_curve(beta, c.r_min, c.r_max, c.steps));

  std::size_t failures = 0, points = 0;
  for (const auto& curve : curves) {
    failures += curve.failures.size();
    points += curve.r.size();
    for (std::size_t i : curve.failures)
      std::cerr << "treepoly: solve failed at beta " << io::num(curve.beta) << ", r " << io::num(curve.r[i]) << "\n";
    for (std::size_t i : curve.flagged)
      std::cerr << "treepoly: slope check off at beta " << io::num(curve.beta) << ", r " << io::num(curve.r[i]) << "\n";
  }

  Output out(c.out);
  auto& os = out.stream();
  if (format == "json") {
    os << with_header({{"curves", io::laplace_json(curves)}}, command, config).dump(2) << "\n";
  } else if (format == "svg") {
    std::ostringstream header;
    io::write_header(header, command, config, "  ");
    io::write_laplace_svg(os, curves, c.overlay, header.str());
  } else {
    io::write_header(os, command, config);
    io::write_laplace_csv(os, curves, c.overlay);
  }
  // More than 1% failed points is a numeric failure.
  if (100 * failures > points) return NumericError("").exit_code();
  return 0;
}

int cmd_laplace(const RunConfig& c) {
  const auto spec = c.spec();
  if (!spec.is_lognormal()) throw ConfigError("laplace needs --dist lognormal");
  return write_curves(c, "laplace", {spec.beta()}, "csv");
}

int cmd_plot(const RunConfig& c) { return write_curves(c, "plot", plot_betas(c), "svg"); }

int cmd_clt(const RunConfig& c) {
  const auto format = format_or(c, "csv", {"csv", "json"});
  const auto config = resolved("clt", c);
  const auto report = clt_report(ensemble_config(c), c.paths);
  Output out(c.out);
  if (format == "json") {
    out.stream() << with_header(report.to_json(), "clt", config).dump(2) << "\n";
  } else {
    io::write_header(out.stream(), "clt", config);
    io::write_clt_csv(out.stream(), report);
  }
  return 0;
}

int cmd_variance(const RunConfig& c) {
  const auto format = format_or(c, "csv", {"csv", "json"});
  const auto config = resolved("variance", c);
  const auto report = variance_report(ensemble_config(c), c.paths);
  Output out(c.out);
  if (format == "json") {
    out.stream() << with_header(report.to_json(), "variance", config).dump(2) << "\n";
  } else {
    io::write_header(out.stream(), "variance", config);
    io::write_variance_csv(out.stream(), report);
  }
  return 0;
}

int cmd_ratio(const RunConfig& c) {
  const auto format = format_or(c, "csv", {"csv", "json"});
  const auto config = resolved("ratio", c);
  auto depths = parse_int_list(c.depths);
  if (depths.empty())
    for (int k = 1; k <= c.depth; ++k) depths.push_back(k);
  const auto report = seneta_heyde_report(ensemble_config(c), depths);
  Output out(c.out);
  if (format == "json") {
    out.stream() << with_header(report.to_json(), "ratio", config).dump(2) << "\n";
  } else {
    io::write_header(out.stream(), "ratio", config);
    io::write_seneta_heyde_csv(out.stream(), report);
  }
  return 0;
}

void add_options(CLI::App& sub, RunConfig& c, std::string& config_path) {
  sub.add_option("--config", config_path, "JSON config file; flags override its values");
  sub.add_option("--dist", c.dist, "lognormal | twopoint | deterministic")->capture_default_str();
  sub.add_option("--beta", c.beta, "lognormal beta: number, 'bc', or a multiple like '1.5bc'")
      ->capture_default_str();
  sub.add_option("--a", c.a, "two-point low value a in (0,1)")->capture_default_str();
  sub.add_option("--p", c.p, "two-point probability of a")->capture_default_str();
  sub.add_option("--depth", c.depth, "tree depth n")->capture_default_str();
  sub.add_option("--replicates", c.replicates, "number of environments R")->capture_default_str();
  sub.add_option("--seed", c.seed, "base seed")->capture_default_str();
  sub.add_option("--paths", c.paths, "sampled paths per environment")->capture_default_str();
  sub.add_option("--r-min", c.r_min, "smallest r")->capture_default_str();
  sub.add_option("--r-max", c.r_max, "largest r")->capture_default_str();
  sub.add_option("--steps", c.steps, "number of r grid points")->capture_default_str();
  sub.add_option("--big-n", c.big_n, "depth N of the D_N used for prob_inf")->capture_default_str();
  sub.add_option("--level", c.level, "rectangle depth m (default min(depth, 8))");
  sub.add_option("--chars", c.chars, "character sets, e.g. '1,2;3'");
  sub.add_option("--depths", c.depths, "report depths, e.g. '8,12,16,20' (default 1..depth)");
  sub.add_option("--betas", c.betas, "plot betas, comma separated")->capture_default_str();
  sub.add_flag("--overlay", c.overlay, "add ln cosh r to curve output");
  sub.add_option("--format", c.format, "csv | json | svg");
  sub.add_option("--out", c.out, "output file (directory for measure); stdout if omitted");
  sub.add_option("--jobs", c.jobs, "worker threads, 0 = all cores")->capture_default_str();
}

int run(int argc, char** argv) {
  CLI::App app{"Directed polymers on multiplicative cascades"};
  app.set_version_flag("--version", std::string("treepoly ") + tool_version());
  app.require_subcommand(1);

  RunConfig config;
  std::string config_path;
  const std::map<std::string, std::pair<std::string, std::function<int(const RunConfig&)>>> commands{
      {"classify", {"print disorder parameters and the regime", cmd_classify}},
      {"simulate", {"per-depth ensemble table of Z_k, D_k and R_k", cmd_simulate}},
      {"measure", {"rectangle probabilities and character expectations", cmd_measure}},
      {"laplace", {"h(r) and F(r) for one beta", cmd_laplace}},
      {"plot", {"F(r) curves for several betas (SVG)", cmd_plot}},
      {"clt", {"KS distance of (s)_n/sqrt(n) to N(0,1) per environment", cmd_clt}},
      {"variance", {"Var((s)_n)/n per environment against its conjectured limit", cmd_variance}},
      {"ratio", {"sqrt(k) Z_k / D_k at critical disorder", cmd_ratio}},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.first);
    add_options(*sub, config, config_path);
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ConfigError("").exit_code();
  }

  for (const auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    try {
      if (!config_path.empty()) apply_config_file(config_path, config, *sub);
      set_jobs(config.jobs);
      return commands.at(name).second(config);
    } catch (const Error& e) {
      std::cerr << "treepoly " << name << ": " << e.what() << "\n";
      return e.exit_code();
    } catch (const fs::filesystem_error& e) {
      std::cerr << "treepoly " << name << ": " << e.what() << "\n";
      return ConfigError("").exit_code();
    }
  }
  return ConfigError("").exit_code();
}

}  // namespace treepoly::cli

int main(int argc, char** argv) { return treepoly::cli::run(argc, argv); }
