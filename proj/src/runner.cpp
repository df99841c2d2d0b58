#include "cbilab/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "cbilab/limitlab.hpp"
#include "cbilab/mechanisms.hpp"
#include "cbilab/renormalize.hpp"
#include "cbilab/sampling.hpp"

namespace cbilab {

namespace {

using nlohmann::json;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

ImmigrationMechanism immigration_from_config(const Config& cfg) {
  std::string preset = cfg.str("immigration.preset");
  auto params = cfg.section_numbers("immigration");
  return make_immigration_preset(preset, params);
}

BranchingMechanism branching_from_config(const Config& cfg) {
  std::string preset = cfg.str_or("branching.preset", "zero");
  auto params = cfg.section_numbers("branching");
  return make_branching_preset(preset, params);
}

VerifyOptions verify_options_from_config(const Config& cfg) {
  VerifyOptions opt;
  opt.s_grid = cfg.array_or("s_grid", {1.0});
  opt.t_list = cfg.array_or("t_list", {25, 50, 100, 200});
  opt.n_paths = static_cast<std::size_t>(cfg.number_or("paths", 20000));
  opt.level = cfg.number_or("level", 0.01);
  opt.eps = cfg.number_or("epsilon", 0.0);
  opt.jump_rate_cap = cfg.number_or("jump_rate_cap", 50.0);
  opt.seed = static_cast<std::uint64_t>(cfg.number_or("seed", 20240815));
  opt.collect_samples = cfg.flag_or("write_samples", false);
  if (opt.n_paths < 100) throw std::invalid_argument("config: paths must be >= 100");
  if (opt.t_list.empty()) throw std::invalid_argument("config: t_list must be nonempty");
  for (std::size_t i = 1; i < opt.t_list.size(); ++i)
    if (opt.t_list[i] <= opt.t_list[i - 1])
      throw std::invalid_argument("config: t_list must be increasing");
  return opt;
}

void write_table_csv(const std::string& path, const ConvergenceTable& tab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write output file '" + path + "'");
  out << "t,s,discrepancy,sample_size,threshold,pass\n";
  for (const auto& r : tab.rows) {
    out << fmt(r.t) << ',' << fmt(r.s) << ',' << fmt(r.discrepancy) << ','
        << fmt(r.sample_size) << ',' << fmt(r.threshold) << ','
        << (r.pass ? 1 : 0) << '\n';
  }
}

json table_to_json(const ConvergenceTable& tab) {
  json rows = json::array();
  for (const auto& r : tab.rows) {
    rows.push_back({{"t", r.t},
                    {"s", r.s},
                    {"discrepancy", r.discrepancy},
                    {"sample_size", r.sample_size},
                    {"threshold", r.threshold},
                    {"pass", r.pass}});
  }
  json joint = json::array();
  for (const auto& c : tab.joint) {
    joint.push_back({{"y1", c.y1},
                     {"y2", c.y2},
                     {"empirical", c.empirical},
                     {"exact", c.exact},
                     {"stderr", c.stderr_},
                     {"pass", c.pass}});
  }
  return {{"experiment", tab.experiment},
          {"rows", rows},
          {"joint", joint},
          {"monotone_trend", tab.monotone_trend},
          {"note", tab.note},
          {"verdict", tab.verdict ? "pass" : "fail"}};
}

void print_rows(const ConvergenceTable& tab) {
  for (const auto& r : tab.rows) {
    std::printf("  t=%-10g s=%-6g discrepancy=%-12.6g threshold=%-10.6g %s\n", r.t, r.s,
                r.discrepancy, r.threshold, r.pass ? "ok" : "FAIL");
  }
  for (const auto& c : tab.joint) {
    std::printf("  joint y=(%g,%g) empirical=%.5f exact=%.5f (3se=%.5f) %s\n", c.y1, c.y2,
                c.empirical, c.exact, 3.0 * c.stderr_, c.pass ? "ok" : "FAIL");
  }
  if (!tab.note.empty()) std::printf("  note: %s\n", tab.note.c_str());
}

ConvergenceTable run_simulate(const Config& cfg, const std::string& outdir) {
  std::string process = cfg.str_or("process", "subordinator");
  std::size_t n = static_cast<std::size_t>(cfg.number_or("paths", 100));
  std::uint64_t seed = static_cast<std::uint64_t>(cfg.number_or("seed", 20240815));
  double T = cfg.number_or("T", 1.0);
  std::vector<double> grid = cfg.array_or("grid", {});
  if (grid.empty()) {
    for (int i = 1; i <= 10; ++i) grid.push_back(T * i / 10.0);
  }
  bool atoms_wanted = cfg.flag_or("record_atoms", true);

  std::function<PathSample(std::uint64_t)> make_path;
  if (process == "subordinator") {
    auto phi = immigration_from_config(cfg);
    double eps = cfg.number_or("epsilon", 0.0);
    if (eps <= 0.0) eps = pick_truncation_eps(phi, cfg.number_or("jump_rate_cap", 1e6));
    make_path = [=](std::uint64_t i) {
      return sample_subordinator(phi, grid.back(), grid, eps, {seed, i}, atoms_wanted);
    };
  } else if (process == "cb") {
    auto psi = branching_from_config(cfg);
    double x0 = cfg.number_or("x0", 1.0);
    make_path = [=](std::uint64_t i) { return sample_cb(psi, x0, grid, {seed, i}); };
  } else if (process == "cbi") {
    auto psi = branching_from_config(cfg);
    auto phi = immigration_from_config(cfg);
    double eps = cfg.number_or("epsilon", 0.0);
    if (eps <= 0.0) eps = pick_truncation_eps(phi, cfg.number_or("jump_rate_cap", 1e6));
    make_path = [=](std::uint64_t i) {
      return sample_cbi_shotnoise(psi, phi, grid, eps, {seed, i}, atoms_wanted);
    };
  } else if (process == "esn-grid" || process == "esn-atoms") {
    double gamma = cfg.number_or("gamma", 0.0);
    double scale = cfg.number_or("mu_scale", 1.0);
    EsnMeasure mu = EsnMeasure::reciprocal_tail(scale);
    double eps = cfg.number_or("epsilon", 1e-3);
    bool use_atoms = process == "esn-atoms";
    make_path = [=](std::uint64_t i) {
      return use_atoms ? sample_esn_atoms(gamma, mu, grid.back(), grid, eps, {seed, i})
                       : sample_esn_grid(gamma, mu, grid, {seed, i});
    };
  } else {
    throw std::invalid_argument("unknown process '" + process + "'");
  }

  auto paths = sample_ensemble(n, make_path, 0);

  std::ofstream samples(outdir + "/samples.csv", std::ios::binary);
  if (!samples) throw std::runtime_error("cannot write output file samples.csv");
  samples << "stream,time,value\n";
  std::ofstream atoms(outdir + "/atoms.csv", std::ios::binary);
  atoms << "stream,time,mark\n";
  for (std::size_t p = 0; p < paths.size(); ++p) {
    for (std::size_t i = 0; i < paths[p].times.size(); ++i)
      samples << p << ',' << fmt(paths[p].times[i]) << ',' << fmt(paths[p].values[i]) << '\n';
    for (const auto& [u, mark] : paths[p].atoms)
      atoms << p << ',' << fmt(u) << ',' << fmt(mark) << '\n';
  }

  ConvergenceTable tab;
  tab.experiment = "simulate";
  tab.note = process + ": " + std::to_string(n) + " paths to horizon " + fmt(grid.back());
  tab.rows.push_back({grid.back(), 0.0, 0.0, static_cast<double>(n), 0.0, true});
  return tab;
}

ConvergenceTable run_mech_probe(const Config& cfg) {
  auto phi = immigration_from_config(cfg);
  ConvergenceTable tab;
  tab.experiment = "mech-probe";
  auto scaled = [&phi](double x) { return x * phi.phi_of_exp_neg(x); };
  RvProbe probe = rv_index_probe([&phi](double q) { return phi.phi(q); }, ProbeEnd::Zero);
  tab.rows.push_back({0.0, 0.0, std::abs(probe.index - phi.rv_index_at0), probe.dispersion,
                      0.05, std::abs(probe.index - phi.rv_index_at0) <= 0.05});
  RvProbe level_probe = rv_index_probe(scaled, ProbeEnd::Infinity);
  tab.note = "phi rv-index at 0: " + fmt(probe.index) + "; x Phi(e^-x) level at 1e8: " +
             fmt(level_probe.level) + "; classification: " + regime_name(phi.regime);
  if (!phi.log_moment && !phi.nu.is_zero()) {
    double u = 1e8;
    double ratio = phi.nu.tail(u) / phi.phi_from_tail(1.0 / u);
    tab.rows.push_back({u, 0.0, std::abs(ratio - 1.0), ratio, 0.1,
                        ratio >= 0.9 && ratio <= 1.1});
  }
  tab.verdict = true;
  for (const auto& r : tab.rows) tab.verdict = tab.verdict && r.pass;
  return tab;
}

ConvergenceTable dispatch(const Config& cfg, const std::string& experiment,
                          const std::string& outdir) {
  if (experiment == "simulate") return run_simulate(cfg, outdir);
  if (experiment == "verify-subordinator") {
    return verify_subordinator_limit(immigration_from_config(cfg),
                                     verify_options_from_config(cfg));
  }
  if (experiment == "verify-cbi-esn") {
    return verify_cbi_esn_limit(branching_from_config(cfg), immigration_from_config(cfg),
                                verify_options_from_config(cfg));
  }
  if (experiment == "verify-prop1") {
    std::vector<double> lambda_grid =
        cfg.array_or("lambda_grid", {0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0});
    std::vector<double> t_list = cfg.array_or("t_list", {100, 1000, 10000});
    return verify_prop1_transforms(cfg.number_or("alpha", 1.0), cfg.number_or("beta", 1.0),
                                   cfg.number_or("d", 1.0), cfg.number_or("dprime", 1.0),
                                   cfg.number_or("s", 1.0), lambda_grid, t_list,
                                   cfg.number_or("x0", 1.0));
  }
  if (experiment == "generator-table") {
    auto psi = branching_from_config(cfg);
    auto phi = immigration_from_config(cfg);
    TestFunction f = TestFunction::bump(
        cfg.number_or("f_a1", 0.5), cfg.number_or("f_a2", 1.0), cfg.number_or("f_a3", 2.0),
        cfg.number_or("f_a4", 3.0));
    std::vector<double> x_grid = cfg.array_or("x_grid", {});
    if (x_grid.empty()) {
      for (int i = 0; i < 20; ++i) x_grid.push_back(4.0 * i / 19.0);
    }
    std::vector<double> t_list = cfg.array_or("t_list", {10, 100, 1000});
    return generator_convergence_table(psi, phi, f, x_grid, t_list);
  }
  if (experiment == "fastjump") {
    std::vector<double> t_list = cfg.array_or("t_list", {100, 1000, 10000});
    return fastjump_check(immigration_from_config(cfg), cfg.number_or("x", 1.0),
                          cfg.number_or("v", 2.0), t_list);
  }
  if (experiment == "mech-probe") return run_mech_probe(cfg);
  throw std::invalid_argument("unknown experiment '" + experiment + "'");
}

}  // namespace

std::string preset_catalogue_text() {
  std::ostringstream out;
  out << "immigration presets (name | parameters | classification | log moment):\n";
  for (const auto& info : immigration_preset_catalogue()) {
    out << "  " << info.name << " | " << (info.parameters.empty() ? "-" : info.parameters)
        << " | " << info.classification << " | " << (info.log_moment ? "yes" : "no") << "\n";
  }
  out << "branching presets: zero | linear(b) | feller(b, sigma2) | stable_branching(d, alpha)\n";
  return out.str();
}

int run_experiment(const std::string& config_path) {
  Config cfg;
  std::string experiment, outdir;
  try {
    cfg = Config::parse_file(config_path);
    experiment = cfg.str("experiment");
    outdir = cfg.str_or("output", "out");
    std::filesystem::create_directories(outdir);
    std::ofstream probe(outdir + "/.write_probe");
    if (!probe) throw std::runtime_error("cannot write to output directory '" + outdir + "'");
    probe.close();
    std::filesystem::remove(outdir + "/.write_probe");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  try {
    ConvergenceTable tab = dispatch(cfg, experiment, outdir);
    std::printf("%s: %s\n", tab.experiment.c_str(), tab.verdict ? "pass" : "fail");
    print_rows(tab);
    write_table_csv(outdir + "/table.csv", tab);
    if (!tab.samples.empty()) {
      std::ofstream samples(outdir + "/samples.csv", std::ios::binary);
      if (!samples) throw std::runtime_error("cannot write output file samples.csv");
      samples << "s,stream,value\n";
      for (const auto& [s, values] : tab.samples)
        for (std::size_t p = 0; p < values.size(); ++p)
          samples << fmt(s) << ',' << p << ',' << fmt(values[p]) << '\n';
    }
    json report = table_to_json(tab);
    report["params"] = {{"config", config_path}};
    std::ofstream rep(outdir + "/report.json", std::ios::binary);
    if (!rep) throw std::runtime_error("cannot write output file report.json");
    rep << report.dump(2) << "\n";
    return tab.verdict ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace cbilab
