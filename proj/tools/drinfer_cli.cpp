// Command-line interface: test | bands | simulate subcommands with JSON
// configs, CSV inputs, and machine-readable outputs.
#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "drinfer/conf_bands.hpp"
#include "drinfer/data_model.hpp"
#include "drinfer/eif_estimators.hpp"
#include "drinfer/sim_harness.hpp"
#include "drinfer/sup_test.hpp"

namespace {

using nlohmann::json;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

/// FNV-1a over the canonical serialized config, embedded in every output.
/// The output path and thread count never affect the results, so they are
/// excluded: reruns into a different file keep the same hash.
std::string config_hash(const json& config) {
  json canonical = config;
  canonical.erase("output");
  canonical.erase("threads");
  const std::string s = canonical.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

struct CommonArgs {
  std::string config_path;
  std::string output_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

json load_config(const CommonArgs& args) {
  json config = json::object();
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) {
      throw std::invalid_argument("cannot open config file: " +
                                  args.config_path);
    }
    in >> config;
  }
  // CLI flags override config fields
  if (args.seed) config["seed"] = *args.seed;
  if (args.threads) config["threads"] = *args.threads;
  if (!args.output_path.empty()) config["output"] = args.output_path;
  if (!config.contains("seed")) {
    throw std::invalid_argument("seed is required (flag --seed or config)");
  }
  return config;
}

drinfer::ObservationSet load_input(const json& config) {
  if (!config.contains("input")) {
    throw std::invalid_argument("input CSV path is required");
  }
  const std::vector<std::string> covariates =
      config.value("covariates", std::vector<std::string>{});
  return drinfer::load_csv(config["input"].get<std::string>(), covariates,
                           config.value("exposure", std::string("a")),
                           config.value("outcome", std::string("y")));
}

drinfer::EstimatorKind parse_kind(const std::string& name) {
  if (name == "plugin") return drinfer::EstimatorKind::plugin;
  if (name == "one_step") return drinfer::EstimatorKind::one_step;
  if (name == "tml") return drinfer::EstimatorKind::tml;
  throw std::invalid_argument("unknown estimator kind: " + name);
}

drinfer::KappaPolicy parse_kappa(const json& config) {
  if (!config.contains("kappa") || config["kappa"] == "adaptive") {
    return drinfer::KappaPolicy::data_adaptive();
  }
  const double value = config["kappa"].get<double>();
  if (!(value > 0.0)) throw std::invalid_argument("kappa must be positive");
  return drinfer::KappaPolicy::fixed(value);
}

drinfer::NullCurve parse_null_curve(const json& config) {
  if (!config.contains("null_coefficients")) {
    return drinfer::NullCurve::zero();
  }
  const auto vals = config["null_coefficients"].get<std::vector<double>>();
  Eigen::VectorXd coeffs =
      Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size());
  return drinfer::NullCurve::from_coefficients(
      std::move(coeffs), config.value("null_intercept", 0.0));
}

void write_output(const json& payload, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write output: " + path);
  out << payload.dump(2) << "\n";
}

std::string sibling_csv(const std::string& path) {
  const auto dot = path.find_last_of('.');
  return (dot == std::string::npos ? path : path.substr(0, dot)) + ".csv";
}

int cmd_test(const CommonArgs& args) {
  json config;
  drinfer::ObservationSet data;
  drinfer::TestConfig tc;
  try {
    config = load_config(args);
    data = load_input(config);
    tc.kind = parse_kind(config.value("estimator", std::string("one_step")));
    tc.kappa = parse_kappa(config);
    tc.basis_dim = config.value("D", 20);
    tc.bootstrap_m = config.value("M", 2000);
    tc.seed = config["seed"].get<std::uint64_t>();
    tc.threads = config.value("threads", 1);
    if (tc.basis_dim < 1 || tc.bootstrap_m < 100) {
      throw std::invalid_argument("need D >= 1 and M >= 100");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    const drinfer::NullCurve null_curve = parse_null_curve(config);
    const drinfer::TestResult result = drinfer::run_test(data, null_curve, tc);
    json out{{"psi_stat", result.psi},
             {"p_value", result.p},
             {"kappa", result.kappa},
             {"kappa_degenerate", result.kappa_degenerate},
             {"estimator", drinfer::to_string(result.kind)},
             {"n", result.n},
             {"D", result.basis_dim},
             {"seed", tc.seed},
             {"config_hash", config_hash(config)}};
    if (result.kind == drinfer::EstimatorKind::tml) {
      out["tml_steps"] = result.tml_steps;
      out["tml_final_dn"] = result.tml_final_dn;
    }
    if (config.value("dump_bootstrap", false)) {
      out["bootstrap_samples"] = std::vector<double>(
          result.bootstrap.samples.data(),
          result.bootstrap.samples.data() + result.bootstrap.m());
    }
    const std::string path = config.value("output", std::string("test.json"));
    write_output(out, path);
    std::cout << "psi=" << result.psi << " p=" << result.p << " -> " << path
              << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}

int cmd_bands(const CommonArgs& args) {
  json config;
  drinfer::ObservationSet data;
  drinfer::BandConfig bc;
  try {
    config = load_config(args);
    data = load_input(config);
    bc.alpha = config.value("alpha", 0.05);
    bc.grid_size = config.value("grid_size", 101);
    bc.basis_dim = config.value("D", 20);
    bc.kind = parse_kind(config.value("estimator", std::string("one_step")));
    bc.bootstrap_m = config.value("M", 2000);
    bc.seed = config["seed"].get<std::uint64_t>();
    bc.threads = config.value("threads", 1);
    bc.audit_exact_statistic = config.value("audit_exact_statistic", false);
    if (config.contains("kappa") && config["kappa"] != "adaptive") {
      bc.kappa = config["kappa"].get<double>();
    }
    if (config.contains("nu")) {
      bc.nu = config["nu"].get<double>();
      if (bc.nu <= 0.0) {
        throw std::invalid_argument("nu must be positive; supply a larger nu");
      }
    }
    if (!(bc.alpha > 0.0 && bc.alpha < 1.0) || bc.grid_size < 2) {
      throw std::invalid_argument("need alpha in (0,1) and grid_size >= 2");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    const drinfer::BandResult band = drinfer::build_band(data, bc);
    const std::string path = config.value("output", std::string("bands.json"));
    const std::string csv_path = sibling_csv(path);
    {
      std::ofstream csv(csv_path);
      if (!csv) throw std::invalid_argument("cannot write " + csv_path);
      csv.precision(17);
      csv << "a,lower,upper\n";
      for (int k = 0; k < band.a.size(); ++k) {
        csv << band.a[k] << ',' << band.lower[k] << ',' << band.upper[k]
            << '\n';
      }
    }
    json out{{"alpha", band.alpha},
             {"kappa", band.kappa},
             {"kappa_degenerate", band.kappa_degenerate},
             {"nu", band.nu},
             {"lambda1", band.lambda1},
             {"lambda2", band.lambda2},
             {"t_star", band.tstar},
             {"seed", band.seed},
             {"config_hash", config_hash(config)},
             {"csv", csv_path}};
    if (band.audit_gap.size() > 0) {
      out["audit_gap_max"] = band.audit_gap.maxCoeff();
    }
    write_output(out, path);
    std::cout << "band written to " << csv_path << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}

int cmd_simulate(const CommonArgs& args) {
  json config;
  drinfer::McConfig mc;
  try {
    config = load_config(args);
    mc.setting = config.value("setting", 1);
    if (mc.setting != 1 && mc.setting != 2) {
      throw std::invalid_argument("setting must be 1 or 2");
    }
    mc.n_list = config.value("n", std::vector<int>{500});
    mc.reps = config.value("reps", 500);
    mc.seed = config["seed"].get<std::uint64_t>();
    mc.bootstrap_m = config.value("M", 500);
    mc.basis_dim = config.value("D", 20);
    mc.oracle_kappa_value = config.value("oracle_kappa", 0.0);
    mc.run_tml = config.value("run_tml", true);
    mc.run_adaptive = config.value("run_adaptive", true);
    mc.run_baseline = config.value("run_baseline", true);
    mc.threads = config.value("threads", 1);
    if (mc.reps < 1) throw std::invalid_argument("reps must be >= 1");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    const drinfer::McReport report = drinfer::run_mc(mc);
    const std::string path =
        config.value("output", std::string("simulate.json"));
    const std::string csv_path = sibling_csv(path);
    report.to_csv(csv_path);
    json rates = json::object();
    for (const auto& row : report.rows) {
      rates[row.method][std::to_string(row.n)] = nullptr;
    }
    for (auto& [method, by_n] : rates.items()) {
      for (auto& [n_str, val] : by_n.items()) {
        const int n = std::stoi(n_str);
        val = json{{"reject_at_0.05",
                    report.rejection_rate(method, n, 0.05)},
                   {"reject_at_0.10", report.rejection_rate(method, n, 0.10)}};
      }
    }
    json out{{"setting", mc.setting},
             {"reps", mc.reps},
             {"failure_rate", report.failure_rate()},
             {"rejection_rates", rates},
             {"seed", mc.seed},
             {"config_hash", config_hash(config)},
             {"csv", csv_path}};
    write_output(out, path);
    std::cout << "report written to " << csv_path << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparametric inference for causal dose-response curves"};
  app.require_subcommand(1);

  CommonArgs args;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "JSON config file");
    sub->add_option("--seed", args.seed, "RNG seed (overrides config)");
    sub->add_option("--threads", args.threads, "worker pool size");
    sub->add_option("--output", args.output_path, "output path");
  };
  CLI::App* test = app.add_subcommand("test", "hypothesis test on a CSV");
  CLI::App* bands =
      app.add_subcommand("bands", "simultaneous confidence band");
  CLI::App* simulate =
      app.add_subcommand("simulate", "Monte Carlo study of the methods");
  add_common(test);
  add_common(bands);
  add_common(simulate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  if (test->parsed()) return cmd_test(args);
  if (bands->parsed()) return cmd_bands(args);
  return cmd_simulate(args);
}
