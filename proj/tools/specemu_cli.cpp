#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "specemu/artifacts.hpp"
#include "specemu/csv.hpp"
#include "specemu/simstudy.hpp"

using namespace specemu;
using nlohmann::json;

namespace {

json load_config_file(int argc, char** argv) {
  for (int i = 1; i < argc - 1; ++i) {
    if (std::string(argv[i]) == "--config") {
      std::ifstream in(argv[i + 1]);
      if (!in) throw ConfigError(std::string("cannot open config file: ") + argv[i + 1]);
      json cfg;
      in >> cfg;
      return cfg;
    }
  }
  return json::object();
}

template <typename T>
void cfg_default(const json& cfg, const char* key, T& var) {
  if (cfg.contains(key)) var = cfg[key].get<T>();
}

std::string resolve_output_dir(const json& cfg, const std::string& flag_value) {
  std::string dir = ".";
  cfg_default(cfg, "output_dir", dir);
  if (const char* env = std::getenv("SPECEMU_OUTPUT_DIR")) dir = env;
  if (!flag_value.empty()) dir = flag_value;
  std::filesystem::create_directories(dir);
  return dir;
}

// timestamps live only here, never in artifacts
void sidecar_log(const std::string& dir, const std::string& line) {
  std::ofstream log(std::filesystem::path(dir) / "run.log", std::ios::app);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  log << stamp << ' ' << line << '\n';
}

std::string path_stem(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

struct DgpOverrides {
  std::optional<int> iterations, burn_in, thin, s_draws;
  std::optional<double> proposal_scale, jitter;
  bool store_draws = false;

  void attach(CLI::App* cmd, const json& cfg) {
    auto opt_int = [&](const char* flag, const char* key, std::optional<int>& slot) {
      if (cfg.contains(key)) slot = cfg[key].get<int>();
      cmd->add_option(flag, slot);
    };
    auto opt_dbl = [&](const char* flag, const char* key, std::optional<double>& slot) {
      if (cfg.contains(key)) slot = cfg[key].get<double>();
      cmd->add_option(flag, slot);
    };
    opt_int("--iterations", "iterations", iterations);
    opt_int("--burn-in", "burn_in", burn_in);
    opt_int("--thin", "thin", thin);
    opt_int("--s-draws", "s_draws_per_sample", s_draws);
    opt_dbl("--proposal-scale", "proposal_scale", proposal_scale);
    opt_dbl("--jitter", "jitter", jitter);
    if (cfg.contains("store_draws")) store_draws = cfg["store_draws"].get<bool>();
    cmd->add_flag("--store-draws", store_draws);
  }

  void apply(DgpConfig& dgp) const {
    if (iterations) dgp.iterations = *iterations;
    if (burn_in) dgp.burn_in = *burn_in;
    if (thin) dgp.thin = *thin;
    if (s_draws) dgp.s_draws_per_sample = *s_draws;
    if (proposal_scale) dgp.proposal_scale = *proposal_scale;
    if (jitter) dgp.jitter = *jitter;
    dgp.store_draws = store_draws;
  }
};

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed, const char* command) {
  if (!seed) throw ConfigError(std::string("--seed is required for ") + command);
  return *seed;
}

void set_jobs(int jobs) {
#ifdef _OPENMP
  if (jobs > 0) omp_set_num_threads(jobs);
#else
  (void)jobs;
#endif
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const std::vector<std::string>& functions,
                 const std::vector<std::string>& variances, const std::vector<int>& runs,
                 int replicates, std::uint64_t seed, const DgpOverrides& overrides, int jobs,
                 const std::string& outdir) {
  std::vector<SimResult> results;
  bool any_failed = false;
  for (const std::string& fn : functions) {
    if (fn != "f1" && fn != "f2") throw ConfigError("unknown function: " + fn);
    for (const std::string& var : variances) {
      if (var != "A" && var != "B") throw ConfigError("unknown variance setting: " + var);
      for (int r : runs) {
        if (r < 2) throw ConfigError("runs per scenario must be >= 2");
        SimScenario scenario;
        scenario.function = fn == "f1" ? SimFunction::F1 : SimFunction::F2;
        scenario.variance = var == "A" ? VarianceSetting::A : VarianceSetting::B;
        scenario.n_runs = r;
        scenario.replicates = replicates;
        scenario.seed = seed;
        overrides.apply(scenario.dgp);
        scenario.dgp.validate();
        results.push_back(run_scenario(scenario, jobs));
        for (const auto& row : results.back().rows) {
          if (!row.error.empty()) {
            std::cerr << "replicate " << row.replicate << " of scenario " << scenario.label()
                      << " failed: " << row.error << '\n';
            any_failed = true;
          }
        }
      }
    }
  }
  const auto out = std::filesystem::path(outdir) / "simulate-results.csv";
  write_file_atomic(out.string(), results_to_csv(results));
  std::cout << "wrote " << out.string() << '\n';
  return any_failed ? 3 : 0;
}

// --------------------------------------------------------------------- fit

int cmd_fit(const std::vector<std::string>& inputs, const std::string& mode,
            std::string convention_name, bool raw_power, std::uint64_t seed,
            const DgpOverrides& overrides, const std::string& outdir) {
  if (inputs.empty()) throw ConfigError("fit requires at least one input batch CSV");
  if (mode != "mira-titan" && mode != "camb" && mode != "synthetic")
    throw ConfigError("unknown dataset mode: " + mode);
  const ValidityRanges ranges = mode == "camb" ? ValidityRanges::camb()
                                               : ValidityRanges::mira_titan();
  if (convention_name.empty())
    convention_name = mode == "camb" ? "diagonal" : (mode == "synthetic" ? "propagated" : "literal");
  const ErrorCovConvention convention = error_cov_convention_from_string(convention_name);

  std::vector<SpectraBatch> batches;
  for (const auto& path : inputs) batches.push_back(load_batch_csv(path, raw_power, path_stem(path)));
  const PrecisionModel precision = fit_precisions(batches, ranges);

  const Eigen::Index count = static_cast<Eigen::Index>(batches.size());
  std::vector<std::string> errors(batches.size());
  std::vector<PosteriorArtifact> artifacts(batches.size());

#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index i = 0; i < count; ++i) {
    const SpectraBatch& batch = batches[static_cast<std::size_t>(i)];
    try {
      const Lambdas lambdas = build_lambdas(batch.grid, precision, ranges,
                                            static_cast<int>(batch.n_runs()));
      const WeightedSpectrum ws = estimate_error_cov(batch, precision, lambdas, convention, ranges);

      DgpConfig cfg;
      overrides.apply(cfg);
      cfg.seed = splitmix64(splitmix64(seed) ^ hash_str(batch.cosmology_id));
      cfg.validate();

      const auto chain = fit_dgp(ws, cfg);
      PosteriorArtifact artifact;
      artifact.cosmology_id = batch.cosmology_id;
      artifact.config = cfg;
      artifact.grid = batch.grid;
      for (const auto& s : chain) {
        artifact.theta_s_trace.push_back(s.theta_s);
        artifact.theta_w_trace.push_back(s.theta_w);
      }
      artifact.posterior = posterior_spectrum(chain, ws, cfg);
      artifacts[static_cast<std::size_t>(i)] = std::move(artifact);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }

  std::ostringstream summary;
  summary << "cosmology,k,mean,lower,upper\n";
  bool any_failed = false;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    if (!errors[i].empty()) {
      std::cerr << "cosmology " << batches[i].cosmology_id << " failed: " << errors[i] << '\n';
      any_failed = true;
      continue;
    }
    const PosteriorArtifact& artifact = artifacts[i];
    const auto path =
        std::filesystem::path(outdir) / (artifact.cosmology_id + "-posterior.json");
    save_posterior_artifact(artifact, path.string());
    for (Eigen::Index j = 0; j < artifact.grid.size(); ++j)
      summary << artifact.cosmology_id << ',' << format_double(artifact.grid.k(j)) << ','
              << format_double(artifact.posterior.mean(j)) << ','
              << format_double(artifact.posterior.lower(j)) << ','
              << format_double(artifact.posterior.upper(j)) << '\n';
  }
  const auto out = std::filesystem::path(outdir) / "fit-summary.csv";
  write_file_atomic(out.string(), summary.str());
  std::cout << "wrote " << out.string() << '\n';
  return any_failed ? 3 : 0;
}

// ------------------------------------------------------------------- basis

struct PsiTable {
  std::vector<std::string> ids;
  Matrix psi;
};

PsiTable read_psi_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.rows.empty()) throw ConfigError("psi CSV has no rows: " + path);
  int label_col = table.column("cosmology");
  if (label_col < 0) label_col = table.column("id");
  std::vector<int> value_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c)
    if (static_cast<int>(c) != label_col) value_cols.push_back(static_cast<int>(c));
  if (value_cols.empty()) throw ConfigError("psi CSV has no parameter columns: " + path);

  PsiTable out;
  out.psi = Matrix(static_cast<Eigen::Index>(table.rows.size()),
                   static_cast<Eigen::Index>(value_cols.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    out.ids.push_back(label_col >= 0 ? table.rows[r][static_cast<std::size_t>(label_col)]
                                     : std::to_string(r));
    for (std::size_t c = 0; c < value_cols.size(); ++c)
      out.psi(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          std::stod(table.rows[r][static_cast<std::size_t>(value_cols[c])]);
  }
  return out;
}

int cmd_basis(const std::vector<std::string>& artifact_paths, const std::string& psi_path,
              int components, double nugget, const std::string& outdir) {
  if (artifact_paths.empty()) throw ConfigError("basis requires posterior artifacts");
  const PsiTable psi = read_psi_csv(psi_path);

  std::map<std::string, PosteriorArtifact> by_id;
  for (const auto& path : artifact_paths) {
    PosteriorArtifact artifact = load_posterior_artifact(path);
    by_id.emplace(artifact.cosmology_id, std::move(artifact));
  }

  const Eigen::Index m = psi.psi.rows();
  EmulatorArtifact emulator;
  Matrix curves;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto it = by_id.find(psi.ids[static_cast<std::size_t>(i)]);
    if (it == by_id.end())
      throw ConfigError("no posterior artifact for cosmology " +
                        psi.ids[static_cast<std::size_t>(i)]);
    const PosteriorArtifact& artifact = it->second;
    if (i == 0) {
      emulator.grid = artifact.grid;
      curves = Matrix(m, artifact.grid.size());
    } else if (artifact.grid.size() != emulator.grid.size() ||
               (artifact.grid.k - emulator.grid.k).cwiseAbs().maxCoeff() != 0.0) {
      throw ConfigError("artifact grids do not match: " + artifact.cosmology_id);
    }
    curves.row(i) = artifact.posterior.mean.transpose();
  }

  emulator.normalization = InputNormalization::fit(psi.psi);
  const Matrix psi_unit = emulator.normalization.apply(psi.psi);
  emulator.basis = build_basis(curves, components);
  emulator.models.resize(static_cast<std::size_t>(emulator.basis.retained));

  std::vector<std::string> errors(emulator.models.size());
#pragma omp parallel for schedule(dynamic)
  for (int c = 0; c < emulator.basis.retained; ++c) {
    try {
      emulator.models[static_cast<std::size_t>(c)] =
          fit_weight_gp(psi_unit, emulator.basis.weights.col(c), c, nugget);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(c)] = e.what();
    }
  }
  for (int c = 0; c < emulator.basis.retained; ++c)
    if (!errors[static_cast<std::size_t>(c)].empty())
      throw FitFailure("component " + std::to_string(c) +
                       " failed: " + errors[static_cast<std::size_t>(c)]);

  const auto out = std::filesystem::path(outdir) / "emulator.json";
  save_emulator_artifact(emulator, out.string());
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

// ----------------------------------------------------------------- predict

int cmd_predict(const std::string& emulator_path, const std::string& psi_path,
                const std::string& outdir) {
  const EmulatorArtifact emulator = load_emulator_artifact(emulator_path);
  const PsiTable psi = read_psi_csv(psi_path);
  if (psi.psi.cols() != emulator.normalization.lo.size())
    throw ConfigError("psi parameter count does not match the emulator");

  std::ostringstream out;
  out << "id,k,value\n";
  for (Eigen::Index i = 0; i < psi.psi.rows(); ++i) {
    const Vector unit = emulator.normalization.apply(Vector(psi.psi.row(i).transpose()));
    const Vector curve = predict_spectrum(emulator.basis, emulator.models, unit);
    for (Eigen::Index j = 0; j < emulator.grid.size(); ++j)
      out << psi.ids[static_cast<std::size_t>(i)] << ',' << format_double(emulator.grid.k(j))
          << ',' << format_double(curve(j)) << '\n';
  }
  const auto path = std::filesystem::path(outdir) / "predictions.csv";
  write_file_atomic(path.string(), out.str());
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

// ------------------------------------------------------------------- score

struct CurveSet {
  std::vector<std::string> ids;                 // insertion order
  std::map<std::string, std::vector<double>> k; // per id
  std::map<std::string, std::vector<double>> v;
};

CurveSet read_curves_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int ic = table.column("id"), kc = table.column("k"), vc = table.column("value");
  if (ic < 0 || kc < 0 || vc < 0)
    throw ConfigError("curve CSV must have columns id,k,value: " + path);
  CurveSet set;
  for (const auto& row : table.rows) {
    const std::string& id = row[static_cast<std::size_t>(ic)];
    if (set.k.find(id) == set.k.end()) set.ids.push_back(id);
    set.k[id].push_back(std::stod(row[static_cast<std::size_t>(kc)]));
    set.v[id].push_back(std::stod(row[static_cast<std::size_t>(vc)]));
  }
  if (set.ids.empty()) throw ConfigError("curve CSV has no rows: " + path);
  return set;
}

int cmd_score(const std::string& predicted_path, const std::string& reference_path,
              const std::string& outdir) {
  const CurveSet pred = read_curves_csv(predicted_path);
  const CurveSet ref = read_curves_csv(reference_path);

  const std::vector<double>* shared_k = nullptr;
  std::ostringstream per_curve;
  per_curve << "id,mse\n";
  std::vector<double> per_k_acc;
  for (const auto& id : pred.ids) {
    const auto rit = ref.k.find(id);
    if (rit == ref.k.end()) throw ConfigError("reference is missing curve " + id);
    const auto& pk = pred.k.at(id);
    const auto& rk = rit->second;
    if (pk != rk) throw ConfigError("wavenumber grid mismatch for curve " + id);
    if (!shared_k) {
      shared_k = &pk;
      per_k_acc.assign(pk.size(), 0.0);
    } else if (pk != *shared_k) {
      throw ConfigError("curves are not on a shared wavenumber grid: " + id);
    }
    const auto& pv = pred.v.at(id);
    const auto& rv = ref.v.at(id);
    double acc = 0.0;
    for (std::size_t j = 0; j < pv.size(); ++j) {
      const double d = pv[j] - rv[j];
      acc += d * d;
      per_k_acc[j] += d * d;
    }
    per_curve << id << ',' << format_double(acc / static_cast<double>(pv.size())) << '\n';
  }

  std::ostringstream per_k;
  per_k << "k,mse\n";
  for (std::size_t j = 0; j < per_k_acc.size(); ++j)
    per_k << format_double((*shared_k)[j]) << ','
          << format_double(per_k_acc[j] / static_cast<double>(pred.ids.size())) << '\n';

  const auto curve_path = std::filesystem::path(outdir) / "score-per-curve.csv";
  const auto k_path = std::filesystem::path(outdir) / "score-per-k.csv";
  write_file_atomic(curve_path.string(), per_curve.str());
  write_file_atomic(k_path.string(), per_k.str());
  std::cout << "wrote " << curve_path.string() << " and " << k_path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    const json cfg = load_config_file(argc, argv);

    CLI::App app{"multi-fidelity spectrum fusion, MCMC curve fitting, and PC emulation"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON configuration file; flags override its values");

    std::optional<std::uint64_t> seed;
    if (cfg.contains("seed")) seed = cfg["seed"].get<std::uint64_t>();
    std::string outdir_flag;
    int jobs = cfg.value("jobs", 0);
    app.add_option("--seed", seed, "root RNG seed");
    app.add_option("--output-dir", outdir_flag, "output directory");
    app.add_option("--jobs", jobs, "worker thread bound (0 = default)");

    auto* simulate = app.add_subcommand("simulate", "run the synthetic comparison study");
    std::vector<std::string> functions{"f1", "f2"}, variances{"A", "B"};
    std::vector<int> runs{5};
    int replicates = 20;
    cfg_default(cfg, "functions", functions);
    cfg_default(cfg, "variances", variances);
    cfg_default(cfg, "runs", runs);
    cfg_default(cfg, "replicates", replicates);
    simulate->add_option("--functions", functions);
    simulate->add_option("--variances", variances);
    simulate->add_option("--runs", runs);
    simulate->add_option("--replicates", replicates);
    DgpOverrides sim_overrides;
    sim_overrides.attach(simulate, cfg);

    auto* fit = app.add_subcommand("fit", "fuse spectra and fit the posterior curve");
    std::vector<std::string> inputs;
    std::string mode = "mira-titan", convention;
    bool raw_power = false;
    cfg_default(cfg, "inputs", inputs);
    cfg_default(cfg, "mode", mode);
    cfg_default(cfg, "convention", convention);
    cfg_default(cfg, "raw_power", raw_power);
    fit->add_option("--input", inputs, "per-cosmology batch CSV");
    fit->add_option("--mode", mode, "mira-titan | camb | synthetic");
    fit->add_option("--convention", convention, "diagonal | literal | propagated");
    fit->add_flag("--raw-power", raw_power, "inputs are raw P(k), transform on load");
    DgpOverrides fit_overrides;
    fit_overrides.attach(fit, cfg);

    auto* basis = app.add_subcommand("basis", "build the PC emulator from fit artifacts");
    std::vector<std::string> artifact_paths;
    std::string psi_path;
    int components = 10;
    double nugget = 1e-8;
    cfg_default(cfg, "artifacts", artifact_paths);
    cfg_default(cfg, "psi", psi_path);
    cfg_default(cfg, "components", components);
    cfg_default(cfg, "nugget", nugget);
    basis->add_option("--artifact", artifact_paths, "posterior artifact JSON");
    basis->add_option("--psi", psi_path, "training parameter CSV (cosmology column + parameters)");
    basis->add_option("--components", components);
    basis->add_option("--nugget", nugget);

    auto* predict = app.add_subcommand("predict", "predict curves at new parameters");
    std::string emulator_path;
    std::string predict_psi;
    cfg_default(cfg, "emulator", emulator_path);
    cfg_default(cfg, "predict_psi", predict_psi);
    predict->add_option("--emulator", emulator_path, "emulator artifact JSON");
    predict->add_option("--psi", predict_psi, "parameter CSV to predict at");

    auto* score = app.add_subcommand("score", "MSE of predicted curves against references");
    std::string predicted_path, reference_path;
    cfg_default(cfg, "predicted", predicted_path);
    cfg_default(cfg, "reference", reference_path);
    score->add_option("--predicted", predicted_path, "long-format id,k,value CSV");
    score->add_option("--reference", reference_path, "long-format id,k,value CSV");

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) return app.exit(e);
      std::cerr << e.what() << '\n';
      return 2;
    }

    set_jobs(jobs);
    const std::string outdir = resolve_output_dir(cfg, outdir_flag);

    if (simulate->parsed()) {
      const std::uint64_t s = require_seed(seed, "simulate");
      sidecar_log(outdir, "simulate");
      return cmd_simulate(functions, variances, runs, replicates, s, sim_overrides, jobs, outdir);
    }
    if (fit->parsed()) {
      const std::uint64_t s = require_seed(seed, "fit");
      sidecar_log(outdir, "fit");
      return cmd_fit(inputs, mode, convention, raw_power, s, fit_overrides, outdir);
    }
    if (basis->parsed()) {
      sidecar_log(outdir, "basis");
      return cmd_basis(artifact_paths, psi_path, components, nugget, outdir);
    }
    if (predict->parsed()) {
      sidecar_log(outdir, "predict");
      return cmd_predict(emulator_path, predict_psi, outdir);
    }
    sidecar_log(outdir, "score");
    return cmd_score(predicted_path, reference_path, outdir);
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
