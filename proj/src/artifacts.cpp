#include "specemu/artifacts.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "specemu/csv.hpp"

namespace specemu {

using nlohmann::json;

namespace {

json vec_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vector vec_from_json(const json& arr) {
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  return v;
}

json mat_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_to_json(m.row(i)));
  return rows;
}

Matrix mat_from_json(const json& rows) {
  if (rows.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = vec_from_json(rows[i]).transpose();
  return m;
}

void check_schema(const json& doc, const std::string& kind, const std::string& path) {
  if (!doc.contains("schema_version") || !doc.contains("kind"))
    throw SchemaError("artifact missing schema fields: " + path);
  const std::string version = doc["schema_version"].get<std::string>();
  const std::string major = version.substr(0, version.find('.'));
  const std::string expect_major = std::string(kSchemaVersion).substr(0, std::string(kSchemaVersion).find('.'));
  if (major != expect_major)
    throw SchemaError("artifact schema major version " + version + " unsupported: " + path);
  if (doc["kind"].get<std::string>() != kind)
    throw SchemaError("artifact kind mismatch, expected " + kind + ": " + path);
}

json config_to_json(const DgpConfig& cfg) {
  json j;
  j["iterations"] = cfg.iterations;
  j["burn_in"] = cfg.burn_in;
  j["thin"] = cfg.thin;
  j["theta_s_prior"] = {{"shape", cfg.theta_s_prior.shape}, {"rate", cfg.theta_s_prior.rate}};
  j["theta_w_prior"] = {{"shape", cfg.theta_w_prior.shape}, {"rate", cfg.theta_w_prior.rate}};
  j["proposal_scale"] = cfg.proposal_scale;
  j["jitter"] = cfg.jitter;
  j["s_draws_per_sample"] = cfg.s_draws_per_sample;
  j["seed"] = cfg.seed;
  if (cfg.mu_s) j["mu_s"] = vec_to_json(*cfg.mu_s);
  if (cfg.mu_w) j["mu_w"] = vec_to_json(*cfg.mu_w);
  return j;
}

DgpConfig config_from_json(const json& j) {
  DgpConfig cfg;
  cfg.iterations = j["iterations"].get<int>();
  cfg.burn_in = j["burn_in"].get<int>();
  cfg.thin = j["thin"].get<int>();
  cfg.theta_s_prior = {j["theta_s_prior"]["shape"].get<double>(),
                       j["theta_s_prior"]["rate"].get<double>()};
  cfg.theta_w_prior = {j["theta_w_prior"]["shape"].get<double>(),
                       j["theta_w_prior"]["rate"].get<double>()};
  cfg.proposal_scale = j["proposal_scale"].get<double>();
  cfg.jitter = j["jitter"].get<double>();
  cfg.s_draws_per_sample = j["s_draws_per_sample"].get<int>();
  cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("mu_s")) cfg.mu_s = vec_from_json(j["mu_s"]);
  if (j.contains("mu_w")) cfg.mu_w = vec_from_json(j["mu_w"]);
  return cfg;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open artifact: " + path);
  json doc;
  in >> doc;
  return doc;
}

}  // namespace

void save_posterior_artifact(const PosteriorArtifact& artifact, const std::string& path) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "posterior_spectrum";
  doc["cosmology_id"] = artifact.cosmology_id;
  doc["config"] = config_to_json(artifact.config);
  doc["k"] = vec_to_json(artifact.grid.k);
  doc["theta_s_trace"] = artifact.theta_s_trace;
  doc["theta_w_trace"] = artifact.theta_w_trace;
  doc["retained"] = artifact.posterior.retained;
  doc["mean"] = vec_to_json(artifact.posterior.mean);
  doc["lower"] = vec_to_json(artifact.posterior.lower);
  doc["upper"] = vec_to_json(artifact.posterior.upper);
  if (artifact.posterior.draws.size() > 0) doc["draws"] = mat_to_json(artifact.posterior.draws);
  write_file_atomic(path, doc.dump(2) + "\n");
}

PosteriorArtifact load_posterior_artifact(const std::string& path) {
  const json doc = load_json_file(path);
  check_schema(doc, "posterior_spectrum", path);
  PosteriorArtifact artifact;
  artifact.cosmology_id = doc["cosmology_id"].get<std::string>();
  artifact.config = config_from_json(doc["config"]);
  artifact.grid = WavenumberGrid::from_k(vec_from_json(doc["k"]));
  artifact.theta_s_trace = doc["theta_s_trace"].get<std::vector<double>>();
  artifact.theta_w_trace = doc["theta_w_trace"].get<std::vector<double>>();
  artifact.posterior.retained = doc["retained"].get<int>();
  artifact.posterior.mean = vec_from_json(doc["mean"]);
  artifact.posterior.lower = vec_from_json(doc["lower"]);
  artifact.posterior.upper = vec_from_json(doc["upper"]);
  if (doc.contains("draws")) artifact.posterior.draws = mat_from_json(doc["draws"]);
  return artifact;
}

void save_emulator_artifact(const EmulatorArtifact& artifact, const std::string& path) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "pc_emulator";
  doc["k"] = vec_to_json(artifact.grid.k);
  doc["mean_curve"] = vec_to_json(artifact.basis.mean_curve);
  doc["basis"] = mat_to_json(artifact.basis.basis);
  doc["weights"] = mat_to_json(artifact.basis.weights);
  doc["singular_values"] = vec_to_json(artifact.basis.singular_values);
  doc["retained"] = artifact.basis.retained;
  doc["normalization"] = {{"lo", vec_to_json(artifact.normalization.lo)},
                          {"hi", vec_to_json(artifact.normalization.hi)}};
  json components = json::array();
  for (const auto& gp : artifact.models) {
    json c;
    c["component"] = gp.component;
    c["beta"] = vec_to_json(gp.params.beta);
    c["alpha"] = gp.params.alpha;
    c["scale"] = gp.params.scale;
    c["nugget"] = gp.params.nugget;
    components.push_back(std::move(c));
  }
  doc["components"] = std::move(components);
  if (!artifact.models.empty()) doc["training_psi_unit"] = mat_to_json(artifact.models.front().inputs);
  write_file_atomic(path, doc.dump(2) + "\n");
}

EmulatorArtifact load_emulator_artifact(const std::string& path) {
  const json doc = load_json_file(path);
  check_schema(doc, "pc_emulator", path);
  EmulatorArtifact artifact;
  artifact.grid = WavenumberGrid::from_k(vec_from_json(doc["k"]));
  artifact.basis.mean_curve = vec_from_json(doc["mean_curve"]);
  artifact.basis.basis = mat_from_json(doc["basis"]);
  artifact.basis.weights = mat_from_json(doc["weights"]);
  artifact.basis.singular_values = vec_from_json(doc["singular_values"]);
  artifact.basis.retained = doc["retained"].get<int>();
  artifact.normalization.lo = vec_from_json(doc["normalization"]["lo"]);
  artifact.normalization.hi = vec_from_json(doc["normalization"]["hi"]);

  const Matrix psi_unit =
      doc.contains("training_psi_unit") ? mat_from_json(doc["training_psi_unit"]) : Matrix();
  for (std::size_t i = 0; i < doc["components"].size(); ++i) {
    const json& c = doc["components"][i];
    WeightGp gp;
    gp.component = c["component"].get<int>();
    gp.inputs = psi_unit;
    gp.weights = artifact.basis.weights.col(static_cast<Eigen::Index>(i));
    gp.params.beta = vec_from_json(c["beta"]);
    gp.params.alpha = c["alpha"].get<double>();
    gp.params.scale = c["scale"].get<double>();
    gp.params.nugget = c["nugget"].get<double>();
    const Matrix corr = powexp_corr_matrix(psi_unit, gp.params);
    gp.corr_factor = chol(corr, {gp.params.nugget > 0 ? gp.params.nugget : 1e-8, 1e-4, 10.0},
                          "weight GP correlation");
    const Vector alpha = gp.corr_factor.triangularView<Eigen::Lower>().solve(gp.weights);
    gp.kinv_weights = gp.corr_factor.transpose().triangularView<Eigen::Upper>().solve(alpha);
    artifact.models.push_back(std::move(gp));
  }
  return artifact;
}

}  // namespace specemu
