#pragma once

#include <string>
#include <vector>

#include "specemu/dgp.hpp"
#include "specemu/pcemu.hpp"
#include "specemu/spectra.hpp"

namespace specemu {

inline constexpr const char* kSchemaVersion = "1.0";

// Versioned JSON artifact of one cosmology's fit: config echo, retained
// theta traces, pooled mean and credible bands, optional draws.
struct PosteriorArtifact {
  std::string cosmology_id;
  DgpConfig config;
  WavenumberGrid grid;
  std::vector<double> theta_s_trace;
  std::vector<double> theta_w_trace;
  PosteriorSpectrum posterior;
};

void save_posterior_artifact(const PosteriorArtifact& artifact, const std::string& path);
PosteriorArtifact load_posterior_artifact(const std::string& path);

// Emulator artifact: mean curve, basis, singular values, per-component
// kernel parameters, normalization bounds, training inputs and weights.
struct EmulatorArtifact {
  WavenumberGrid grid;
  PCBasis basis;
  InputNormalization normalization;
  std::vector<WeightGp> models;  // inputs stored normalized
};

void save_emulator_artifact(const EmulatorArtifact& artifact, const std::string& path);
EmulatorArtifact load_emulator_artifact(const std::string& path);

}  // namespace specemu
