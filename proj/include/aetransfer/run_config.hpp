#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "aetransfer/dataset.hpp"

namespace aetransfer {

/// Everything a transfer run depends on. Defaults follow the published settings.
struct RunConfig {
  std::string manifest;
  std::string output_dir = "out";
  /// Empty string keeps the configuration named in the manifest.
  std::string source_config;

  long d = 3;
  double c1 = 1.0;
  double c2 = 0.001;
  double alpha = 100.0;
  double lambda_localize = 0.8;
  double lambda_assess = 0.5;
  /// Self-assessment threshold applied at lambda_assess.
  double tau = 0.6;

  std::size_t k = 300;
  /// FITC pseudo-input budget per target image.
  std::size_t m = 200;
  std::size_t ae_subsample = 15000;
  std::size_t gp_subsample = 15000;
  std::size_t inducing_cap = 5000;
  std::size_t max_negatives = 3000;
  std::size_t gp_exact_limit = 1000;
  std::size_t gp_pseudo_inputs = 300;
  int gp_max_iterations = 200;
  std::size_t esvm_max_passes = 10000;
  double esvm_tolerance = 1e-6;

  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// Directory for cached image signatures; empty disables caching.
  std::string signature_cache;

  /// Throws ConfigError naming the first out-of-range field.
  void validate() const;
  /// Configuration to use given the manifest's own setting.
  SourceConfig resolve_source_config(SourceConfig from_manifest) const;
};

}  // namespace aetransfer
