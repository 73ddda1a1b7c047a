#include "aetransfer/run_config.hpp"

#include <cmath>

#include "aetransfer/error.hpp"

namespace aetransfer {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("config: " + message);
}

}  // namespace

void RunConfig::validate() const {
  require(d >= 1, "d must be at least 1");
  require(std::isfinite(c1) && c1 > 0.0, "c1 must be positive");
  require(std::isfinite(c2) && c2 > 0.0, "c2 must be positive");
  require(std::isfinite(alpha) && alpha >= 0.0, "alpha must be non-negative");
  require(lambda_localize > 0.0 && lambda_localize < 1.0, "lambda_localize must lie in (0, 1)");
  require(lambda_assess > 0.0 && lambda_assess < 1.0, "lambda_assess must lie in (0, 1)");
  require(!std::isnan(tau), "tau must be a number");
  require(k >= 1, "k must be at least 1");
  require(m >= 1, "m must be at least 1");
  require(ae_subsample >= 1, "ae_subsample must be at least 1");
  require(gp_subsample >= 2, "gp_subsample must be at least 2");
  require(inducing_cap >= 1, "inducing_cap must be at least 1");
  require(max_negatives >= 1, "max_negatives must be at least 1");
  require(gp_pseudo_inputs >= 1, "gp_pseudo_inputs must be at least 1");
  require(gp_max_iterations >= 0, "gp_max_iterations must be non-negative");
  require(esvm_max_passes >= 1, "esvm_max_passes must be at least 1");
  require(esvm_tolerance > 0.0, "esvm_tolerance must be positive");
  require(threads >= 1, "threads must be at least 1");
  if (!source_config.empty()) parse_source_config(source_config);
}

SourceConfig RunConfig::resolve_source_config(SourceConfig from_manifest) const {
  return source_config.empty() ? from_manifest : parse_source_config(source_config);
}

}  // namespace aetransfer
