#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aetransfer/run_config.hpp"
#include "aetransfer/synth.hpp"

namespace aetransfer::cli {

int cmd_run(const RunConfig& config, const std::string& effective_config);
int cmd_synth(const SynthOptions& options, const std::filesystem::path& out);
int cmd_eval(const std::filesystem::path& annotations, const std::filesystem::path& manifest,
             const std::filesystem::path& out);
int cmd_curve(const std::filesystem::path& annotations, const std::filesystem::path& manifest,
              const std::filesystem::path& out);

struct OracleArgs {
  std::string kind;
  std::vector<long> boxes;
  std::filesystem::path input;
  std::vector<double> gamma;
  double noise = 0.01;
  double alpha = 0.0;
  std::vector<double> target;
  long d = 1;
  double bandwidth = 1.0;
  std::vector<double> points;
  double step = 1e-5;
  std::size_t cap = 2000;
  std::filesystem::path out;
};
int cmd_oracle(const OracleArgs& args);

/// Writes `contents` to `out`, or to stdout when `out` is empty.
void emit(const std::filesystem::path& out, const std::string& contents);

}  // namespace aetransfer::cli
