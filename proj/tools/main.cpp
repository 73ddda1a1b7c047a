#include <algorithm>
#include <filesystem>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aetransfer/error.hpp"
#include "commands.hpp"

namespace {

int exit_code(aetransfer::ErrorKind kind) {
  switch (kind) {
    case aetransfer::ErrorKind::config: return 2;
    case aetransfer::ErrorKind::data: return 3;
    case aetransfer::ErrorKind::numerical: return 4;
  }
  return 1;
}

// CLI11 reads config files only on the root app, so `run --config FILE` is
// expanded here: the file's keys become flags placed before the command-line
// arguments, and the last occurrence of an option wins.
std::vector<std::string> expand_run_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty() || args.front() != "run") return args;
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::FileError& e) {
    throw aetransfer::ConfigError(std::string("config file: ") + e.what());
  }
  std::vector<std::string> expanded{"run"};
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents.front() == "run"))
      throw aetransfer::ConfigError("config file: unknown section '" + item.parents.front() + "'");
    expanded.push_back("--" + item.name);
    expanded.insert(expanded.end(), item.inputs.begin(), item.inputs.end());
  }
  expanded.insert(expanded.end(), args.begin() + 1, args.end());
  return expanded;
}

void add_run_options(CLI::App& run, aetransfer::RunConfig& c) {
  run.add_option("--manifest", c.manifest, "Dataset manifest");
  run.add_option("--out", c.output_dir, "Output directory");
  run.add_option("--source-config", c.source_config, "self, siblings or family; empty keeps the manifest's");
  run.add_option("--d", c.d, "Embedding dimensionality per feature space");
  run.add_option("--c1", c.c1, "E-SVM exemplar weight");
  run.add_option("--c2", c.c2, "E-SVM negative weight");
  run.add_option("--alpha", c.alpha, "Length-scale regularizer");
  run.add_option("--lambda-localize", c.lambda_localize, "Confidence level for localization");
  run.add_option("--lambda-assess", c.lambda_assess, "Confidence level for self-assessment");
  run.add_option("--tau", c.tau, "Self-assessment threshold on eta");
  run.add_option("--k", c.k, "Source images retrieved per target");
  run.add_option("--m", c.m, "FITC pseudo-inputs per target");
  run.add_option("--ae-subsample", c.ae_subsample, "Windows used to fit the embedding");
  run.add_option("--gp-subsample", c.gp_subsample, "Source windows used to fit GP hyperparameters");
  run.add_option("--inducing-cap", c.inducing_cap, "Maximum inducing windows per target");
  run.add_option("--max-negatives", c.max_negatives, "Negatives per exemplar");
  run.add_option("--gp-exact-limit", c.gp_exact_limit, "Largest GP sample fitted with the exact likelihood");
  run.add_option("--gp-pseudo-inputs", c.gp_pseudo_inputs, "Pseudo-inputs of the FITC training likelihood");
  run.add_option("--gp-max-iterations", c.gp_max_iterations, "L-BFGS iteration limit");
  run.add_option("--esvm-max-passes", c.esvm_max_passes, "E-SVM sweep budget");
  run.add_option("--esvm-tolerance", c.esvm_tolerance, "E-SVM stopping tolerance");
  run.add_option("--seed", c.seed, "Seed for every sampling step");
  run.add_option("--threads", c.threads, "Worker threads; output does not depend on it");
  run.add_option("--signature-cache", c.signature_cache, "Directory for cached image signatures");
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = aetransfer::cli;
  CLI::App app{"Transfer bounding-box annotations to unannotated images"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  aetransfer::RunConfig run_config;
  bool print_only = false;
  auto* run = app.add_subcommand("run", "Run the transfer pipeline, evaluate and write artifacts");
  std::string config_file;
  run->add_option("--config", config_file, "Read key = value settings from a file")->configurable(false);
  run->add_flag("--print-config", print_only, "Print the effective configuration and exit")->configurable(false);
  add_run_options(*run, run_config);

  aetransfer::RunConfig defaults;
  auto* print_config = app.add_subcommand("print-config", "Print the default run configuration");
  add_run_options(*print_config, defaults);

  aetransfer::SynthOptions synth_options;
  std::filesystem::path synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_options.seed, "Seed");
  synth->add_option("--n-source", synth_options.n_source, "Source images");
  synth->add_option("--n-target", synth_options.n_target, "Target images");
  synth->add_option("--d-latent", synth_options.d_latent, "Latent appearance dimensions");
  synth->add_option("--noise", synth_options.noise, "Feature noise standard deviation");
  synth->add_option("--windows", synth_options.windows_per_image, "Windows per image");
  synth->add_option("--classes", synth_options.classes, "Source classes, the first being the target class");
  synth->add_option("--target-share", synth_options.target_share, "Fraction of sources in the target class");
  synth->add_option("--class-spread", synth_options.class_spread, "Log-scale shape difference between classes");

  std::filesystem::path annotations, manifest, eval_out;
  auto* eval = app.add_subcommand("eval", "Evaluate an annotations file against ground truth");
  eval->add_option("--annotations", annotations, "Annotations (JSON lines)")->required();
  eval->add_option("--manifest", manifest, "Dataset manifest")->required();
  eval->add_option("--out", eval_out, "Report file; stdout if omitted");

  auto* curve = app.add_subcommand("curve", "Emit the ranking curve of an annotations file");
  curve->add_option("--annotations", annotations, "Annotations (JSON lines)")->required();
  curve->add_option("--manifest", manifest, "Dataset manifest")->required();
  curve->add_option("--out", eval_out, "CSV file; stdout if omitted");

  cli::OracleArgs oracle_args;
  auto* oracle = app.add_subcommand("oracle", "Brute-force reference computations");
  oracle->add_option("kind", oracle_args.kind, "iou, gp, svd, kde or gradient")
      ->required()
      ->check(CLI::IsMember({"iou", "gp", "svd", "kde", "gradient"}));
  oracle->add_option("--boxes", oracle_args.boxes, "iou: two integer boxes, 8 values");
  oracle->add_option("--input", oracle_args.input,
                     "CSV without header; gp/gradient: descriptor columns then label");
  oracle->add_option("--gamma", oracle_args.gamma, "Length-scales");
  oracle->add_option("--noise", oracle_args.noise, "Noise variance");
  oracle->add_option("--alpha", oracle_args.alpha, "Length-scale regularizer");
  oracle->add_option("--target", oracle_args.target, "gp: query descriptor");
  oracle->add_option("--d", oracle_args.d, "svd: retained rank");
  oracle->add_option("--bandwidth", oracle_args.bandwidth, "kde: kernel bandwidth");
  oracle->add_option("--points", oracle_args.points, "kde: evaluation points");
  oracle->add_option("--step", oracle_args.step, "gradient: finite-difference step in log space");
  oracle->add_option("--cap", oracle_args.cap, "Largest input the dense oracles accept");
  oracle->add_option("--out", oracle_args.out, "Output file; stdout if omitted");

  try {
    std::vector<std::string> args;
    try {
      args = expand_run_config(argc, argv);
    } catch (const aetransfer::ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*print_config) {
      std::cout << print_config->config_to_str(true, true);
      return 0;
    }
    if (*run) {
      const std::string effective = run->config_to_str(true, false);
      if (print_only) {
        std::cout << effective;
        return 0;
      }
      return cli::cmd_run(run_config, effective);
    }
    if (*synth) return cli::cmd_synth(synth_options, synth_out);
    if (*eval) return cli::cmd_eval(annotations, manifest, eval_out);
    if (*curve) return cli::cmd_curve(annotations, manifest, eval_out);
    if (*oracle) return cli::cmd_oracle(oracle_args);
  } catch (const aetransfer::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
