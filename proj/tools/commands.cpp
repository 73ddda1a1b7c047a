#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "aetransfer/annotation.hpp"
#include "aetransfer/dataset.hpp"
#include "aetransfer/error.hpp"
#include "aetransfer/metrics.hpp"
#include "aetransfer/model_io.hpp"
#include "aetransfer/oracle.hpp"
#include "aetransfer/pipeline.hpp"
#include "aetransfer/table_io.hpp"

namespace aetransfer::cli {

namespace fs = std::filesystem;

namespace {

// Fills a fresh sibling directory, then moves it into place at `target`.
template <typename Fill>
void write_directory_atomic(const fs::path& target, Fill&& fill) {
  const fs::path absolute = fs::absolute(target).lexically_normal();
  const fs::path parent = absolute.parent_path();
  fs::create_directories(parent);
  const std::string tag = "." + absolute.filename().string() + ".tmp-" + std::to_string(::getpid());
  const fs::path staging = parent / tag;
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    fill(staging);
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }
  if (fs::exists(absolute)) {
    const fs::path old = parent / (tag + ".old");
    fs::rename(absolute, old);
    fs::rename(staging, absolute);
    fs::remove_all(old);
  } else {
    fs::rename(staging, absolute);
  }
}

nlohmann::ordered_json report_json(const EvaluationReport& report) {
  nlohmann::ordered_json j;
  j["n_images"] = report.n_images;
  j["excluded"] = report.excluded;
  j["mean_iou"] = report.mean_iou;
  j["detection_rate"] = report.detection_rate;
  auto& curve = j["ranking_curve"] = nlohmann::ordered_json::array();
  for (const auto& point : report.ranking_curve)
    curve.push_back({{"percent", point.percent}, {"mean_iou", point.mean_iou}});
  return j;
}

Eigen::MatrixXd read_matrix(const fs::path& path) {
  std::istringstream lines(read_file(path));
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t number = 0;
  while (std::getline(lines, line)) {
    ++number;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (auto field : split(line, ','))
      row.push_back(parse_finite(trim(field), path.string() + " line " + std::to_string(number)));
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError(path.string() + " line " + std::to_string(number) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + ": no rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

Eigen::VectorXd to_vector(const std::vector<double>& values) {
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::string join(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v(i));
  return out + "\n";
}

}  // namespace

void emit(const fs::path& out, const std::string& contents) {
  if (out.empty()) {
    std::cout << contents;
  } else {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_file_atomic(out, contents);
  }
}

int cmd_run(const RunConfig& config, const std::string& effective_config) {
  config.validate();
  const Dataset dataset = load_dataset(config.manifest);
  auto log = [](const std::string& message) { std::cerr << "[aetransfer] " << message << "\n"; };
  const TransferResult result = run_transfer(dataset, config, log);
  for (const auto& timing : result.timings)
    log("timing " + timing.stage + " " + std::to_string(timing.seconds) + " s");

  std::vector<ScoredAnnotation> assessed =
      self_assess(result.annotations, config.tau, config.lambda_assess);
  const GroundTruth gt = ground_truth_of(dataset);
  nlohmann::ordered_json report;
  report["source_config"] = to_string(result.source_config);
  report["source_images"] = result.source_images;
  report["annotations"] = result.annotations.size();
  report["self_assessed"] = assessed.size();
  report["gp"] = {{"initial_objective", result.gp_fit.initial_objective},
                  {"final_objective", result.gp_fit.final_objective},
                  {"iterations", result.gp_fit.iterations},
                  {"used_fitc", result.gp_fit.used_fitc}};
  report["warnings"] = result.warnings;
  std::string curve_csv;
  bool evaluated = false;
  for (const auto& a : result.annotations)
    if (gt.contains(a.image_id)) evaluated = true;
  if (evaluated) {
    const EvaluationReport evaluation = evaluate(result.annotations, gt);
    report["evaluation"] = report_json(evaluation);
    std::vector<double> scores, ious;
    for (const auto& o : evaluation.outcomes) {
      scores.push_back(o.score);
      ious.push_back(o.iou);
    }
    if (scores.size() >= 2) report["evaluation"]["spearman_eta_iou"] = spearman(scores, ious);
    const EvaluationReport baseline =
        evaluate(top_objectness_baseline(dataset, dataset.indices_with_role(Role::target)), gt);
    report["baseline_top_objectness"] = {{"mean_iou", baseline.mean_iou},
                                         {"detection_rate", baseline.detection_rate}};
    curve_csv = curve_to_csv(evaluation.ranking_curve);
    log("mean IoU " + std::to_string(evaluation.mean_iou) + ", detection rate " +
        std::to_string(evaluation.detection_rate));
  }

  write_directory_atomic(config.output_dir, [&](const fs::path& dir) {
    write_file_atomic(dir / "annotations.jsonl", annotations_to_jsonl(result.annotations));
    write_file_atomic(dir / "self_assessed.jsonl", annotations_to_jsonl(assessed));
    write_file_atomic(dir / "report.json", report.dump(2) + "\n");
    if (!curve_csv.empty()) write_file_atomic(dir / "curve.csv", curve_csv);
    write_file_atomic(dir / "config.ini", effective_config);
    fs::create_directories(dir / "models");
    for (const auto& [space, models] : result.exemplar_models)
      save_exemplar_models(dir / "models" / ("esvm_" + space + ".csv"), models);
    for (const auto& [space, model] : result.embeddings)
      save_embedding(dir / "models" / ("embedding_" + space + ".bin"), model);
    save_gp_model(dir / "models" / "gp.bin",
                  {result.gp_fit.hyperparams, result.gp_inputs, result.gp_labels});
  });
  return 0;
}

int cmd_synth(const SynthOptions& options, const fs::path& out) {
  const Dataset dataset = generate_synthetic(options);
  write_directory_atomic(out, [&](const fs::path& dir) { save_dataset(dataset, dir); });
  std::cerr << "[aetransfer] wrote " << dataset.images.size() << " images to " << out.string() << "\n";
  return 0;
}

int cmd_eval(const fs::path& annotations, const fs::path& manifest, const fs::path& out) {
  const Dataset dataset = load_dataset(manifest);
  const EvaluationReport report = evaluate(read_annotations(annotations), ground_truth_of(dataset));
  emit(out, report_json(report).dump(2) + "\n");
  return 0;
}

int cmd_curve(const fs::path& annotations, const fs::path& manifest, const fs::path& out) {
  const Dataset dataset = load_dataset(manifest);
  const EvaluationReport report = evaluate(read_annotations(annotations), ground_truth_of(dataset));
  emit(out, curve_to_csv(report.ranking_curve));
  return 0;
}

int cmd_oracle(const OracleArgs& args) {
  if (args.kind == "iou") {
    if (args.boxes.size() != 8) throw ConfigError("oracle iou: --boxes takes 8 integers");
    const double value = oracle::pixel_iou({args.boxes[0], args.boxes[1], args.boxes[2], args.boxes[3]},
                                           {args.boxes[4], args.boxes[5], args.boxes[6], args.boxes[7]});
    emit(args.out, format_double(value) + "\n");
    return 0;
  }
  if (args.kind == "kde") {
    const Eigen::MatrixXd samples = read_matrix(args.input);
    if (samples.cols() != 1) throw DataError("oracle kde: input must have one column");
    if (!(args.bandwidth > 0.0)) throw ConfigError("oracle kde: bandwidth must be positive");
    emit(args.out, join(oracle::naive_kde(samples.col(0), args.bandwidth, to_vector(args.points))));
    return 0;
  }
  const Eigen::MatrixXd input = read_matrix(args.input);
  if (args.kind == "svd") {
    if (args.d < 0 || args.d > std::min(input.rows(), input.cols()))
      throw ConfigError("oracle svd: d out of range");
    const Eigen::VectorXd values = oracle::singular_values_eig(input, args.cap);
    emit(args.out, join(values) + format_double(oracle::truncation_error_eig(input, args.d, args.cap)) + "\n");
    return 0;
  }
  // gp and gradient: descriptor columns followed by the label column.
  if (input.cols() < 2) throw DataError("oracle: input needs descriptor and label columns");
  const Eigen::MatrixXd x = input.leftCols(input.cols() - 1);
  const Eigen::VectorXd y = input.col(input.cols() - 1);
  const Eigen::VectorXd gamma = to_vector(args.gamma);
  if (gamma.size() != x.cols()) throw ConfigError("oracle: --gamma length must equal descriptor length");
  if (args.kind == "gp") {
    if (static_cast<Eigen::Index>(args.target.size()) != x.cols())
      throw ConfigError("oracle gp: --target length must equal descriptor length");
    const auto p = oracle::dense_gp(x, y, gamma, args.noise, to_vector(args.target), args.cap);
    emit(args.out, format_double(p.mu) + "," + format_double(p.variance) + "\n");
    return 0;
  }
  if (args.kind == "gradient") {
    const Eigen::Index dims = gamma.size();
    Eigen::VectorXd at(dims + 1);
    at.head(dims) = gamma.array().log().matrix();
    at(dims) = std::log(args.noise);
    auto f = [&](const Eigen::VectorXd& logs) {
      return oracle::dense_nll(x, y, logs.head(dims).array().exp().matrix(), std::exp(logs(dims)), args.alpha,
                               args.cap);
    };
    emit(args.out, join(oracle::central_gradient(f, at, args.step)));
    return 0;
  }
  throw ConfigError("oracle: unknown kind '" + args.kind + "'");
}

}  // namespace aetransfer::cli
