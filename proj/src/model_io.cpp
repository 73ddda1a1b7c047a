#include "aetransfer/model_io.hpp"

#include <sstream>
#include <string>

#include "aetransfer/error.hpp"
#include "aetransfer/table_io.hpp"

namespace aetransfer {

namespace {

constexpr std::string_view kEmbeddingMagic = "AEEMB001";
constexpr std::string_view kGpMagic = "AEGPM001";

void expect_magic(BinaryReader& in, std::string_view magic, const std::filesystem::path& path) {
  if (in.bytes(magic.size()) != magic) throw DataError("unexpected file format: " + path.string());
}

}  // namespace

void save_exemplar_models(const std::filesystem::path& path, const std::vector<ExemplarModel>& models) {
  Eigen::Index dim = models.empty() ? 0 : models.front().weights.size();
  std::string out = "exemplar_id,feature_space,bias";
  for (Eigen::Index j = 0; j < dim; ++j) out += ",w_" + std::to_string(j);
  out += '\n';
  for (const auto& model : models) {
    if (model.weights.size() != dim) throw DataError("exemplar models differ in dimension");
    if (model.exemplar_id.find(',') != std::string::npos ||
        model.feature_space.find(',') != std::string::npos)
      throw DataError("exemplar identifiers may not contain commas");
    out += model.exemplar_id + ',' + model.feature_space + ',' + format_double(model.bias);
    for (Eigen::Index j = 0; j < dim; ++j) out += ',' + format_double(model.weights(j));
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<ExemplarModel> load_exemplar_models(const std::filesystem::path& path) {
  std::istringstream lines(read_file(path));
  std::string line;
  if (!std::getline(lines, line)) throw DataError(path.string() + ": empty model table");
  const auto header = split(line, ',');
  if (header.size() < 3 || header[0] != "exemplar_id" || header[1] != "feature_space" ||
      header[2] != "bias")
    throw DataError(path.string() + ": bad model table header");
  const auto dim = static_cast<Eigen::Index>(header.size() - 3);
  std::vector<ExemplarModel> models;
  std::size_t row = 1;
  while (std::getline(lines, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    const std::string context = path.string() + " row " + std::to_string(row);
    if (fields.size() != header.size()) throw DataError(context + ": wrong field count");
    ExemplarModel model;
    model.exemplar_id = std::string(fields[0]);
    model.feature_space = std::string(fields[1]);
    model.bias = parse_finite(fields[2], context);
    model.weights.resize(dim);
    for (Eigen::Index j = 0; j < dim; ++j)
      model.weights(j) = parse_finite(fields[static_cast<std::size_t>(j) + 3], context);
    models.push_back(std::move(model));
  }
  return models;
}

void save_embedding(const std::filesystem::path& path, const EmbeddingModel& model) {
  BinaryWriter out;
  out.bytes(kEmbeddingMagic);
  out.str(model.feature_space());
  out.u64(static_cast<std::uint64_t>(model.dim()));
  out.u64(static_cast<std::uint64_t>(model.exemplar_count()));
  for (Eigen::Index r = 0; r < model.v().rows(); ++r)
    for (Eigen::Index c = 0; c < model.v().cols(); ++c) out.f64(model.v()(r, c));
  write_file_atomic(path, out.data());
}

EmbeddingModel load_embedding(const std::filesystem::path& path) {
  BinaryReader in(read_file(path));
  expect_magic(in, kEmbeddingMagic, path);
  std::string space = in.str();
  const auto d = static_cast<Eigen::Index>(in.u64());
  const auto rows = static_cast<Eigen::Index>(in.u64());
  Eigen::MatrixXd v(rows, d);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < d; ++c) v(r, c) = in.f64();
  if (!in.at_end()) throw DataError(path.string() + ": trailing bytes");
  return EmbeddingModel(std::move(space), std::move(v));
}

void save_gp_model(const std::filesystem::path& path, const GpModelData& model) {
  const Eigen::Index dims = model.hyperparams.gamma.size();
  if (model.inputs.cols() != dims || model.inputs.rows() != model.labels.size())
    throw DataError("save_gp_model: inducing set does not match the hyperparameters");
  BinaryWriter out;
  out.bytes(kGpMagic);
  out.u64(static_cast<std::uint64_t>(dims));
  for (Eigen::Index j = 0; j < dims; ++j) out.f64(model.hyperparams.gamma(j));
  out.f64(model.hyperparams.noise_variance);
  out.u64(static_cast<std::uint64_t>(model.inputs.rows()));
  for (Eigen::Index r = 0; r < model.inputs.rows(); ++r)
    for (Eigen::Index c = 0; c < dims; ++c) out.f64(model.inputs(r, c));
  for (Eigen::Index r = 0; r < model.labels.size(); ++r) out.f64(model.labels(r));
  write_file_atomic(path, out.data());
}

GpModelData load_gp_model(const std::filesystem::path& path) {
  BinaryReader in(read_file(path));
  expect_magic(in, kGpMagic, path);
  GpModelData model;
  const auto dims = static_cast<Eigen::Index>(in.u64());
  model.hyperparams.gamma.resize(dims);
  for (Eigen::Index j = 0; j < dims; ++j) model.hyperparams.gamma(j) = in.f64();
  model.hyperparams.noise_variance = in.f64();
  const auto n = static_cast<Eigen::Index>(in.u64());
  model.inputs.resize(n, dims);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < dims; ++c) model.inputs(r, c) = in.f64();
  model.labels.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) model.labels(r) = in.f64();
  if (!in.at_end()) throw DataError(path.string() + ": trailing bytes");
  return model;
}

}  // namespace aetransfer
