#include "aetransfer/annotation.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "aetransfer/error.hpp"
#include "aetransfer/gp.hpp"
#include "aetransfer/table_io.hpp"

namespace aetransfer {

double ScoredAnnotation::reported_overlap() const { return std::clamp(eta, 0.0, 1.0); }

std::vector<ScoredAnnotation> self_assess(const std::vector<ScoredAnnotation>& annotations, double tau,
                                          double lambda) {
  std::vector<ScoredAnnotation> kept;
  for (const auto& annotation : annotations) {
    ScoredAnnotation rescored = annotation;
    rescored.eta = score({annotation.mu, annotation.sigma}, lambda);
    rescored.lambda = lambda;
    if (rescored.eta > tau) kept.push_back(rescored);
  }
  return kept;
}

std::string annotations_to_jsonl(const std::vector<ScoredAnnotation>& annotations) {
  std::string out;
  for (const auto& a : annotations) {
    nlohmann::ordered_json record;
    record["image_id"] = a.image_id;
    record["x_min"] = a.box.x_min;
    record["y_min"] = a.box.y_min;
    record["x_max"] = a.box.x_max;
    record["y_max"] = a.box.y_max;
    record["mu"] = a.mu;
    record["sigma"] = a.sigma;
    record["eta"] = a.eta;
    record["lambda"] = a.lambda;
    out += record.dump();
    out += '\n';
  }
  return out;
}

std::vector<ScoredAnnotation> annotations_from_jsonl(const std::string& text) {
  std::vector<ScoredAnnotation> out;
  std::istringstream lines(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(lines, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      const auto record = nlohmann::json::parse(line);
      ScoredAnnotation a;
      a.image_id = record.at("image_id").get<std::string>();
      a.box = {record.at("x_min").get<double>(), record.at("y_min").get<double>(),
               record.at("x_max").get<double>(), record.at("y_max").get<double>()};
      a.mu = record.at("mu").get<double>();
      a.sigma = record.at("sigma").get<double>();
      a.eta = record.at("eta").get<double>();
      a.lambda = record.at("lambda").get<double>();
      out.push_back(std::move(a));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("annotations line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

std::vector<ScoredAnnotation> read_annotations(const std::filesystem::path& path) {
  return annotations_from_jsonl(read_file(path));
}

}  // namespace aetransfer
