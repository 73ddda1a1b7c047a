#include "aetransfer/pipeline.hpp"

#include <chrono>
#include <optional>

#include "aetransfer/error.hpp"
#include "aetransfer/parallel.hpp"
#include "aetransfer/random.hpp"
#include "aetransfer/retrieval.hpp"

namespace aetransfer {

std::size_t select_window(const std::vector<OverlapPrediction>& predictions, double lambda) {
  if (predictions.empty()) throw DataError("select_window: no windows");
  std::size_t best = 0;
  double best_eta = score(predictions[0], lambda);
  for (std::size_t i = 1; i < predictions.size(); ++i) {
    const double eta = score(predictions[i], lambda);
    if (eta > best_eta) {
      best = i;
      best_eta = eta;
    }
  }
  return best;
}

Eigen::MatrixXd image_descriptors(const ImageRecord& image,
                                  const std::map<std::string, Eigen::MatrixXd>& embedded,
                                  const std::vector<FeatureSpace>& feature_spaces) {
  Eigen::MatrixXd out;
  for (std::size_t w = 0; w < image.windows.size(); ++w) {
    std::map<std::string, Eigen::VectorXd> blocks;
    for (const auto& [name, rows] : embedded)
      blocks[name] = rows.row(static_cast<Eigen::Index>(w)).transpose();
    const Eigen::VectorXd phi =
        build_descriptor(image.windows[w], image.width, image.height, blocks, feature_spaces);
    if (w == 0) out.resize(static_cast<Eigen::Index>(image.windows.size()), phi.size());
    out.row(static_cast<Eigen::Index>(w)) = phi.transpose();
  }
  return out;
}

namespace {

class StageRunner {
 public:
  StageRunner(TransferResult& result, const Logger& log) : result_(result), log_(log) {}

  template <typename Fn>
  void operator()(const std::string& stage, Fn&& fn) {
    if (log_) log_("stage " + stage);
    const auto start = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const Error& e) {
      rethrow_with_stage(e, stage);
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    result_.timings.push_back({stage, elapsed.count()});
  }

 private:
  TransferResult& result_;
  const Logger& log_;
};

Eigen::MatrixXd gather_rows(const Dataset& dataset, const std::vector<WindowRef>& refs,
                            const std::string& space) {
  const auto& first = dataset.images.at(refs.front().image).feature_table(space);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(refs.size()), first.cols());
  for (std::size_t i = 0; i < refs.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = dataset.images.at(refs[i].image)
                                                .feature_table(space)
                                                .row(static_cast<Eigen::Index>(refs[i].window));
  return out;
}

std::vector<WindowRef> all_windows(const Dataset& dataset, const std::vector<std::size_t>& images) {
  std::vector<WindowRef> refs;
  for (std::size_t image : images)
    for (std::size_t w = 0; w < dataset.images[image].windows.size(); ++w) refs.push_back({image, w});
  return refs;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& items, const std::vector<std::size_t>& rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(items[r]);
  return out;
}

}  // namespace

TransferResult run_transfer(const Dataset& input, const RunConfig& config, const Logger& log) {
  config.validate();
  TransferResult result;
  StageRunner stage(result, log);

  Dataset dataset;
  std::vector<std::size_t> sources;
  std::vector<std::size_t> targets;
  std::vector<std::size_t> participants;
  stage("prepare", [&] {
    result.source_config = config.resolve_source_config(input.source_config);
    dataset = input;
    sources = dataset.source_indices(result.source_config);
    targets = dataset.indices_with_role(Role::target);
    if (sources.empty())
      throw DataError("no source images for configuration '" + to_string(result.source_config) + "'");
    for (std::size_t s : sources) dataset.images[s] = label_overlaps(dataset.images[s]);
    participants = sources;
    participants.insert(participants.end(), targets.begin(), targets.end());
    std::sort(participants.begin(), participants.end());
    result.source_images = sources.size();
  });

  std::vector<std::string> spaces;
  for (const auto& space : dataset.feature_spaces) spaces.push_back(space.name);
  std::sort(spaces.begin(), spaces.end());

  stage("esvm", [&] {
    const auto exemplars = collect_exemplars(dataset, sources);
    if (exemplars.empty()) throw DataError("no source object has a covering window");
    if (log) log("training " + std::to_string(exemplars.size() * spaces.size()) + " exemplar SVMs");
    EsvmParams params;
    params.c1 = config.c1;
    params.c2 = config.c2;
    params.max_passes = config.esvm_max_passes;
    params.tolerance = config.esvm_tolerance;
    for (const auto& space : spaces) result.exemplar_models[space].resize(exemplars.size());
    const std::uint64_t negative_seed = derive_seed(config.seed, "negatives");
    parallel_for(exemplars.size(), config.threads, [&](std::size_t e) {
      const auto& exemplar = exemplars[e];
      const auto negatives = mine_negatives(dataset, sources, exemplar, config.max_negatives,
                                            derive_seed(negative_seed, exemplar.exemplar_id));
      for (const auto& space : spaces) {
        const Eigen::MatrixXd negative_rows = gather_rows(dataset, negatives, space);
        const Eigen::VectorXd positive = dataset.images[exemplar.image].feature_table(space).row(
            static_cast<Eigen::Index>(exemplar.window));
        ExemplarModel model;
        try {
          model = train_esvm(positive, negative_rows, params);
        } catch (const Error& err) {
          rethrow_with_stage(err, "exemplar " + exemplar.exemplar_id + " [" + space + "]");
        }
        model.exemplar_id = exemplar.exemplar_id;
        model.feature_space = space;
        result.exemplar_models[space][e] = std::move(model);
      }
    });
  });

  // Per participating image and feature space: (windows x d) embedded rows.
  std::vector<std::map<std::string, Eigen::MatrixXd>> embedded(dataset.images.size());
  stage("embedding", [&] {
    const auto pool = all_windows(dataset, participants);
    Rng rng(derive_seed(config.seed, "ae-subsample"));
    const auto rows = pick(pool, rng.sample_indices(pool.size(), config.ae_subsample));
    for (const auto& space : spaces) {
      const auto& models = result.exemplar_models[space];
      const auto responses = response_matrix(dataset, rows, models, space);
      auto fit = fit_embedding(responses.values, config.d, space);
      result.embeddings.emplace(space, fit.model);
    }
    parallel_for(participants.size(), config.threads, [&](std::size_t p) {
      const auto& image = dataset.images[participants[p]];
      for (const auto& space : spaces) {
        const auto responses = image_responses(image, result.exemplar_models[space], space);
        embedded[participants[p]][space] = embed_all(responses, result.embeddings.at(space));
      }
    });
  });

  std::vector<Eigen::MatrixXd> descriptors(dataset.images.size());
  stage("descriptors", [&] {
    parallel_for(participants.size(), config.threads, [&](std::size_t p) {
      const std::size_t index = participants[p];
      descriptors[index] =
          image_descriptors(dataset.images[index], embedded[index], dataset.feature_spaces);
      embedded[index].clear();
    });
  });

  stage("gp-fit", [&] {
    const auto pool = all_windows(dataset, sources);
    Rng rng(derive_seed(config.seed, "gp-subsample"));
    const auto rows = pick(pool, rng.sample_indices(pool.size(), config.gp_subsample));
    if (rows.size() < 2) throw DataError("fewer than two labeled source windows");
    result.gp_inputs.resize(static_cast<Eigen::Index>(rows.size()), descriptors[sources[0]].cols());
    result.gp_labels.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      result.gp_inputs.row(r) = descriptors[rows[i].image].row(static_cast<Eigen::Index>(rows[i].window));
      result.gp_labels(r) = *dataset.images[rows[i].image].windows[rows[i].window].overlap;
    }
    GpFitOptions options;
    options.alpha = config.alpha;
    options.seed = derive_seed(config.seed, "gp-fit");
    options.exact_limit = config.gp_exact_limit;
    options.pseudo_inputs = config.gp_pseudo_inputs;
    options.max_iterations = config.gp_max_iterations;
    result.gp_fit = fit_hyperparameters(result.gp_inputs, result.gp_labels, options);
    if (log)
      log("gp objective " + std::to_string(result.gp_fit.initial_objective) + " -> " +
          std::to_string(result.gp_fit.final_objective));
  });

  SignatureGrid grid;
  std::vector<ImageSignature> signatures(dataset.images.size());
  stage("signatures", [&] {
    Eigen::Index total = 0;
    for (std::size_t s : sources) total += descriptors[s].rows();
    Eigen::MatrixXd pooled(total, descriptors[sources[0]].cols());
    Eigen::Index offset = 0;
    for (std::size_t s : sources) {
      pooled.middleRows(offset, descriptors[s].rows()) = descriptors[s];
      offset += descriptors[s].rows();
    }
    grid = make_signature_grid(pooled);
    if (!config.signature_cache.empty()) std::filesystem::create_directories(config.signature_cache);
    parallel_for(participants.size(), config.threads, [&](std::size_t p) {
      const std::size_t index = participants[p];
      const auto& image = dataset.images[index];
      if (image.windows.empty()) return;
      std::optional<ImageSignature> cached;
      std::filesystem::path path;
      if (!config.signature_cache.empty()) {
        path = signature_cache_path(config.signature_cache, image.image_id, grid);
        cached = load_signature(path, grid);
      }
      if (cached) {
        signatures[index] = std::move(*cached);
      } else {
        signatures[index] = image_signature(descriptors[index], grid);
        if (!path.empty()) save_signature(path, signatures[index]);
      }
    });
  });

  std::vector<std::optional<ScoredAnnotation>> slots(targets.size());
  std::vector<std::string> failures(targets.size());
  stage("predict", [&] {
    std::vector<SourceSignature> source_signatures;
    for (std::size_t s : sources)
      if (!dataset.images[s].windows.empty())
        source_signatures.push_back({dataset.images[s].image_id, &signatures[s]});
    std::map<std::string, std::size_t> index_of;
    for (std::size_t s : sources) index_of[dataset.images[s].image_id] = s;
    const auto& hp = result.gp_fit.hyperparams;

    parallel_for(targets.size(), config.threads, [&](std::size_t t) {
      const auto& image = dataset.images[targets[t]];
      Eigen::MatrixXd inducing;
      Eigen::VectorXd labels;
      try {
        if (image.windows.empty()) throw DataError("image has no windows");
        std::vector<SourceSignature> candidates;
        for (const auto& source : source_signatures)
          if (source.image_id != image.image_id) candidates.push_back(source);
        if (candidates.empty()) throw DataError("no source image to retrieve");
        const auto shortlist = top_k_sources(signatures[targets[t]], candidates, config.k, grid);
        std::vector<std::size_t> chosen;
        for (const auto& id : shortlist.image_ids) chosen.push_back(index_of.at(id));
        std::sort(chosen.begin(), chosen.end());
        const auto pool = all_windows(dataset, chosen);
        Rng rng(derive_seed(derive_seed(config.seed, "inducing"), image.image_id));
        const auto rows = pick(pool, rng.sample_indices(pool.size(), config.inducing_cap));
        inducing.resize(static_cast<Eigen::Index>(rows.size()), hp.gamma.size());
        labels.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const auto r = static_cast<Eigen::Index>(i);
          inducing.row(r) = descriptors[rows[i].image].row(static_cast<Eigen::Index>(rows[i].window));
          labels(r) = *dataset.images[rows[i].image].windows[rows[i].window].overlap;
        }
      } catch (const DataError& e) {
        failures[t] = image.image_id + ": retrieval failed: " + e.what();
        return;
      }
      Rng rng(derive_seed(derive_seed(config.seed, "pseudo-inputs"), image.image_id));
      const auto n = static_cast<std::size_t>(inducing.rows());
      const FitcPredictor predictor(hp, inducing, labels,
                                    rng.sample_indices(n, std::min(config.m, n)));
      const Eigen::MatrixXd& phi = descriptors[targets[t]];
      std::vector<OverlapPrediction> predictions;
      predictions.reserve(static_cast<std::size_t>(phi.rows()));
      for (Eigen::Index w = 0; w < phi.rows(); ++w)
        predictions.push_back(predictor.predict(phi.row(w).transpose()));
      const std::size_t best = select_window(predictions, config.lambda_localize);
      const auto& p = predictions[best];
      slots[t] = ScoredAnnotation{image.image_id, image.windows[best].box, p.mu, p.sigma,
                                  score(p, config.lambda_localize), config.lambda_localize};
    });
  });

  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (slots[t]) result.annotations.push_back(std::move(*slots[t]));
    if (!failures[t].empty()) {
      result.warnings.push_back(failures[t]);
      if (log) log("warning: " + failures[t]);
    }
  }
  // Targets are visited in image order, which is image_id order.
  return result;
}

}  // namespace aetransfer
