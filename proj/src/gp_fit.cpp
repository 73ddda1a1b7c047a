#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include <ceres/ceres.h>

#include "aetransfer/error.hpp"
#include "aetransfer/gp.hpp"
#include "aetransfer/random.hpp"

namespace aetransfer {

NllValue nll_objective(const KernelHyperparams& hp, const Eigen::Ref<const Eigen::MatrixXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& y, double alpha) {
  hp.validate();
  if (x.rows() == 0 || x.rows() != y.size()) throw DataError("nll_objective: bad sample shape");
  if (alpha < 0.0) throw ConfigError("nll_objective: alpha must be non-negative");
  const Eigen::Index n = x.rows();
  const Eigen::Index dims = hp.gamma.size();

  const Eigen::MatrixXd k_se = kernel_matrix(x, x, hp.gamma);
  Eigen::MatrixXd k = k_se;
  k.diagonal().array() += hp.noise_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success)
    throw NumericalError("nll_objective: regularized kernel matrix is not positive definite");
  const Eigen::VectorXd a = llt.solve(y);
  const Eigen::MatrixXd l = llt.matrixL();

  NllValue out;
  out.value = 0.5 * y.dot(a) + l.diagonal().array().log().sum() +
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) +
              alpha * hp.gamma.squaredNorm();

  // dNLL = 1/2 tr((K^-1 - a a^T) dK); for log gamma_j, dK = K_se o D_j^2 / gamma_j^2.
  Eigen::MatrixXd w = llt.solve(Eigen::MatrixXd::Identity(n, n));
  w.noalias() -= a * a.transpose();
  const Eigen::MatrixXd wk = w.cwiseProduct(k_se);
  const Eigen::VectorXd row_sums = wk.rowwise().sum();
  out.gradient.resize(dims + 1);
  for (Eigen::Index j = 0; j < dims; ++j) {
    const Eigen::VectorXd xj = x.col(j);
    const double pair_sum = 2.0 * xj.cwiseAbs2().dot(row_sums) - 2.0 * xj.dot(wk * xj);
    out.gradient(j) = 0.5 * pair_sum / (hp.gamma(j) * hp.gamma(j)) +
                      2.0 * alpha * hp.gamma(j) * hp.gamma(j);
  }
  out.gradient(dims) = 0.5 * hp.noise_variance * w.trace();
  return out;
}

namespace {

// Each log-parameter lives in [lo, hi] through lo + (hi - lo) * sigmoid(t), so
// the optimizer runs unconstrained in t.
struct BoundedLogParams {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Eigen::VectorXd to_log(const Eigen::VectorXd& t) const {
    const Eigen::ArrayXd s = 1.0 / (1.0 + (-t.array()).exp());
    return (lo.array() + (hi - lo).array() * s).matrix();
  }
  Eigen::VectorXd dlog_dt(const Eigen::VectorXd& t) const {
    const Eigen::ArrayXd s = 1.0 / (1.0 + (-t.array()).exp());
    return ((hi - lo).array() * s * (1.0 - s)).matrix();
  }
  Eigen::VectorXd from_log(const Eigen::VectorXd& log_value) const {
    const Eigen::ArrayXd frac =
        ((log_value - lo).array() / (hi - lo).array()).max(1e-6).min(1.0 - 1e-6);
    return (frac / (1.0 - frac)).log().matrix();
  }
};

KernelHyperparams to_hyperparams(const Eigen::VectorXd& log_params) {
  const Eigen::Index dims = log_params.size() - 1;
  return {log_params.head(dims).array().exp().matrix(), std::exp(log_params(dims))};
}

struct FitTrace {
  Eigen::VectorXd last_valid_log;
  double last_valid_value = std::numeric_limits<double>::quiet_NaN();
  std::size_t evaluations = 0;
};

class NllCost final : public ceres::FirstOrderFunction {
 public:
  NllCost(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
          const Eigen::MatrixXd* pseudo, double alpha, BoundedLogParams bounds, FitTrace* trace)
      : x_(x), y_(y), pseudo_(pseudo), alpha_(alpha), bounds_(std::move(bounds)), trace_(trace) {}

  bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
    const Eigen::Map<const Eigen::VectorXd> t(parameters, NumParameters());
    const Eigen::VectorXd log_params = bounds_.to_log(t);
    NllValue value;
    try {
      const KernelHyperparams hp = to_hyperparams(log_params);
      value = pseudo_ ? nll_objective_fitc(hp, x_, y_, *pseudo_, alpha_)
                      : nll_objective(hp, x_, y_, alpha_);
    } catch (const NumericalError&) {
      return false;
    }
    if (!std::isfinite(value.value) || !value.gradient.allFinite()) return false;
    ++trace_->evaluations;
    trace_->last_valid_log = log_params;
    trace_->last_valid_value = value.value;
    *cost = value.value;
    if (gradient) {
      Eigen::Map<Eigen::VectorXd>(gradient, NumParameters()) =
          value.gradient.cwiseProduct(bounds_.dlog_dt(t));
    }
    return true;
  }

  int NumParameters() const override { return static_cast<int>(x_.cols()) + 1; }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  const Eigen::MatrixXd* pseudo_;
  double alpha_;
  BoundedLogParams bounds_;
  FitTrace* trace_;
};

std::string describe(const FitTrace& trace) {
  std::ostringstream out;
  out << "after " << trace.evaluations << " evaluations; last valid iterate";
  if (trace.last_valid_log.size() == 0) return out.str() + ": none";
  const auto hp = to_hyperparams(trace.last_valid_log);
  out << " gamma=[";
  for (Eigen::Index j = 0; j < hp.gamma.size(); ++j) out << (j ? "," : "") << hp.gamma(j);
  out << "] noise=" << hp.noise_variance << " objective=" << trace.last_valid_value;
  return out.str();
}

}  // namespace

GpFitResult fit_hyperparameters(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& y,
                                const GpFitOptions& options) {
  if (x.rows() < 2) throw DataError("fit_hyperparameters: need at least two samples");
  if (x.rows() != y.size()) throw DataError("fit_hyperparameters: sample and labels differ in size");
  if (!x.allFinite() || !y.allFinite()) throw DataError("fit_hyperparameters: non-finite sample");
  if (options.alpha < 0.0) throw ConfigError("fit_hyperparameters: alpha must be non-negative");
  const Eigen::Index dims = x.cols();

  BoundedLogParams bounds;
  bounds.lo.resize(dims + 1);
  bounds.hi.resize(dims + 1);
  bounds.lo.head(dims).setConstant(std::log(options.gamma_min));
  bounds.hi.head(dims).setConstant(std::log(options.gamma_max));
  bounds.lo(dims) = std::log(options.noise_min);
  bounds.hi(dims) = std::log(options.noise_max);

  Eigen::VectorXd init_log(dims + 1);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  for (Eigen::Index j = 0; j < dims; ++j) {
    const double var = (x.col(j).array() - mean(j)).square().sum() / static_cast<double>(x.rows() - 1);
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    init_log(j) = std::clamp(std::log(sd), bounds.lo(j), bounds.hi(j));
  }
  init_log(dims) = std::clamp(std::log(0.01), bounds.lo(dims), bounds.hi(dims));

  GpFitResult result;
  std::optional<Eigen::MatrixXd> pseudo;
  if (static_cast<std::size_t>(x.rows()) > options.exact_limit) {
    result.used_fitc = true;
    Rng rng(options.seed);
    const auto rows = rng.sample_indices(static_cast<std::size_t>(x.rows()), options.pseudo_inputs);
    pseudo.emplace(static_cast<Eigen::Index>(rows.size()), dims);
    for (std::size_t i = 0; i < rows.size(); ++i)
      pseudo->row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  }

  FitTrace trace;
  const Eigen::MatrixXd* pseudo_ptr = pseudo ? &*pseudo : nullptr;
  Eigen::VectorXd t = bounds.from_log(init_log);
  // Evaluate at the clipped start so the comparison below uses the same point.
  init_log = bounds.to_log(t);
  {
    NllCost probe(x, y, pseudo_ptr, options.alpha, bounds, &trace);
    double value = 0.0;
    if (!probe.Evaluate(t.data(), &value, nullptr))
      throw NumericalError("fit_hyperparameters: objective undefined at the initial point");
    result.initial_objective = value;
  }

  ceres::GradientProblem problem(new NllCost(x, y, pseudo_ptr, options.alpha, bounds, &trace));
  ceres::GradientProblemSolver::Options solver_options;
  solver_options.line_search_direction_type = ceres::LBFGS;
  solver_options.max_num_iterations = options.max_iterations;
  solver_options.function_tolerance = 1e-10;
  solver_options.gradient_tolerance = 1e-8;
  solver_options.parameter_tolerance = 1e-10;
  solver_options.logging_type = ceres::SILENT;
  ceres::GradientProblemSolver::Summary summary;
  ceres::Solve(solver_options, problem, t.data(), &summary);

  if (summary.termination_type == ceres::FAILURE || !std::isfinite(summary.final_cost) ||
      !t.allFinite())
    throw NumericalError("fit_hyperparameters: optimizer diverged (" + summary.message + ") " +
                         describe(trace));

  result.iterations = static_cast<int>(summary.iterations.size());
  if (summary.final_cost <= result.initial_objective) {
    result.hyperparams = to_hyperparams(bounds.to_log(t));
    result.final_objective = summary.final_cost;
  } else {
    result.hyperparams = to_hyperparams(init_log);
    result.final_objective = result.initial_objective;
  }
  return result;
}

}  // namespace aetransfer
