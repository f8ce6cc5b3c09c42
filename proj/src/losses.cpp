#include "rulkit/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rulkit::losses {

namespace {

void require_same_size(std::span<const double> a, std::span<const double> b, const char* who) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(who) + ": size mismatch, " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  if (a.empty()) throw std::invalid_argument(std::string(who) + ": empty batch");
}

double mean_squared(std::span<const double> y, std::span<const double> y_hat) {
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - y_hat[i];
    sum += d * d;
  }
  return sum / static_cast<double>(y.size());
}

double mean_squared_log(std::span<const double> y, std::span<const double> y_hat) {
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] <= -1.0 || y_hat[i] <= -1.0)
      throw std::domain_error("rmsle: inputs must be > -1");
    const double d = std::log1p(y[i]) - std::log1p(y_hat[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(y.size());
}

enum class ErrorForm { squared, root, root_log };

ErrorForm form_of(LossKind kind) {
  switch (kind) {
    case LossKind::mse:
    case LossKind::weibull_mse:
    case LossKind::weibull_mse_comb: return ErrorForm::squared;
    case LossKind::rmse:
    case LossKind::weibull_rmse:
    case LossKind::weibull_rmse_comb: return ErrorForm::root;
    case LossKind::rmsle:
    case LossKind::weibull_rmsle:
    case LossKind::weibull_rmsle_comb: return ErrorForm::root_log;
  }
  throw std::invalid_argument("unknown loss kind");
}

double error_value(ErrorForm form, std::span<const double> a, std::span<const double> b) {
  switch (form) {
    case ErrorForm::squared: return mean_squared(a, b);
    case ErrorForm::root: return std::sqrt(mean_squared(a, b));
    case ErrorForm::root_log: return std::sqrt(mean_squared_log(a, b));
  }
  throw std::invalid_argument("unknown error form");
}

// d(error)/db_i, times an optional per-element chain factor. Square-root
// forms at exactly zero error have no derivative; the gradient is zeroed and
// the caller's degenerate flag is raised.
void accumulate_error_gradient(ErrorForm form, std::span<const double> a,
                               std::span<const double> b, std::span<const double> chain,
                               double weight, std::vector<double>& grad, bool& degenerate) {
  const double n = static_cast<double>(a.size());
  switch (form) {
    case ErrorForm::squared: {
      for (std::size_t i = 0; i < a.size(); ++i) {
        double g = (2.0 / n) * (b[i] - a[i]);
        if (!chain.empty()) g *= chain[i];
        grad[i] += weight * g;
      }
      return;
    }
    case ErrorForm::root: {
      const double value = std::sqrt(mean_squared(a, b));
      if (value == 0.0) {
        degenerate = true;
        return;
      }
      for (std::size_t i = 0; i < a.size(); ++i) {
        double g = (b[i] - a[i]) / (n * value);
        if (!chain.empty()) g *= chain[i];
        grad[i] += weight * g;
      }
      return;
    }
    case ErrorForm::root_log: {
      const double value = std::sqrt(mean_squared_log(a, b));
      if (value == 0.0) {
        degenerate = true;
        return;
      }
      for (std::size_t i = 0; i < a.size(); ++i) {
        double g = (std::log1p(b[i]) - std::log1p(a[i])) / (n * value * (1.0 + b[i]));
        if (!chain.empty()) g *= chain[i];
        grad[i] += weight * g;
      }
      return;
    }
  }
  throw std::invalid_argument("unknown error form");
}

}  // namespace

std::string_view loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::mse: return "MSE";
    case LossKind::rmse: return "RMSE";
    case LossKind::rmsle: return "RMSLE";
    case LossKind::weibull_mse: return "W-MSE";
    case LossKind::weibull_rmse: return "W-RMSE";
    case LossKind::weibull_rmsle: return "W-RMSLE";
    case LossKind::weibull_mse_comb: return "W-MSE-Comb";
    case LossKind::weibull_rmse_comb: return "W-RMSE-Comb";
    case LossKind::weibull_rmsle_comb: return "W-RMSLE-Comb";
  }
  return "?";
}

std::optional<LossKind> loss_kind_from_name(std::string_view name) {
  for (const LossKind kind : all_loss_kinds)
    if (loss_kind_name(kind) == name) return kind;
  return std::nullopt;
}

bool uses_weibull(LossKind kind) {
  return kind != LossKind::mse && kind != LossKind::rmse && kind != LossKind::rmsle;
}

bool is_combined(LossKind kind) {
  return kind == LossKind::weibull_mse_comb || kind == LossKind::weibull_rmse_comb ||
         kind == LossKind::weibull_rmsle_comb;
}

void validate_spec(const LossSpec& spec) {
  if (!std::isfinite(spec.lambda) || spec.lambda < 0.0 || spec.lambda > 3.0)
    throw std::invalid_argument("loss spec: lambda must lie in [0, 3], got " +
                                std::to_string(spec.lambda));
  if (uses_weibull(spec.kind) && !spec.weibull_params.has_value())
    throw std::invalid_argument(std::string("loss spec: ") +
                                std::string(loss_kind_name(spec.kind)) +
                                " needs Weibull parameters");
}

double mse(std::span<const double> y, std::span<const double> y_hat) {
  require_same_size(y, y_hat, "mse");
  return mean_squared(y, y_hat);
}

double rmse(std::span<const double> y, std::span<const double> y_hat) {
  require_same_size(y, y_hat, "rmse");
  return std::sqrt(mean_squared(y, y_hat));
}

double rmsle(std::span<const double> y, std::span<const double> y_hat) {
  require_same_size(y, y_hat, "rmsle");
  return std::sqrt(mean_squared_log(y, y_hat));
}

std::vector<double> weibull_fraction_failing(std::span<const double> times,
                                             const weibull::WeibullParams& params) {
  std::vector<double> fractions;
  fractions.reserve(times.size());
  for (const double t : times) fractions.push_back(weibull::cdf(params, t));
  return fractions;
}

double loss_value(const LossSpec& spec, std::span<const double> y, std::span<const double> y_hat,
                  std::span<const double> times_true, std::span<const double> times_pred) {
  validate_spec(spec);
  require_same_size(y, y_hat, "loss_value");
  const ErrorForm form = form_of(spec.kind);
  const bool weibull_term = uses_weibull(spec.kind);
  const bool combined = is_combined(spec.kind);

  double value = 0.0;
  if (!weibull_term || combined) value = error_value(form, y, y_hat);
  if (weibull_term) {
    require_same_size(times_true, times_pred, "loss_value");
    if (times_true.size() != y.size())
      throw std::invalid_argument("loss_value: time spans must match the batch");
    const auto f_true = weibull_fraction_failing(times_true, *spec.weibull_params);
    const auto f_pred = weibull_fraction_failing(times_pred, *spec.weibull_params);
    // Weighted so that a combined kind is exactly the traditional value plus
    // lambda times the pure Weibull term at lambda = 1.
    value += spec.lambda * error_value(form, f_true, f_pred);
  }
  return value;
}

LossGradient loss_gradient(const LossSpec& spec, std::span<const double> y,
                           std::span<const double> y_hat, std::span<const double> times_true,
                           std::span<const double> times_pred,
                           std::span<const double> total_runtimes) {
  validate_spec(spec);
  require_same_size(y, y_hat, "loss_gradient");
  const ErrorForm form = form_of(spec.kind);
  const bool weibull_term = uses_weibull(spec.kind);
  const bool combined = is_combined(spec.kind);

  LossGradient out;
  out.wrt_predictions.assign(y.size(), 0.0);
  if (!weibull_term || combined)
    accumulate_error_gradient(form, y, y_hat, {}, 1.0, out.wrt_predictions, out.degenerate);
  if (weibull_term) {
    require_same_size(times_true, times_pred, "loss_gradient");
    require_same_size(times_pred, total_runtimes, "loss_gradient");
    if (times_true.size() != y.size())
      throw std::invalid_argument("loss_gradient: time spans must match the batch");
    const auto f_true = weibull_fraction_failing(times_true, *spec.weibull_params);
    const auto f_pred = weibull_fraction_failing(times_pred, *spec.weibull_params);
    // dF/dy_hat_i at t_hat_i = y_hat_i * t_N_i.
    std::vector<double> chain(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
      chain[i] = weibull::cdf_time_gradient(*spec.weibull_params, times_pred[i]) * total_runtimes[i];
    accumulate_error_gradient(form, f_true, f_pred, chain, spec.lambda, out.wrt_predictions,
                              out.degenerate);
  }
  return out;
}

}  // namespace rulkit::losses
