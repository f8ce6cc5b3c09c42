#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rulkit/weibull.hpp"

namespace rulkit::losses {

// The nine training objectives: three traditional error measures on life
// fractions, the same three applied to Weibull failure fractions instead,
// and the three sums of both. Declaration order is the tie-break order used
// when ranking winners.
enum class LossKind {
  mse,
  rmse,
  rmsle,
  weibull_mse,
  weibull_rmse,
  weibull_rmsle,
  weibull_mse_comb,
  weibull_rmse_comb,
  weibull_rmsle_comb,
};

inline constexpr std::array<LossKind, 9> all_loss_kinds = {
    LossKind::mse,          LossKind::rmse,          LossKind::rmsle,
    LossKind::weibull_mse,  LossKind::weibull_rmse,  LossKind::weibull_rmsle,
    LossKind::weibull_mse_comb, LossKind::weibull_rmse_comb, LossKind::weibull_rmsle_comb,
};

std::string_view loss_kind_name(LossKind kind);
std::optional<LossKind> loss_kind_from_name(std::string_view name);

// True for the six kinds with a Weibull term.
bool uses_weibull(LossKind kind);
// True for the three traditional + Weibull sums.
bool is_combined(LossKind kind);

// Full objective description. lambda weights the Weibull term and must lie
// in [0, 3]; Weibull kinds additionally need the fitted (beta, eta).
struct LossSpec {
  LossKind kind = LossKind::mse;
  double lambda = 0.0;
  std::optional<weibull::WeibullParams> weibull_params;
};

void validate_spec(const LossSpec& spec);

double mse(std::span<const double> y, std::span<const double> y_hat);
double rmse(std::span<const double> y, std::span<const double> y_hat);
// Root mean squared log error over log(x + 1); defined for all inputs > -1.
double rmsle(std::span<const double> y, std::span<const double> y_hat);

// F(t) for each time; the population failure fraction the Weibull terms
// compare instead of life fractions.
std::vector<double> weibull_fraction_failing(std::span<const double> times,
                                             const weibull::WeibullParams& params);

// Scalar objective. y/y_hat are life fractions; times_true/times_pred are
// the matching absolute times (t_i and t_hat_i = y_hat_i * t_N_i). Only the
// Weibull kinds read the time spans.
double loss_value(const LossSpec& spec, std::span<const double> y, std::span<const double> y_hat,
                  std::span<const double> times_true, std::span<const double> times_pred);

struct LossGradient {
  std::vector<double> wrt_predictions;  // dL/dy_hat_i
  // Set when a square-root kind is evaluated at exactly zero loss, where the
  // true derivative is undefined; the gradient returned is zero.
  bool degenerate = false;
};

// Analytic dL/dy_hat. Weibull terms chain through t_hat = y_hat * t_N:
// dF/dy_hat_i = pdf(t_hat_i) * t_N_i.
LossGradient loss_gradient(const LossSpec& spec, std::span<const double> y,
                           std::span<const double> y_hat, std::span<const double> times_true,
                           std::span<const double> times_pred,
                           std::span<const double> total_runtimes);

}  // namespace rulkit::losses
