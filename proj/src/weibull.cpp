#include "rulkit/weibull.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace rulkit::weibull {

WeibullParams::WeibullParams(double beta_in, double eta_in) : beta(beta_in), eta(eta_in) {
  if (!std::isfinite(beta) || beta <= 0.0)
    throw std::invalid_argument("WeibullParams: beta must be finite and positive, got " +
                                std::to_string(beta));
  if (!std::isfinite(eta) || eta <= 0.0)
    throw std::invalid_argument("WeibullParams: eta must be finite and positive, got " +
                                std::to_string(eta));
}

double cdf(const WeibullParams& params, double t) {
  if (!(t >= 0.0)) throw std::domain_error("weibull cdf: t must be >= 0");
  // -expm1 keeps precision for small t, where 1 - exp(-x) ~ x.
  return -std::expm1(-std::pow(t / params.eta, params.beta));
}

double pdf(const WeibullParams& params, double t) {
  if (!(t >= 0.0)) throw std::domain_error("weibull pdf: t must be >= 0");
  const double beta = params.beta;
  const double eta = params.eta;
  if (t == 0.0) {
    if (beta > 1.0) return 0.0;
    if (beta == 1.0) return 1.0 / eta;
    return std::numeric_limits<double>::infinity();  // density diverges at 0
  }
  const double x = t / eta;
  return (beta / eta) * std::pow(x, beta - 1.0) * std::exp(-std::pow(x, beta));
}

double cdf_time_gradient(const WeibullParams& params, double t) { return pdf(params, t); }

double weibayes_eta(std::span<const FailureRecord> records, double beta) {
  if (!std::isfinite(beta) || beta <= 0.0)
    throw std::invalid_argument("weibayes_eta: beta must be finite and positive");
  if (records.empty()) throw std::invalid_argument("weibayes_eta: no records");
  double sum = 0.0;
  std::size_t failures = 0;
  for (const FailureRecord& rec : records) {
    if (!std::isfinite(rec.time) || rec.time <= 0.0)
      throw std::invalid_argument("weibayes_eta: record times must be positive");
    sum += std::pow(rec.time, beta);
    if (rec.failed) ++failures;
  }
  if (failures == 0)
    throw std::runtime_error("weibayes_eta: no failures among records; eta is unbounded");
  return std::pow(sum / static_cast<double>(failures), 1.0 / beta);
}

}  // namespace rulkit::weibull
