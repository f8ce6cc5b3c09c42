#pragma once

#include <span>

namespace rulkit::weibull {

// Two-parameter Weibull law. beta is the shape, eta the characteristic life
// (the time by which 63.2% of units have failed).
struct WeibullParams {
  double beta;
  double eta;
  WeibullParams(double beta_in, double eta_in);
};

// One run-to-failure observation. Censored records (failed == false) mark
// units that survived past `time` without failing.
struct FailureRecord {
  double time = 0.0;
  bool failed = true;
};

// F(t) = 1 - exp(-(t/eta)^beta), fraction of the population failed by t.
double cdf(const WeibullParams& params, double t);

// f(t) = (beta/eta) * (t/eta)^(beta-1) * exp(-(t/eta)^beta).
// At t = 0: 0 for beta > 1, 1/eta for beta == 1, and the density diverges
// for beta < 1 (returned as +infinity).
double pdf(const WeibullParams& params, double t);

// dF/dt, identical to the density; separate entry point because loss
// gradients chain through it.
double cdf_time_gradient(const WeibullParams& params, double t);

// Weibayes scale fit with beta held fixed:
//   eta = (sum_i t_i^beta / r)^(1/beta)
// where the sum runs over every record, failed and censored alike, and r
// counts only the failures. At least one failure is required.
double weibayes_eta(std::span<const FailureRecord> records, double beta);

}  // namespace rulkit::weibull
