#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "rulkit/weibull.hpp"

using namespace rulkit::weibull;

namespace {

double eta_of(const std::vector<FailureRecord>& recs, double beta) {
  return weibayes_eta(recs, beta);
}

// Simpson's rule on [a, b] with an even number of panels.
double simpson(double a, double b, int panels, const WeibullParams& p) {
  const double h = (b - a) / panels;
  double sum = pdf(p, a) + pdf(p, b);
  for (int i = 1; i < panels; ++i) sum += pdf(p, a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

}  // namespace

TEST_CASE("cdf matches hand-computed values") {
  const WeibullParams p(2.0, 100.0);
  CHECK(cdf(p, 0.0) == 0.0);
  CHECK(cdf(p, 100.0) == doctest::Approx(0.6321205588285577).epsilon(1e-15));
  CHECK(cdf(p, 50.0) == doctest::Approx(0.22119921692859512).epsilon(1e-15));
  CHECK(cdf(p, 1e9) == doctest::Approx(1.0));
}

TEST_CASE("cdf hits one half at the distribution median") {
  for (const double beta : {0.7, 1.0, 2.0, 3.5}) {
    const WeibullParams p(beta, 42.0);
    const double median = 42.0 * std::pow(std::log(2.0), 1.0 / beta);
    CHECK(cdf(p, median) == doctest::Approx(0.5).epsilon(1e-14));
  }
  CHECK(83.25546111576976 ==
        doctest::Approx(100.0 * std::pow(std::log(2.0), 0.5)).epsilon(1e-15));
}

TEST_CASE("pdf matches hand-computed values and zero-time cases") {
  const WeibullParams p(2.0, 100.0);
  CHECK(pdf(p, 100.0) == doctest::Approx(0.007357588823428847).epsilon(1e-15));
  CHECK(pdf(p, 50.0) == doctest::Approx(0.007788007830714049).epsilon(1e-15));
  CHECK(pdf(WeibullParams(2.0, 5.0), 0.0) == 0.0);
  CHECK(pdf(WeibullParams(1.0, 5.0), 0.0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(std::isinf(pdf(WeibullParams(0.5, 5.0), 0.0)));
}

TEST_CASE("cdf time gradient equals the density") {
  for (const double beta : {1.0, 1.8, 3.0})
    for (const double t : {0.5, 20.0, 100.0, 250.0}) {
      const WeibullParams p(beta, 100.0);
      CHECK(cdf_time_gradient(p, t) == pdf(p, t));
    }
}

TEST_CASE("cdf time gradient agrees with central differences") {
  const WeibullParams p(2.5, 80.0);
  for (const double t : {1.0, 10.0, 40.0, 80.0, 160.0}) {
    const double h = std::max(t, 1.0) * 1e-6;
    const double fd = (cdf(p, t + h) - cdf(p, t - h)) / (2.0 * h);
    CHECK(cdf_time_gradient(p, t) == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("pdf integrates to the cdf") {
  for (const double beta : {1.0, 1.5, 2.5, 4.0})
    for (const double upper : {1.0, 3.0, 9.0}) {
      const WeibullParams p(beta, 3.0);
      // fractional shapes leave the integrand with unbounded derivatives at
      // zero, so Simpson converges slower than its textbook order there
      CHECK(simpson(0.0, upper, 20000, p) == doctest::Approx(cdf(p, upper)).epsilon(1e-6));
    }
}

TEST_CASE("weibayes scale matches hand-computed values") {
  CHECK(eta_of({{3.0, true}, {4.0, true}}, 2.0) ==
        doctest::Approx(3.5355339059327378).epsilon(1e-15));
  CHECK(eta_of({{3.0, true}, {4.0, false}}, 2.0) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(eta_of({{3.0, true}, {4.0, false}, {5.0, true}}, 1.5) ==
        doctest::Approx(5.296156514932403).epsilon(1e-15));
}

TEST_CASE("weibayes censored records enter the numerator but not the count") {
  const double with_censored = eta_of({{3.0, true}, {10.0, false}}, 2.0);
  const double alone = eta_of({{3.0, true}}, 2.0);
  CHECK(with_censored > alone);
  CHECK(alone == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("weibayes at unit shape with all failures is the sample mean") {
  const std::vector<FailureRecord> recs{{2.0, true}, {8.0, true}, {5.0, true}};
  CHECK(weibayes_eta(recs, 1.0) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("weibayes is scale equivariant") {
  const std::vector<FailureRecord> base{{3.0, true}, {7.0, false}, {11.0, true}, {2.5, true}};
  const double c = 137.25;
  std::vector<FailureRecord> scaled = base;
  for (auto& r : scaled) r.time *= c;
  for (const double beta : {0.8, 1.3, 2.0, 4.5})
    CHECK(weibayes_eta(scaled, beta) ==
          doctest::Approx(c * weibayes_eta(base, beta)).epsilon(1e-12));
}

TEST_CASE("parameter and argument validation") {
  CHECK_THROWS_AS(WeibullParams(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(WeibullParams(-1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(WeibullParams(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(WeibullParams(std::numeric_limits<double>::quiet_NaN(), 1.0),
                  std::invalid_argument);
  const WeibullParams p(2.0, 1.0);
  CHECK_THROWS_AS(cdf(p, -0.1), std::domain_error);
  CHECK_THROWS_AS(pdf(p, -0.1), std::domain_error);
  CHECK_THROWS_AS(cdf_time_gradient(p, -0.1), std::domain_error);
}

TEST_CASE("weibayes input validation") {
  CHECK_THROWS_AS(eta_of({}, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(eta_of({{0.0, true}}, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(eta_of({{-3.0, true}}, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(eta_of({{3.0, true}}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(eta_of({{3.0, false}, {4.0, false}}, 2.0), std::runtime_error);
}
