#include <doctest.h>

#include <vector>

#include "e11/stats.hpp"

using namespace e11;

// Reference values below were frozen from an independent SciPy session.

TEST_CASE("chi-square survival function matches reference values") {
  CHECK(chi2_sf(3.84, 1) == doctest::Approx(0.050043521248705189).epsilon(1e-10));
  CHECK(chi2_sf(10.0, 5) == doctest::Approx(0.075235246146512169).epsilon(1e-10));
  CHECK(chi2_sf(0.5, 2) == doctest::Approx(0.77880078307140488).epsilon(1e-10));
  CHECK(chi2_sf(100.0, 89) == doctest::Approx(0.1998171271092731).epsilon(1e-10));
  CHECK(chi2_sf(0.0, 3) == doctest::Approx(1.0));
}

TEST_CASE("two-sided t p-values match reference values") {
  CHECK(student_t_two_sided_p(2.0, 10) == doctest::Approx(0.073388034770740393).epsilon(1e-10));
  CHECK(student_t_two_sided_p(0.5, 4) == doctest::Approx(0.64332996318186331).epsilon(1e-10));
  CHECK(student_t_two_sided_p(5.5, 2) == doctest::Approx(0.031504003041813798).epsilon(1e-10));
  CHECK(student_t_two_sided_p(-2.0, 10) == doctest::Approx(0.073388034770740393).epsilon(1e-10));
  CHECK(student_t_two_sided_p(0.0, 7) == doctest::Approx(1.0));
}

TEST_CASE("t quantile inverts the CDF") {
  CHECK(student_t_quantile(0.975, 4) == doctest::Approx(2.7764451051977987).epsilon(1e-9));
  CHECK(student_t_quantile(0.975, 9) == doctest::Approx(2.2621571628540993).epsilon(1e-9));
  CHECK(student_t_quantile(0.025, 4) == doctest::Approx(-2.7764451051977987).epsilon(1e-9));
  CHECK(student_t_quantile(0.5, 11) == doctest::Approx(0.0));
}

TEST_CASE("gamma_p and gamma_q are complementary") {
  for (double a : {0.5, 2.0, 10.0, 44.5}) {
    for (double x : {0.1, 1.0, 5.0, 50.0}) {
      CHECK(gamma_p(a, x) + gamma_q(a, x) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("beta_inc endpoints and symmetry") {
  CHECK(beta_inc(2.0, 3.0, 0.0) == doctest::Approx(0.0));
  CHECK(beta_inc(2.0, 3.0, 1.0) == doctest::Approx(1.0));
  // I_x(a,b) = 1 - I_{1-x}(b,a)
  CHECK(beta_inc(2.5, 1.5, 0.3) ==
        doctest::Approx(1.0 - beta_inc(1.5, 2.5, 0.7)).epsilon(1e-12));
}

TEST_CASE("mean and sample sd") {
  const std::vector<double> xs = {1.0, -1.0};
  CHECK(mean(xs) == doctest::Approx(0.0));
  CHECK(sample_sd(xs) == doctest::Approx(std::sqrt(2.0)));
  CHECK(sample_sd(std::vector<double>{3.0}) == doctest::Approx(0.0));
}

TEST_CASE("spearman rho on monotone and anti-monotone data") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> up = {10, 20, 25, 40, 100};
  const std::vector<double> down = {5, 4, 3, 2, 1};
  CHECK(spearman_rho(x, up) == doctest::Approx(1.0));
  CHECK(spearman_rho(x, down) == doctest::Approx(-1.0));
}

TEST_CASE("random_normal_matrix is seed-deterministic") {
  std::mt19937_64 a(42), b(42);
  const MatrixD ma = random_normal_matrix(5, 3, a);
  const MatrixD mb = random_normal_matrix(5, 3, b);
  CHECK(ma == mb);
}
