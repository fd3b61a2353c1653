#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "bethe/errors.hpp"
#include "bethe/quad.hpp"

using namespace bethe;
using std::numbers::pi;

TEST_CASE("fixed rule basics") {
  for (int n : {2, 8, 15, 31}) {
    const auto& r = gauss_legendre(n);
    double wsum = 0;
    for (int i = 0; i < n; ++i) {
      wsum += r.w[i];
      CHECK(r.x[i] == doctest::Approx(-r.x[n - 1 - i]).epsilon(1e-14));
      if (i) CHECK(r.x[i] > r.x[i - 1]);
    }
    CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
  }
  // n-point rule is exact through degree 2n-1: x^28 against 2/29
  const auto& r = gauss_legendre(15);
  double s = 0;
  for (size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * std::pow(r.x[i], 28);
  CHECK(s == doctest::Approx(2.0 / 29.0).epsilon(1e-13));
}

TEST_CASE("adaptive integrals") {
  auto q1 = integrate([](double x) { return x * x; }, 0, 1);
  CHECK(q1.value == doctest::Approx(1.0 / 3).epsilon(1e-13));

  auto q2 = integrate([](double x) { return std::sin(x); }, 0, pi);
  CHECK(q2.value == doctest::Approx(2.0).epsilon(1e-12));

  auto q3 = integrate([](double x) { return std::sin(x); }, 0, 20);
  CHECK(q3.value == doctest::Approx(1 - std::cos(20.0)).epsilon(1e-11));

  // integrable endpoint spike
  auto q4 = integrate([](double x) { return 1 / std::sqrt(x); }, 1e-12, 1,
                      {1e-9, 1e-9, 4000});
  CHECK(q4.value == doctest::Approx(2.0).epsilon(1e-5));

  // complex-valued integrand
  auto q5 = integrate(
      [](double x) { return std::exp(std::complex<double>(0, x)); }, 0, 1);
  CHECK(q5.value.real() == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
  CHECK(q5.value.imag() == doctest::Approx(1 - std::cos(1.0)).epsilon(1e-12));
}

TEST_CASE("whole line") {
  auto g = integrate_line([](double x) { return std::exp(-x * x); });
  CHECK(g.value == doctest::Approx(std::sqrt(pi)).epsilon(1e-11));

  // Lorentzian mass is 1 for every width
  for (double gam : {0.3, 1.0, 4.0}) {
    auto c = integrate_line(
        [gam](double x) { return gam / (pi * (x * x + gam * gam)); });
    CHECK(c.value == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("interval budget trips") {
  try {
    integrate([](double x) { return 1 / std::sqrt(std::abs(x)); }, -1, 1,
              {1e-14, 1e-14, 40});
    FAIL("expected nonconvergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::quadrature_nonconvergence);
  }
}
