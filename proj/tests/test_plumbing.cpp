#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <set>
#include <string>
#include <vector>

#include "pcha/csv.hpp"
#include "pcha/experiments.hpp"
#include "pcha/rng.hpp"
#include "pcha/scaling.hpp"

using namespace pcha;

TEST_SUITE_BEGIN("plumbing");

TEST_CASE("rng streams are deterministic and seed-sensitive") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  bool differs = false;
  Rng a2(42);
  for (int i = 0; i < 10; ++i)
    if (a2.uniform() != c.uniform()) differs = true;
  CHECK(differs);
}

TEST_CASE("derived seeds separate streams and indices") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4; ++s)
    for (std::uint64_t i = 0; i < 100; ++i)
      seen.insert(derive_seed(7, s, i));
  CHECK(seen.size() == 400);
}

TEST_CASE("gaussian moments are sane") {
  Rng rng(5);
  double sum = 0.0, sumsq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sumsq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sumsq / n - 1.0) < 0.02);
}

TEST_CASE("shuffle is a permutation") {
  Rng rng(11);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  rng.shuffle(v);
  std::set<int> s(v.begin(), v.end());
  CHECK(s.size() == 10);
}

TEST_CASE("format_double round-trips exactly") {
  const double cases[] = {0.0,   1.0,    -1.5,       1.0 / 3.0,
                          1e-12, 2.5e17, -9.87e-301, 0.1,
                          3.141592653589793, 5e-324, 1.7976931348623157e308};
  for (const double v : cases) {
    const std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("csv round-trip preserves values to the bit") {
  Rng rng(3);
  Eigen::MatrixXd M(20, 3);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 3; ++j)
      M(i, j) = rng.gaussian() * std::pow(10.0, rng.uniform_int(12) - 6.0);
  const std::string path = "/tmp/pcha_roundtrip.csv";
  write_csv(path, {"a", "b", "c"}, M);
  const CsvTable back = read_csv(path);
  REQUIRE(back.rows() == 20);
  REQUIRE(back.cols() == 3);
  CHECK(back.column("b") == 1);
  CHECK(back.column("missing") == -1);
  CHECK((back.values - M).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("csv errors carry line numbers") {
  CHECK_THROWS_WITH_AS(read_csv_text("a,b\n1,2\n3\n", "inline"),
                       doctest::Contains("inline:3"), std::runtime_error);
  CHECK_THROWS_WITH_AS(read_csv_text("a,b\n1,zzz\n", "inline"),
                       doctest::Contains(":2"), std::runtime_error);
  CHECK_THROWS_AS(read_csv_text("", "inline"), std::runtime_error);
}

TEST_CASE("csv accepts quoted headers and CRLF") {
  const CsvTable t = read_csv_text("\"x\",y\r\n1,2\r\n", "inline");
  CHECK(t.column("x") == 0);
  CHECK(t.values(0, 1) == 2.0);
}

TEST_CASE("scaling maps training range onto the unit cube") {
  Eigen::MatrixXd X(3, 2);
  X << 2, 5, 4, 5, 6, 5;
  const ScalingMap map = fit_scaling(X);
  const Eigen::MatrixXd S = map.apply(X);
  CHECK(S(0, 0) == doctest::Approx(0.0));
  CHECK(S(1, 0) == doctest::Approx(0.5));
  CHECK(S(2, 0) == doctest::Approx(1.0));
  // constant column pins to 1/2
  CHECK(S(0, 1) == doctest::Approx(0.5));
  CHECK(S(2, 1) == doctest::Approx(0.5));

  Eigen::MatrixXd fresh(1, 2);
  fresh << 100.0, -3.0;
  const Eigen::MatrixXd F = map.apply(fresh);
  CHECK(F(0, 0) == doctest::Approx(1.0));  // clamped
  CHECK(F(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("slope recovers an exact power law") {
  std::vector<std::pair<double, double>> pts;
  for (const double n : {100.0, 200.0, 400.0, 800.0})
    pts.push_back({n, 4.0 * std::pow(n, -2.0 / 3.0)});
  const SlopeFit fit = estimate_slope(pts);
  CHECK(fit.slope == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
  CHECK(fit.stderr_ == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(fit.points == 4);
}

TEST_CASE("slope of constant values is zero and nonpositive values drop") {
  std::vector<std::pair<double, double>> pts{{10, 3.0}, {20, 3.0}, {40, 3.0}};
  CHECK(estimate_slope(pts).slope == doctest::Approx(0.0));

  std::vector<std::pair<double, double>> bad{
      {10, 1.0}, {20, 0.0}, {40, 2.0}, {80, 4.0}};
  const SlopeFit fit = estimate_slope(bad);
  CHECK(fit.points == 3);
  CHECK(fit.dropped == 1);

  std::vector<std::pair<double, double>> few{{10, 1.0}, {20, -1.0}, {30, 0.0}};
  const SlopeFit nan_fit = estimate_slope(few);
  CHECK(std::isnan(nan_fit.slope));
}

TEST_SUITE_END();
