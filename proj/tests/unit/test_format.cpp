#include <doctest.h>

#include <aoimix/format.hpp>

#include <cmath>
#include <limits>
#include <random>

using namespace aoimix;

TEST_CASE("shortest round trip") {
  CHECK(format_double(0.1) == "0.1");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(parse_double(format_double(x)) == x);
  }
}

TEST_CASE("parse errors") {
  CHECK_THROWS(parse_double("abc"));
  CHECK_THROWS(parse_double("1.5x"));
  CHECK_THROWS(parse_double(""));
}

TEST_CASE("csv split keeps empty fields") {
  const auto f = split_csv_line("1,,3,");
  REQUIRE(f.size() == 4);
  CHECK(f[1].empty());
  CHECK(f[3].empty());
}
