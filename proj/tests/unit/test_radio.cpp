#include <doctest.h>

#include "helpers.hpp"

#include <aoimix/radio.hpp>

#include <cmath>

using namespace aoimix;

namespace {

RadioModel make_radio(std::vector<double> d, double alpha = 3.0) {
  RadioModel::Params p;
  p.pathloss_exponent = alpha;
  p.reference_gain = 1e-3;
  const std::size_t n = d.size();
  return RadioModel(p, std::move(d), std::vector<int>(n, 10));
}

}  // namespace

TEST_CASE("dbm conversion") {
  CHECK(dbm_to_watts(30.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(dbm_to_watts(-95.0) == doctest::Approx(std::pow(10.0, -12.5)).epsilon(1e-14));
}

TEST_CASE("fading draws have unit mean") {
  RadioModel r = make_radio({10.0});
  Rng rng(17);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    r.draw_fading(rng);
    CHECK(r.fading(0) >= 0.0);
    sum += r.fading(0);
  }
  const double mean = sum / n;
  CHECK(mean > 0.99);
  CHECK(mean < 1.01);
}

TEST_CASE("doubling distance with exponent 2 quarters the path gain") {
  RadioModel r = make_radio({20.0, 40.0}, 2.0);
  CHECK(testing::rel_err(r.path_gain(0) / r.path_gain(1), 4.0) < 1e-15);
}

TEST_CASE("same seed gives the same fading sequence") {
  RadioModel a = make_radio({10.0, 50.0}), b = make_radio({10.0, 50.0});
  std::vector<Rng> ra{Rng(1), Rng(2)}, rb{Rng(1), Rng(2)};
  for (int i = 0; i < 100; ++i) {
    a.draw_fading(ra);
    b.draw_fading(rb);
    CHECK(a.fading(0) == b.fading(0));
    CHECK(a.fading(1) == b.fading(1));
  }
}

TEST_CASE("rate") {
  RadioModel r = make_radio({10.0});
  const auto& p = r.params();
  CHECK(r.rate_with_gain(1.0, false) == 0.0);
  SUBCASE("unit SNR gives one bit per hertz") {
    const double h = p.noise_w / p.tx_power_w;
    CHECK(r.rate_with_gain(h, true) == doctest::Approx(180000.0).epsilon(1e-15));
  }
  SUBCASE("direct formula") {
    const double noise = std::pow(10.0, (-95.0 - 30.0) / 10.0);
    const double expect = 180000.0 * std::log2(1.0 + 0.5 * 1e-9 / noise);
    CHECK(testing::rel_err(r.rate_with_gain(1e-9, true), expect) < 1e-14);
  }
}

TEST_CASE("delay") {
  RadioModel r = make_radio({30.0});
  CHECK_FALSE(r.delay(0, false).has_value());
  SUBCASE("10 bits at 180 kb/s") {
    const double h = r.params().noise_w / r.params().tx_power_w;
    CHECK(*r.delay_with_gain(0, h, true) == doctest::Approx(10.0 / 180000.0).epsilon(1e-15));
  }
  SUBCASE("random fading equals Z over rate") {
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
      r.draw_fading(rng);
      const double rate = 180000.0 * std::log2(1.0 + 0.5 * r.channel_gain(0) / r.params().noise_w);
      const double expect = std::min(10.0 / rate, r.params().slot_duration_s);
      CHECK(testing::rel_err(*r.delay(0, true), expect) < 1e-14);
    }
  }
  SUBCASE("deep fade is capped at the slot and counted") {
    r.set_fading(0, 1e-30);
    CHECK(*r.delay(0, true) == r.params().slot_duration_s);
    CHECK(r.truncation_count() == 1);
  }
}

TEST_CASE("expected delay") {
  RadioModel r = make_radio({60.0});
  SUBCASE("degenerate fading equals the delay at g = 1") {
    Rng rng(3);
    r.set_fading(0, 1.0);
    const double at_one = *r.delay_with_gain(0, r.path_gain(0), true);
    CHECK(r.expected_delay_uncached(0, 50, rng, true) == at_one);
  }
  SUBCASE("deterministic for a seed") {
    Rng a(5), b(5);
    CHECK(r.expected_delay_uncached(0, 100000, a) == r.expected_delay_uncached(0, 100000, b));
  }
  SUBCASE("large and small Monte-Carlo runs agree within three standard errors") {
    Rng a(6), b(7), c(8);
    const double big = r.expected_delay_uncached(0, 1000000, a);
    const double small = r.expected_delay_uncached(0, 10000, b);
    // Capped deep fades make the delay heavy-tailed, so the spread comes from
    // a large independent sample of single draws.
    double s = 0.0, s2 = 0.0;
    const int draws = 1000000;
    for (int i = 0; i < draws; ++i) {
      const double d = r.expected_delay_uncached(0, 1, c);
      s += d;
      s2 += d * d;
    }
    const double var = (s2 - s * s / draws) / (draws - 1);
    const double se = std::sqrt(var / 10000 + var / 1000000);
    CHECK(std::abs(big - small) <= 3.0 * se);
  }
  SUBCASE("cached per slot") {
    Rng a(1);
    const double first = r.expected_delay(0, 1000, a, 4);
    CHECK(r.expected_delay(0, 1000, a, 4) == first);
  }
}

TEST_CASE("reference gain calibration puts the median SNR on target") {
  const double noise = dbm_to_watts(-95.0);
  const double g = calibrate_reference_gain(0.5, noise, 100.0, 3.0, 20.0);
  const double median_snr = 0.5 * g * std::pow(100.0, -3.0) * std::log(2.0) / noise;
  CHECK(testing::rel_err(10.0 * std::log10(median_snr), 20.0) < 1e-12);
}
