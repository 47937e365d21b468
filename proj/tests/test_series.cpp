#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "laimpute/series.hpp"

using namespace laimpute;

namespace {

TimeSeriesRecord lai_only(std::vector<double> lai) {
  const Index n = static_cast<Index>(lai.size());
  Vector times = Vector::LinSpaced(n, 0.0, 5.0 * static_cast<double>(n - 1));
  Vector values = Eigen::Map<Vector>(lai.data(), n);
  return make_record("r", times, values, Mask::Constant(n, true), Vector::LinSpaced(n, -12.0, -6.0), Mask::Constant(n, true));
}

// Independent oracle: population mean and standard deviation by direct summation.
std::pair<double, double> population_moments(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

}  // namespace

TEST_CASE("normalize maps {2,4,6} onto standard scores") {
  const auto r = lai_only({2.0, 4.0, 6.0});
  const NormStats stats = compute_stats({r});
  const auto [mean, sd] = population_moments({2.0, 4.0, 6.0});
  CHECK(stats.lai.mean == doctest::Approx(mean).epsilon(1e-15));
  CHECK(stats.lai.std == doctest::Approx(sd).epsilon(1e-15));
  const auto n = normalize(r, stats);
  CHECK(n.lai[0] == doctest::Approx(-1.224744871391589).epsilon(1e-14));
  CHECK(std::abs(n.lai[1]) < 1e-15);
  CHECK(n.lai[2] == doctest::Approx(1.224744871391589).epsilon(1e-14));
}

TEST_CASE("compute_stats uses the population convention and pools records") {
  const NormStats single = compute_stats({lai_only({1.0, 3.0})});
  CHECK(single.lai.mean == 2.0);
  CHECK(single.lai.std == 1.0);

  const NormStats pooled = compute_stats({lai_only({0.0, 0.0}), lai_only({2.0, 2.0})});
  CHECK(pooled.lai.mean == 1.0);
  CHECK(pooled.lai.std == 1.0);
}

TEST_CASE("compute_stats rejects a channel with no observations") {
  auto r = lai_only({1.0, 2.0});
  r.lai_mask.setConstant(false);
  r.lai.setZero();
  CHECK_THROWS_AS(compute_stats({r}), EmptyChannelError);
}

TEST_CASE("normalize rejects a constant channel") {
  const auto r = lai_only({3.0, 3.0, 3.0});
  CHECK_THROWS_AS(normalize(r, compute_stats({r})), DegenerateChannelError);
  NormStats bad;
  bad.lai.std = -1.0;
  CHECK_THROWS_AS(normalize(lai_only({1.0, 2.0}), bad), DegenerateChannelError);
}

TEST_CASE("identity statistics leave observed values unchanged") {
  const auto r = lai_only({0.5, 1.5, 4.0});
  const NormStats id{{0.0, 1.0}, {0.0, 1.0}};
  CHECK(normalize(r, id) == r);
  CHECK(denormalize(r, id) == r);
}

TEST_CASE("denormalize inverts the first normalize example") {
  auto r = lai_only({-1.224744871391589, 0.0, 1.0});
  NormStats s{{4.0, 1.632993161855452}, {0.0, 1.0}};
  CHECK(denormalize(r, s).lai[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("property: denormalize(normalize(r)) == r and masks/sentinels are untouched") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 3 + uniform_int(rng, 0, 30);
    Vector lai(n), vhvv(n);
    Mask lm(n), vm(n);
    for (Index i = 0; i < n; ++i) {
      lai[i] = uniform(rng, 0.1, 6.0);
      vhvv[i] = uniform(rng, -15.0, -5.0);
      lm[i] = uniform01(rng) < 0.6;
      vm[i] = !lm[i] || uniform01(rng) < 0.7;
    }
    lm[0] = vm[0] = true;
    lm[1] = vm[1] = true;
    lai[1] += 1.0;
    vhvv[1] += 1.0;
    const auto r = make_record("p", Vector::LinSpaced(n, 0.0, static_cast<double>(n)), lai, lm, vhvv, vm);
    const NormStats s = compute_stats({r});
    const auto z = normalize(r, s);
    CHECK((z.lai_mask == r.lai_mask).all());
    CHECK((z.vhvv_mask == r.vhvv_mask).all());
    for (Index i = 0; i < n; ++i) {
      if (!r.lai_mask[i]) CHECK(z.lai[i] == 0.0);
      if (!r.vhvv_mask[i]) CHECK(z.vhvv[i] == 0.0);
    }
    const auto back = denormalize(z, s);
    CHECK((back.lai - r.lai).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((back.vhvv - r.vhvv).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("gaussian kernel for window 5 has sigma 1") {
  const Vector k = gaussian_kernel(5);
  REQUIRE(k.size() == 5);
  double norm = 0.0;
  for (int j = -2; j <= 2; ++j) norm += std::exp(-0.5 * j * j);
  for (int j = -2; j <= 2; ++j) CHECK(k[j + 2] == doctest::Approx(std::exp(-0.5 * j * j) / norm).epsilon(1e-15));
  CHECK_THROWS_AS(gaussian_kernel(4), ParameterError);
  CHECK_THROWS_AS(gaussian_kernel(0), ParameterError);
}

TEST_CASE("gaussian_smooth of a centred impulse reproduces the kernel weights") {
  Vector v = Vector::Zero(9);
  v[4] = 1.0;
  const Vector out = gaussian_smooth(v, Mask::Constant(9, true), 5);
  double norm = 0.0;
  for (int j = -2; j <= 2; ++j) norm += std::exp(-0.5 * j * j);
  for (int j = -2; j <= 2; ++j) CHECK(out[4 + j] == doctest::Approx(std::exp(-0.5 * j * j) / norm).epsilon(1e-14));
  CHECK(out[0] == 0.0);
  CHECK(out[8] == 0.0);
}

TEST_CASE("gaussian_smooth: constants, window 1, masked entries") {
  const Vector c = Vector::Constant(12, -7.3);
  Mask m = Mask::Constant(12, true);
  m[3] = m[4] = m[10] = false;
  Vector cm = c;
  cm[3] = cm[4] = cm[10] = 0.0;
  for (int w : {1, 3, 5, 9}) {
    const Vector out = gaussian_smooth(cm, m, w);
    for (Index i = 0; i < 12; ++i) {
      if (m[i]) CHECK(out[i] == -7.3);
      else CHECK(out[i] == 0.0);
    }
  }
  Rng rng(3);
  Vector r(10);
  for (auto& x : r) x = uniform01(rng);
  CHECK(gaussian_smooth(r, Mask::Constant(10, true), 1) == r);
}

TEST_CASE("interpolate_to_times: exact at knots, midpoint, clamping, masked sources") {
  Vector t(4), v(4);
  t << 0.0, 2.0, 5.0, 9.0;
  v << -8.0, -6.0, 123.0, -4.0;
  Mask m(4);
  m << true, true, false, true;
  Vector q(6);
  q << -3.0, 0.0, 1.0, 2.0, 9.0, 20.0;
  const Vector out = interpolate_to_times(t, v, m, q);
  CHECK(out[0] == -8.0);
  CHECK(out[1] == -8.0);
  CHECK(out[2] == -7.0);
  CHECK(out[3] == -6.0);
  CHECK(out[4] == -4.0);
  CHECK(out[5] == -4.0);

  Vector q2(1);
  q2 << 5.0;
  CHECK(interpolate_to_times(t, v, m, q2)[0] == doctest::Approx(-6.0 + 2.0 * 3.0 / 7.0).epsilon(1e-15));

  Mask one = Mask::Constant(4, false);
  one[1] = true;
  CHECK_THROWS_AS(interpolate_to_times(t, v, one, q), InsufficientDataError);
}

TEST_CASE("record invariants are enforced") {
  Vector t(2);
  t << 0.0, 0.0;
  CHECK_THROWS_AS(make_record("x", t, Vector::Ones(2), Mask::Constant(2, true), Vector::Ones(2), Mask::Constant(2, true)),
                  InvalidRecordError);
  t << 0.0, 1.0;
  Mask none = Mask::Constant(2, false);
  Mask lm(2);
  lm << true, false;
  CHECK_THROWS_AS(make_record("x", t, Vector::Ones(2), lm, Vector::Ones(2), none), InvalidRecordError);
  const auto r = make_record("x", t, Vector::Constant(2, 9.0), lm, Vector::Constant(2, -9.0), Mask::Constant(2, true));
  CHECK(r.lai[1] == 0.0);
}

TEST_CASE("csv rows with one empty channel") {
  std::istringstream in(
      "series_id,t_index,acq_time_days,lai,vhvv_db\n"
      "A,0,31,0.32,,\n"
      "A,1,36,,-8.28\n");
  const auto recs = read_csv(in);
  REQUIRE(recs.size() == 1);
  const auto& r = recs[0];
  CHECK(r.series_id == "A");
  CHECK(r.times[0] == 31.0);
  CHECK(r.lai_mask[0]);
  CHECK(r.lai[0] == 0.32);
  CHECK(!r.vhvv_mask[0]);
  CHECK(r.vhvv[0] == 0.0);
  CHECK(!r.lai_mask[1]);
  CHECK(r.lai[1] == 0.0);
  CHECK(r.vhvv_mask[1]);
  CHECK(r.vhvv[1] == -8.28);
}

TEST_CASE("csv parse errors carry the offending line number") {
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      read_csv(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  const std::string header = "series_id,t_index,acq_time_days,lai,vhvv_db\n";
  CHECK(line_of(header + "A,0,1,0.5,-8\nA,1,2,,\n") == 3);
  CHECK(line_of(header + "A,0,1,0.5,-8\nA,1,1,0.6,-8\n") == 3);
  CHECK(line_of(header + "A,0,1,0.5,-8\nA,1,2,abc,-8\n") == 3);
  CHECK(line_of(header + "A,0,1,0.5\n") == 2);
  CHECK(line_of(header + "A,0,1,0.5,-8\nB,0,1,0.5,-8\nA,1,2,0.5,-8\n") == 4);
  CHECK(line_of("id,t,x\n") == 1);
}

TEST_CASE("csv round trip is bit-faithful") {
  Rng rng(5);
  std::vector<TimeSeriesRecord> recs;
  for (int s = 0; s < 4; ++s) {
    const Index n = 5 + s;
    Vector t(n), lai(n), vv(n);
    Mask lm(n), vm(n);
    double time = uniform(rng, 0.0, 3.0);
    for (Index i = 0; i < n; ++i) {
      t[i] = time;
      time += uniform(rng, 0.1, 9.0);
      lai[i] = uniform(rng, 0.0, 6.0);
      vv[i] = uniform(rng, -20.0, -1.0) * 1.0000000000000002;
      lm[i] = uniform01(rng) < 0.5;
      vm[i] = !lm[i] || uniform01(rng) < 0.5;
    }
    recs.push_back(make_record("S" + std::to_string(s), t, lai, lm, vv, vm));
  }
  std::stringstream buf;
  write_csv(recs, buf);
  const auto back = read_csv(buf);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) CHECK(back[i] == recs[i]);
}
