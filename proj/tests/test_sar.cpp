#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "laimpute/sar.hpp"
#include "laimpute/synth.hpp"

using namespace laimpute;
namespace fs = std::filesystem;

namespace {

RasterStack stack_of(std::vector<Image> bands) {
  RasterStack s;
  s.height = bands.front().rows();
  s.width = bands.front().cols();
  for (std::size_t t = 0; t < bands.size(); ++t) s.times.push_back(6.0 * static_cast<double>(t));
  s.bands = std::move(bands);
  return s;
}

// Per-pixel unbiased temporal variance, averaged over the grid.
double mean_temporal_variance(const RasterStack& s) {
  const Index m = s.band_count();
  double acc = 0.0;
  for (Index y = 0; y < s.height; ++y) {
    for (Index x = 0; x < s.width; ++x) {
      double mean = 0.0;
      for (Index t = 0; t < m; ++t) mean += s.bands[t](y, x);
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (Index t = 0; t < m; ++t) var += (s.bands[t](y, x) - mean) * (s.bands[t](y, x) - mean);
      acc += var / static_cast<double>(m - 1);
    }
  }
  return acc / static_cast<double>(s.width * s.height);
}

// Direct clipped boxcar, the oracle for multilook.
double boxcar(const Image& img, Index y, Index x, int w) {
  const Index lo = w / 2;
  const Index hi = w - 1 - lo;
  double sum = 0.0;
  int n = 0;
  for (Index yy = y - lo; yy <= y + hi; ++yy)
    for (Index xx = x - lo; xx <= x + hi; ++xx)
      if (yy >= 0 && xx >= 0 && yy < img.rows() && xx < img.cols()) {
        sum += img(yy, xx);
        ++n;
      }
  return sum / n;
}

}  // namespace

TEST_CASE("multilook of 1..9 with window 3 has centre 5") {
  Image img(3, 3);
  img << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const auto ml = multilook(stack_of({img}), 3);
  CHECK(ml.bands[0](1, 1) == 5.0);
  CHECK(ml.bands[0](0, 0) == doctest::Approx((1 + 2 + 4 + 5) / 4.0).epsilon(1e-15));
}

TEST_CASE("multilook: window 1, constant image, oracle agreement, bad window") {
  Rng rng(2);
  Image img(17, 23);
  for (Index i = 0; i < img.size(); ++i) img.data()[i] = uniform(rng, 0.0, 10.0);
  const auto s = stack_of({img});
  CHECK(multilook(s, 1).bands[0] == img);
  const auto c = multilook(stack_of({Image::Constant(9, 9, 0.37)}), 5);
  CHECK((c.bands[0].array() == 0.37).all());
  for (int w : {2, 4, 7}) {
    const auto ml = multilook(s, w);
    double worst = 0.0;
    for (Index y = 0; y < img.rows(); ++y)
      for (Index x = 0; x < img.cols(); ++x) worst = std::max(worst, std::abs(ml.bands[0](y, x) - boxcar(img, y, x, w)));
    CHECK(worst < 1e-12);
  }
  CHECK_THROWS_AS(multilook(s, 18), ParameterError);
  CHECK_THROWS_AS(multilook(s, 0), ParameterError);
}

TEST_CASE("quegan filter with a single image is the identity") {
  Rng rng(4);
  Image img(20, 20);
  for (Index i = 0; i < img.size(); ++i) img.data()[i] = uniform(rng, 0.01, 2.0);
  const auto out = quegan_filter(stack_of({img}), QueganOptions{7, 4.0, VarianceForm::kAsPrinted});
  CHECK(out.denoised.bands[0] == img);
  CHECK(out.valid.all());
}

TEST_CASE("quegan filter leaves spatially constant stacks unchanged") {
  std::vector<Image> bands;
  for (double c : {0.5, 0.11, 2.25, 0.031}) bands.push_back(Image::Constant(16, 16, c));
  const auto s = stack_of(bands);
  const auto out = quegan_filter(s, QueganOptions{14, 4.0, VarianceForm::kAsPrinted});
  for (std::size_t t = 0; t < bands.size(); ++t) CHECK(out.denoised.bands[t] == bands[t]);
}

TEST_CASE("quegan variance follows the printed form and the squared option") {
  Rng rng(8);
  std::vector<Image> bands;
  for (int t = 0; t < 5; ++t) {
    Image img(15, 15);
    for (Index i = 0; i < img.size(); ++i) img.data()[i] = uniform(rng, 0.05, 1.0);
    bands.push_back(img);
  }
  const auto s = stack_of(bands);
  const int w = 5;
  const double L = 3.0;
  const double M = 5.0;
  const double N = w * w;
  const auto printed = quegan_filter(s, QueganOptions{w, L, VarianceForm::kAsPrinted});
  const auto squared = quegan_filter(s, QueganOptions{w, L, VarianceForm::kSquared});
  CHECK(printed.window_pixels == 25);
  CHECK(printed.looks == L);
  const auto ml = multilook(printed.denoised, w);
  for (int t = 0; t < 5; ++t) {
    const Image expect = ml.bands[t] * ((M + N - 1.0) / (M * N * L));
    CHECK((printed.variance.bands[t] - expect).cwiseAbs().maxCoeff() < 1e-15);
    const Image expect_sq = ml.bands[t].cwiseProduct(ml.bands[t]) * ((M + N - 1.0) / (M * N * L));
    CHECK((squared.variance.bands[t] - expect_sq).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((printed.variance.bands[t].array() >= 0.0).all());
  }
  CHECK_THROWS_AS(quegan_filter(s, QueganOptions{w, 0.0, VarianceForm::kAsPrinted}), ParameterError);
}

TEST_CASE("pixels with a zero multilook mean are flagged, not NaN") {
  Image a = Image::Constant(6, 6, 1.0);
  Image b = Image::Constant(6, 6, 1.0);
  b.block(0, 0, 3, 3).setZero();
  const auto out = quegan_filter(stack_of({a, b}), QueganOptions{2, 4.0, VarianceForm::kAsPrinted});
  CHECK(!out.valid(0, 0));
  CHECK(out.valid(5, 5));
  for (const auto& band : out.denoised.bands) CHECK(band.allFinite());
  CHECK(out.denoised.bands[1](0, 0) == 0.0);
}

TEST_CASE("speckle: variance reduction below 0.3 and band means preserved within 2%") {
  const auto s = gen_speckle_stack(Image::Constant(128, 128, 1.0), 32, 4.0, 17);
  const auto out = quegan_filter(s, QueganOptions{7, 4.0, VarianceForm::kAsPrinted});
  const double ratio = mean_temporal_variance(out.denoised) / mean_temporal_variance(s);
  CHECK(ratio < 0.3);
  for (Index t = 0; t < s.band_count(); ++t) {
    const double before = s.bands[t].mean();
    const double after = out.denoised.bands[t].mean();
    CHECK(std::abs(after - before) / before < 0.02);
  }
}

TEST_CASE("dual-polarisation ratio in dB") {
  auto vv = stack_of({Image::Constant(2, 2, 1.0), Image::Constant(2, 2, 0.5)});
  auto vh = vv;
  CHECK((dualpol_ratio_db(vh, vv).ratio_db.bands[1].array() == 0.0).all());
  vh.bands[0] *= 0.1;
  CHECK(dualpol_ratio_db(vh, vv).ratio_db.bands[0](1, 1) == doctest::Approx(-10.0).epsilon(1e-14));
  // 10 log10(0.149) = -8.2681; -8.28 dB itself is 10^-0.828 = 0.14859
  vh.bands[0].setConstant(1.49e-1);
  CHECK(std::abs(dualpol_ratio_db(vh, vv).ratio_db.bands[0](0, 0) - (-8.2681)) < 1e-4);
  vh.bands[0].setConstant(std::pow(10.0, -0.828));
  CHECK(std::abs(dualpol_ratio_db(vh, vv).ratio_db.bands[0](0, 0) - (-8.28)) < 1e-9);

  vv.bands[1](0, 1) = 0.0;
  const auto r = dualpol_ratio_db(vh, vv);
  CHECK(!r.valid[1](0, 1));
  CHECK(r.valid[1](0, 0));
  CHECK(std::isfinite(r.ratio_db.bands[1](0, 1)));

  auto shifted = vh;
  shifted.times[1] = 99.0;
  CHECK_THROWS_AS(dualpol_ratio_db(shifted, vv), AlignmentError);
  auto small = stack_of({Image::Constant(2, 3, 1.0), Image::Constant(2, 3, 1.0)});
  CHECK_THROWS_AS(dualpol_ratio_db(small, vv), AlignmentError);
}

TEST_CASE("property: ratio of an inverse-dB construction recovers the dB values") {
  Rng rng(12);
  Image db(8, 8), vv(8, 8), vh(8, 8);
  for (Index i = 0; i < db.size(); ++i) {
    db.data()[i] = uniform(rng, -25.0, 5.0);
    vv.data()[i] = uniform(rng, 0.01, 3.0);
    vh.data()[i] = vv.data()[i] * std::pow(10.0, db.data()[i] / 10.0);
  }
  const auto r = dualpol_ratio_db(stack_of({vh}), stack_of({vv}));
  CHECK((r.ratio_db.bands[0] - db).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("extract_series indexes pixels directly") {
  Image a(1, 1), b(1, 1), c(1, 1);
  a << 0.1;
  b << 0.2;
  c << 0.3;
  const auto [t, v] = extract_series(stack_of({a, b, c}), 0, 0);
  CHECK(v.size() == 3);
  CHECK(v[0] == 0.1);
  CHECK(v[2] == 0.3);
  CHECK(t[1] == 6.0);

  const auto s = gen_speckle_stack(Image::Constant(9, 11, 1.0), 4, 4.0, 3);
  const auto [t2, v2] = extract_series(s, 5, 4);
  for (Index k = 0; k < 4; ++k) CHECK(v2[k] == s.bands[k](4, 5));
  CHECK_THROWS(extract_series(s, 11, 0));
  CHECK_THROWS(extract_series(s, 0, -1));
}

TEST_CASE("raster stacks round trip through f32 and reject size mismatch") {
  const fs::path dir = fs::temp_directory_path() / "laimpute_test_sar";
  fs::create_directories(dir);
  const auto s = gen_speckle_stack(Image::Constant(7, 5, 0.25), 3, 4.0, 21);
  write_stack(s, dir / "s.hdr");
  const auto back = read_stack(dir / "s.hdr");
  CHECK(back.width == 5);
  CHECK(back.height == 7);
  CHECK(back.times == s.times);
  for (Index t = 0; t < 3; ++t) {
    const Image expect = s.bands[t].cast<float>().cast<double>();
    CHECK(back.bands[t] == expect);
  }
  // f32-representable data survive a second trip unchanged
  write_stack(back, dir / "s2.hdr");
  const auto again = read_stack(dir / "s2.hdr");
  for (Index t = 0; t < 3; ++t) CHECK(again.bands[t] == back.bands[t]);

  fs::resize_file(payload_path(dir / "s.hdr"), 7 * 5 * 3 * 4 - 4);
  CHECK_THROWS_AS(read_stack(dir / "s.hdr"), FormatError);
  fs::remove_all(dir);
}
