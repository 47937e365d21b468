#include "laimpute/sar.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "laimpute/kv_config.hpp"

namespace laimpute {

void validate(const RasterStack& stack) {
  if (stack.width < 1 || stack.height < 1) throw DimensionError("raster stack has non-positive dimensions");
  if (stack.bands.empty()) throw DimensionError("raster stack has no bands");
  if (stack.times.size() != stack.bands.size()) throw DimensionError("raster stack needs one timestamp per band");
  for (const auto& band : stack.bands) {
    if (band.rows() != stack.height || band.cols() != stack.width)
      throw DimensionError("raster stack band shape differs from declared width/height");
  }
}

namespace {

// Summed-area table of (image - reference), one row/column of zero padding.
// Subtracting a reference keeps constant images exact and sums well scaled.
Image integral_image(const Image& image, double reference) {
  Image sat = Image::Zero(image.rows() + 1, image.cols() + 1);
  for (Index y = 0; y < image.rows(); ++y) {
    double row = 0.0;
    for (Index x = 0; x < image.cols(); ++x) {
      row += image(y, x) - reference;
      sat(y + 1, x + 1) = sat(y, x + 1) + row;
    }
  }
  return sat;
}

Image boxcar_mean(const Image& image, int window) {
  const double reference = image(0, 0);
  const Image sat = integral_image(image, reference);
  const Index lo_off = window / 2;
  Image out(image.rows(), image.cols());
  for (Index y = 0; y < image.rows(); ++y) {
    const Index y0 = std::max<Index>(0, y - lo_off);
    const Index y1 = std::min<Index>(image.rows(), y - lo_off + window);
    for (Index x = 0; x < image.cols(); ++x) {
      const Index x0 = std::max<Index>(0, x - lo_off);
      const Index x1 = std::min<Index>(image.cols(), x - lo_off + window);
      const double sum = sat(y1, x1) - sat(y0, x1) - sat(y1, x0) + sat(y0, x0);
      out(y, x) = reference + sum / static_cast<double>((y1 - y0) * (x1 - x0));
    }
  }
  return out;
}

}  // namespace

RasterStack multilook(const RasterStack& stack, int window) {
  validate(stack);
  if (window < 1) throw ParameterError("multilook window must be positive");
  if (window > std::min(stack.width, stack.height))
    throw ParameterError("multilook window " + std::to_string(window) + " exceeds image size");
  RasterStack out{stack.width, stack.height, stack.times, {}};
  out.bands.reserve(stack.bands.size());
  if (window == 1) {
    out.bands = stack.bands;
    return out;
  }
  for (const auto& band : stack.bands) out.bands.push_back(boxcar_mean(band, window));
  return out;
}

FilterOutput quegan_filter(const RasterStack& stack, const QueganOptions& options) {
  validate(stack);
  if (!(options.looks > 0.0) || !std::isfinite(options.looks)) throw ParameterError("looks must be positive");
  for (const auto& band : stack.bands) {
    if ((band.array() < 0.0).any() || !band.allFinite())
      throw ParameterError("quegan_filter expects finite non-negative linear intensities");
  }
  const RasterStack mean = multilook(stack, options.window);
  const Index m = stack.band_count();

  FilterOutput out;
  out.looks = options.looks;
  out.window_pixels = static_cast<Index>(options.window) * options.window;
  out.valid = ImageMask::Constant(stack.height, stack.width, true);
  out.denoised = RasterStack{stack.width, stack.height, stack.times, {}};
  out.denoised.bands.assign(m, Image::Zero(stack.height, stack.width));

  std::vector<double> ratio(static_cast<std::size_t>(m));
  for (Index y = 0; y < stack.height; ++y) {
    for (Index x = 0; x < stack.width; ++x) {
      bool ok = true;
      double ratio_sum = 0.0;
      for (Index t = 0; t < m; ++t) {
        const double mu = mean.bands[t](y, x);
        if (!(mu > 0.0)) {
          ok = false;
          break;
        }
        ratio[t] = stack.bands[t](y, x) / mu;
        ratio_sum += ratio[t];
      }
      if (!ok) {
        out.valid(y, x) = false;
        for (Index t = 0; t < m; ++t) out.denoised.bands[t](y, x) = stack.bands[t](y, x);
        continue;
      }
      const double mean_ratio = ratio_sum / static_cast<double>(m);
      // Written as I_t + mu_t (mean_ratio - I_t / mu_t), algebraically equal to
      // mu_t * mean_ratio, so that M = 1 and constant stacks are reproduced exactly.
      for (Index t = 0; t < m; ++t) {
        const double v = stack.bands[t](y, x) + mean.bands[t](y, x) * (mean_ratio - ratio[t]);
        out.denoised.bands[t](y, x) = std::max(v, 0.0);
      }
    }
  }

  const RasterStack denoised_ml = multilook(out.denoised, options.window);
  const double n = static_cast<double>(out.window_pixels);
  const double md = static_cast<double>(m);
  const double factor = (md + n - 1.0) / (md * n * options.looks);
  out.variance = RasterStack{stack.width, stack.height, stack.times, {}};
  out.variance.bands.reserve(m);
  for (Index t = 0; t < m; ++t) {
    Image v = options.variance_form == VarianceForm::kSquared
                  ? Image(denoised_ml.bands[t].array().square() * factor)
                  : Image(denoised_ml.bands[t].array() * factor);
    v = out.valid.select(v, 0.0);
    out.variance.bands.push_back(std::move(v));
  }
  return out;
}

RatioOutput dualpol_ratio_db(const RasterStack& vh, const RasterStack& vv) {
  validate(vh);
  validate(vv);
  if (vh.width != vv.width || vh.height != vv.height || vh.band_count() != vv.band_count())
    throw AlignmentError("VH and VV stacks differ in shape");
  if (vh.times != vv.times) throw AlignmentError("VH and VV stacks differ in timestamps");
  RatioOutput out;
  out.ratio_db = RasterStack{vh.width, vh.height, vh.times, {}};
  for (Index t = 0; t < vh.band_count(); ++t) {
    const auto& a = vh.bands[t].array();
    const auto& b = vv.bands[t].array();
    ImageMask ok = (a > 0.0) && (b > 0.0) && a.isFinite() && b.isFinite();
    Image ratio = ok.select(10.0 * (a / b).log10(), 0.0);
    out.ratio_db.bands.push_back(std::move(ratio));
    out.valid.push_back(std::move(ok));
  }
  return out;
}

std::pair<Vector, Vector> extract_series(const RasterStack& stack, Index x, Index y) {
  validate(stack);
  if (x < 0 || y < 0 || x >= stack.width || y >= stack.height)
    throw ParameterError("pixel (" + std::to_string(x) + ", " + std::to_string(y) + ") outside the stack");
  const Index m = stack.band_count();
  Vector times(m);
  Vector values(m);
  for (Index t = 0; t < m; ++t) {
    times[t] = stack.times[t];
    values[t] = stack.bands[t](y, x);
  }
  return {times, values};
}

std::filesystem::path payload_path(const std::filesystem::path& header_path) {
  auto p = header_path;
  p.replace_extension(".bin");
  return p;
}

namespace {

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

}  // namespace

void write_stack(const RasterStack& stack, const std::filesystem::path& header_path) {
  validate(stack);
  if (header_path.extension() == ".bin") throw FormatError("header path must not use the .bin extension");
  std::string times;
  for (std::size_t i = 0; i < stack.times.size(); ++i) {
    if (i) times += ',';
    times += format_double(stack.times[i]);
  }
  std::ofstream hdr(header_path);
  if (!hdr) throw FormatError("cannot write " + header_path.string());
  hdr << format_key_values({{"width", std::to_string(stack.width)},
                            {"height", std::to_string(stack.height)},
                            {"bands", std::to_string(stack.band_count())},
                            {"times", times},
                            {"dtype", "f32le"}});

  std::ofstream bin(payload_path(header_path), std::ios::binary);
  if (!bin) throw FormatError("cannot write " + payload_path(header_path).string());
  std::vector<std::uint32_t> row(static_cast<std::size_t>(stack.width));
  for (const auto& band : stack.bands) {
    for (Index y = 0; y < stack.height; ++y) {
      for (Index x = 0; x < stack.width; ++x)
        row[x] = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(band(y, x))));
      bin.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    }
  }
  if (!bin) throw FormatError("write failed for " + payload_path(header_path).string());
}

RasterStack read_stack(const std::filesystem::path& header_path) {
  const auto header = KeyValueConfig::from_file(header_path);
  const std::string dtype = header.get_string("dtype", "");
  if (dtype != "f32le") throw FormatError(header_path.string() + ": unsupported dtype '" + dtype + "'");
  RasterStack stack;
  stack.width = header.get_int("width", 0);
  stack.height = header.get_int("height", 0);
  const auto bands = header.get_int("bands", 0);
  if (stack.width < 1 || stack.height < 1 || bands < 1)
    throw FormatError(header_path.string() + ": width, height and bands must be positive");
  const std::string times = header.get_string("times", "");
  std::stringstream ts(times);
  std::string item;
  while (std::getline(ts, item, ',')) {
    double t = 0.0;
    if (!parse_double(item, t)) throw FormatError(header_path.string() + ": malformed time '" + item + "'");
    stack.times.push_back(t);
  }
  if (static_cast<std::int64_t>(stack.times.size()) != bands)
    throw FormatError(header_path.string() + ": times list length differs from bands");
  header.reject_unused();

  const auto bin_path = payload_path(header_path);
  std::error_code ec;
  const auto actual = std::filesystem::file_size(bin_path, ec);
  if (ec) throw FormatError("cannot stat payload " + bin_path.string());
  const auto expected = static_cast<std::uintmax_t>(stack.width) * stack.height * bands * 4u;
  if (actual != expected)
    throw FormatError(bin_path.string() + ": payload has " + std::to_string(actual) + " bytes, header implies " +
                      std::to_string(expected));

  std::ifstream bin(bin_path, std::ios::binary);
  std::vector<std::uint32_t> row(static_cast<std::size_t>(stack.width));
  for (std::int64_t b = 0; b < bands; ++b) {
    Image band(stack.height, stack.width);
    for (Index y = 0; y < stack.height; ++y) {
      bin.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
      for (Index x = 0; x < stack.width; ++x) band(y, x) = std::bit_cast<float>(to_little_endian(row[x]));
    }
    stack.bands.push_back(std::move(band));
  }
  if (!bin) throw FormatError("read failed for " + bin_path.string());
  return stack;
}

}  // namespace laimpute
