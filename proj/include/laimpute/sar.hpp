#ifndef LAIMPUTE_SAR_HPP
#define LAIMPUTE_SAR_HPP

#include <filesystem>
#include <utility>
#include <vector>

#include "laimpute/common.hpp"

namespace laimpute {

using Image = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ImageMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// M co-registered single-channel images on a common grid. Image rows are
/// the y axis, columns the x axis. Intensities are linear power unless a
/// stack is explicitly a dB product (dualpol_ratio_db output).
struct RasterStack {
  Index width = 0;
  Index height = 0;
  std::vector<double> times;
  std::vector<Image> bands;

  Index band_count() const { return static_cast<Index>(bands.size()); }
};

/// Checks M >= 1, consistent shapes and one timestamp per band.
void validate(const RasterStack& stack);

/// Boxcar mean over a window x window neighborhood, clipped at the borders.
/// For even windows the neighborhood spans [-w/2, w/2 - 1] around the pixel.
RasterStack multilook(const RasterStack& stack, int window);

enum class VarianceForm {
  kAsPrinted,  // denoised_ml * (M + N - 1) / (M N L)
  kSquared,    // denoised_ml^2 * (M + N - 1) / (M N L)
};

struct QueganOptions {
  int window = 14;
  double looks = 4.0;
  VarianceForm variance_form = VarianceForm::kAsPrinted;
};

struct FilterOutput {
  RasterStack denoised;
  RasterStack variance;
  ImageMask valid;  // false where any multilook mean along time is zero
  double looks = 0.0;
  Index window_pixels = 0;
};

/// Multitemporal ratio filter:
///   J_t(s) = mu_t(s) / M * sum_t' I_t'(s) / mu_t'(s),   mu = multilook(I)
/// with the variance estimate (M + N - 1) / (M N L) times the multilooked
/// denoised value (or its square).
FilterOutput quegan_filter(const RasterStack& stack, const QueganOptions& options = {});

struct RatioOutput {
  RasterStack ratio_db;
  std::vector<ImageMask> valid;  // per band; false where vh or vv is not positive
};

/// 10 log10(vh / vv) per pixel and band.
RatioOutput dualpol_ratio_db(const RasterStack& vh, const RasterStack& vv);

/// Time series of pixel (x, y) paired with the stack timestamps.
std::pair<Vector, Vector> extract_series(const RasterStack& stack, Index x, Index y);

// On-disk format: `<stem>.hdr` text header (width=, height=, bands=, times=,
// dtype=f32le) and `<stem>.bin` band-sequential row-major little-endian f32.
void write_stack(const RasterStack& stack, const std::filesystem::path& header_path);
RasterStack read_stack(const std::filesystem::path& header_path);
std::filesystem::path payload_path(const std::filesystem::path& header_path);

}  // namespace laimpute

#endif  // LAIMPUTE_SAR_HPP
