#ifndef LAIMPUTE_SERIES_HPP
#define LAIMPUTE_SERIES_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "laimpute/common.hpp"

namespace laimpute {

/// One geolocated series with a sparse target channel (LAI) and a dense
/// companion channel (VH/VV in dB). Masked-out entries hold 0.0; every
/// computation consults the masks, never the stored value.
struct TimeSeriesRecord {
  std::string series_id;
  Vector times;  // days since season start, strictly increasing
  Vector lai;
  Mask lai_mask;
  Vector vhvv;
  Mask vhvv_mask;

  Index size() const { return times.size(); }
};

/// Throws InvalidRecordError describing the first violated invariant.
void validate(const TimeSeriesRecord& record);

/// Builds a record from values and masks, writing 0.0 into masked slots.
TimeSeriesRecord make_record(std::string id, Vector times, Vector lai, Mask lai_mask, Vector vhvv,
                             Mask vhvv_mask);

/// Contiguous slice [begin, begin + length).
TimeSeriesRecord slice(const TimeSeriesRecord& record, Index begin, Index length);

bool operator==(const TimeSeriesRecord& a, const TimeSeriesRecord& b);

struct ChannelStats {
  double mean = 0.0;
  double std = 1.0;
};

struct NormStats {
  ChannelStats lai;
  ChannelStats vhvv;
};

/// Pooled mean/std (population convention) over observed entries of every
/// record. Throws EmptyChannelError if a channel has no observation.
NormStats compute_stats(const std::vector<TimeSeriesRecord>& records);

/// (v - mean) / std on observed entries; masked entries stay 0.0.
TimeSeriesRecord normalize(const TimeSeriesRecord& record, const NormStats& stats);
TimeSeriesRecord denormalize(const TimeSeriesRecord& record, const NormStats& stats);

/// Normalized Gaussian kernel of odd width, sigma = window / 5.
Vector gaussian_kernel(int window);

/// Mask-aware Gaussian smoothing. Observed entries become the renormalized
/// weighted mean of the observed entries inside the window; masked entries
/// are returned unchanged.
Vector gaussian_smooth(const Eigen::Ref<const Vector>& values, const Mask& mask, int window);

/// Piecewise-linear interpolation through the observed source points,
/// clamped to the nearest observed value outside their hull.
Vector interpolate_to_times(const Eigen::Ref<const Vector>& src_times,
                            const Eigen::Ref<const Vector>& src_values, const Mask& src_mask,
                            const Eigen::Ref<const Vector>& query_times);

// CSV: series_id,t_index,acq_time_days,lai,vhvv_db ; empty field = missing.
std::vector<TimeSeriesRecord> read_csv(std::istream& in, const std::string& source = "<stream>");
std::vector<TimeSeriesRecord> read_csv(const std::filesystem::path& path);
void write_csv(const std::vector<TimeSeriesRecord>& records, std::ostream& out);
void write_csv(const std::vector<TimeSeriesRecord>& records, const std::filesystem::path& path);

}  // namespace laimpute

#endif  // LAIMPUTE_SERIES_HPP
