#include "laimpute/series.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace laimpute {

void validate(const TimeSeriesRecord& r) {
  const Index n = r.times.size();
  if (n < 1) throw InvalidRecordError("record '" + r.series_id + "' is empty");
  if (r.lai.size() != n || r.lai_mask.size() != n || r.vhvv.size() != n || r.vhvv_mask.size() != n)
    throw InvalidRecordError("record '" + r.series_id + "' has channels of unequal length");
  for (Index t = 0; t < n; ++t) {
    if (!std::isfinite(r.times[t])) throw InvalidRecordError("record '" + r.series_id + "' has a non-finite time");
    if (t > 0 && !(r.times[t] > r.times[t - 1]))
      throw InvalidRecordError("record '" + r.series_id + "' times not strictly increasing at index " +
                               std::to_string(t));
    if (!r.lai_mask[t] && !r.vhvv_mask[t])
      throw InvalidRecordError("record '" + r.series_id + "' has no observation at index " + std::to_string(t));
    if (!r.lai_mask[t] && r.lai[t] != 0.0)
      throw InvalidRecordError("record '" + r.series_id + "' masked LAI entry is not 0.0");
    if (!r.vhvv_mask[t] && r.vhvv[t] != 0.0)
      throw InvalidRecordError("record '" + r.series_id + "' masked VH/VV entry is not 0.0");
    if ((r.lai_mask[t] && !std::isfinite(r.lai[t])) || (r.vhvv_mask[t] && !std::isfinite(r.vhvv[t])))
      throw InvalidRecordError("record '" + r.series_id + "' has a non-finite observation");
  }
}

TimeSeriesRecord make_record(std::string id, Vector times, Vector lai, Mask lai_mask, Vector vhvv,
                             Mask vhvv_mask) {
  TimeSeriesRecord r{std::move(id), std::move(times), std::move(lai), std::move(lai_mask), std::move(vhvv),
                     std::move(vhvv_mask)};
  if (r.lai.size() == r.lai_mask.size()) r.lai = r.lai_mask.select(r.lai, 0.0);
  if (r.vhvv.size() == r.vhvv_mask.size()) r.vhvv = r.vhvv_mask.select(r.vhvv, 0.0);
  validate(r);
  return r;
}

TimeSeriesRecord slice(const TimeSeriesRecord& r, Index begin, Index length) {
  if (begin < 0 || length < 1 || begin + length > r.size())
    throw ParameterError("slice [" + std::to_string(begin) + ", +" + std::to_string(length) + ") out of range");
  return TimeSeriesRecord{r.series_id,
                          r.times.segment(begin, length),
                          r.lai.segment(begin, length),
                          r.lai_mask.segment(begin, length),
                          r.vhvv.segment(begin, length),
                          r.vhvv_mask.segment(begin, length)};
}

bool operator==(const TimeSeriesRecord& a, const TimeSeriesRecord& b) {
  return a.series_id == b.series_id && a.size() == b.size() && a.times == b.times && a.lai == b.lai &&
         (a.lai_mask == b.lai_mask).all() && a.vhvv == b.vhvv && (a.vhvv_mask == b.vhvv_mask).all();
}

namespace {

ChannelStats pooled_stats(const std::vector<TimeSeriesRecord>& records, bool lai_channel, const char* name) {
  // Two passes keep the variance accurate for large offsets (VH/VV sits near -10 dB).
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : records) {
    const Vector& v = lai_channel ? r.lai : r.vhvv;
    const Mask& m = lai_channel ? r.lai_mask : r.vhvv_mask;
    for (Index t = 0; t < v.size(); ++t) {
      if (m[t]) {
        sum += v[t];
        ++count;
      }
    }
  }
  if (count == 0) throw EmptyChannelError(std::string("channel ") + name + " has no observed entries");
  const double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (const auto& r : records) {
    const Vector& v = lai_channel ? r.lai : r.vhvv;
    const Mask& m = lai_channel ? r.lai_mask : r.vhvv_mask;
    for (Index t = 0; t < v.size(); ++t) {
      if (m[t]) ss += (v[t] - mean) * (v[t] - mean);
    }
  }
  return {mean, std::sqrt(ss / static_cast<double>(count))};
}

void check_channel(const ChannelStats& s, const char* name) {
  if (!(s.std > 0.0) || !std::isfinite(s.std) || !std::isfinite(s.mean))
    throw DegenerateChannelError(std::string("channel ") + name + " has non-positive standard deviation");
}

}  // namespace

NormStats compute_stats(const std::vector<TimeSeriesRecord>& records) {
  return {pooled_stats(records, true, "lai"), pooled_stats(records, false, "vhvv")};
}

TimeSeriesRecord normalize(const TimeSeriesRecord& record, const NormStats& stats) {
  check_channel(stats.lai, "lai");
  check_channel(stats.vhvv, "vhvv");
  TimeSeriesRecord out = record;
  out.lai = record.lai_mask.select((record.lai.array() - stats.lai.mean) / stats.lai.std, 0.0);
  out.vhvv = record.vhvv_mask.select((record.vhvv.array() - stats.vhvv.mean) / stats.vhvv.std, 0.0);
  return out;
}

TimeSeriesRecord denormalize(const TimeSeriesRecord& record, const NormStats& stats) {
  check_channel(stats.lai, "lai");
  check_channel(stats.vhvv, "vhvv");
  TimeSeriesRecord out = record;
  out.lai = record.lai_mask.select(record.lai.array() * stats.lai.std + stats.lai.mean, 0.0);
  out.vhvv = record.vhvv_mask.select(record.vhvv.array() * stats.vhvv.std + stats.vhvv.mean, 0.0);
  return out;
}

Vector gaussian_kernel(int window) {
  if (window < 1 || window % 2 == 0) throw ParameterError("gaussian window must be odd and >= 1");
  const int half = window / 2;
  const double sigma = window / 5.0;
  Vector k(window);
  for (int i = -half; i <= half; ++i) k[i + half] = std::exp(-0.5 * (i / sigma) * (i / sigma));
  return k / k.sum();
}

Vector gaussian_smooth(const Eigen::Ref<const Vector>& values, const Mask& mask, int window) {
  if (values.size() != mask.size()) throw DimensionError("gaussian_smooth: values/mask length mismatch");
  const Vector kernel = gaussian_kernel(window);
  const Index half = window / 2;
  const Index n = values.size();
  Vector out = values;
  for (Index t = 0; t < n; ++t) {
    if (!mask[t]) continue;
    double num = 0.0;
    double den = 0.0;
    bool constant = true;
    for (Index k = -half; k <= half; ++k) {
      const Index s = t + k;
      if (s < 0 || s >= n || !mask[s]) continue;
      num += kernel[k + half] * values[s];
      den += kernel[k + half];
      constant = constant && values[s] == values[t];
    }
    // A window of equal observations returns that value bit-exactly.
    out[t] = constant ? values[t] : num / den;
  }
  return out;
}

Vector interpolate_to_times(const Eigen::Ref<const Vector>& src_times, const Eigen::Ref<const Vector>& src_values,
                            const Mask& src_mask, const Eigen::Ref<const Vector>& query_times) {
  if (src_times.size() != src_values.size() || src_times.size() != src_mask.size())
    throw DimensionError("interpolate_to_times: source length mismatch");
  std::vector<Index> obs;
  for (Index i = 0; i < src_mask.size(); ++i)
    if (src_mask[i]) obs.push_back(i);
  if (obs.size() < 2) throw InsufficientDataError("interpolate_to_times: fewer than two observed source values");

  Vector out(query_times.size());
  for (Index q = 0; q < query_times.size(); ++q) {
    const double t = query_times[q];
    if (t <= src_times[obs.front()]) {
      out[q] = src_values[obs.front()];
      continue;
    }
    if (t >= src_times[obs.back()]) {
      out[q] = src_values[obs.back()];
      continue;
    }
    // First observed index with time >= t.
    const auto it = std::lower_bound(obs.begin(), obs.end(), t,
                                     [&](Index i, double value) { return src_times[i] < value; });
    const Index hi = *it;
    if (src_times[hi] == t) {
      out[q] = src_values[hi];
      continue;
    }
    const Index lo = *(it - 1);
    const double w = (t - src_times[lo]) / (src_times[hi] - src_times[lo]);
    out[q] = src_values[lo] + w * (src_values[hi] - src_values[lo]);
  }
  return out;
}

namespace {

constexpr const char* kCsvHeader = "series_id,t_index,acq_time_days,lai,vhvv_db";

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

struct PendingRecord {
  std::string id;
  std::vector<double> times, lai, vhvv;
  std::vector<bool> lai_mask, vhvv_mask;
  long long last_index = -1;

  TimeSeriesRecord finish() const {
    const auto n = static_cast<Index>(times.size());
    TimeSeriesRecord r;
    r.series_id = id;
    r.times = Eigen::Map<const Vector>(times.data(), n);
    r.lai = Eigen::Map<const Vector>(lai.data(), n);
    r.vhvv = Eigen::Map<const Vector>(vhvv.data(), n);
    r.lai_mask.resize(n);
    r.vhvv_mask.resize(n);
    for (Index i = 0; i < n; ++i) {
      r.lai_mask[i] = lai_mask[i];
      r.vhvv_mask[i] = vhvv_mask[i];
    }
    return r;
  }
};

}  // namespace

std::vector<TimeSeriesRecord> read_csv(std::istream& in, const std::string& source) {
  std::vector<TimeSeriesRecord> records;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw ParseError(source, line_no, std::string("expected header '") + kCsvHeader + "'");

  PendingRecord cur;
  auto flush = [&] {
    if (!cur.id.empty() || !cur.times.empty()) {
      records.push_back(cur.finish());
      seen.insert(cur.id);
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line);
    // Trailing empty fields beyond the fifth column are tolerated.
    while (fields.size() > 5 && fields.back().empty()) fields.pop_back();
    if (fields.size() != 5) throw ParseError(source, line_no, "expected 5 fields, got " + std::to_string(fields.size()));

    const std::string& id = fields[0];
    if (id.empty()) throw ParseError(source, line_no, "empty series_id");
    if (id != cur.id || cur.times.empty()) {
      if (!cur.times.empty() && id != cur.id) {
        flush();
        cur = PendingRecord{};
      }
      if (seen.contains(id)) throw ParseError(source, line_no, "rows of series '" + id + "' are not contiguous");
      cur.id = id;
    }

    double t_index = 0.0;
    if (!parse_double(fields[1], t_index) || t_index != std::floor(t_index) || t_index < 0)
      throw ParseError(source, line_no, "malformed t_index '" + fields[1] + "'");
    if (static_cast<long long>(t_index) <= cur.last_index)
      throw ParseError(source, line_no, "t_index not increasing within series '" + id + "'");
    cur.last_index = static_cast<long long>(t_index);

    double time = 0.0;
    if (!parse_double(fields[2], time) || !std::isfinite(time))
      throw ParseError(source, line_no, "malformed acq_time_days '" + fields[2] + "'");
    if (!cur.times.empty() && !(time > cur.times.back()))
      throw ParseError(source, line_no, "acquisition times not strictly increasing");

    auto parse_optional = [&](const std::string& field, const char* name, double& value) {
      std::string_view view(field);
      while (!view.empty() && view.front() == ' ') view.remove_prefix(1);
      while (!view.empty() && view.back() == ' ') view.remove_suffix(1);
      if (view.empty()) {
        value = 0.0;
        return false;
      }
      if (!parse_double(view, value) || !std::isfinite(value))
        throw ParseError(source, line_no, std::string("malformed ") + name + " '" + field + "'");
      return true;
    };
    double lai = 0.0;
    double vhvv = 0.0;
    const bool has_lai = parse_optional(fields[3], "lai", lai);
    const bool has_vhvv = parse_optional(fields[4], "vhvv_db", vhvv);
    if (!has_lai && !has_vhvv) throw ParseError(source, line_no, "row has neither lai nor vhvv_db");

    cur.times.push_back(time);
    cur.lai.push_back(lai);
    cur.lai_mask.push_back(has_lai);
    cur.vhvv.push_back(vhvv);
    cur.vhvv_mask.push_back(has_vhvv);
  }
  flush();
  return records;
}

std::vector<TimeSeriesRecord> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_csv(in, path.string());
}

void write_csv(const std::vector<TimeSeriesRecord>& records, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    validate(r);
    if (r.series_id.find(',') != std::string::npos)
      throw FormatError("series_id '" + r.series_id + "' contains a comma");
    for (Index t = 0; t < r.size(); ++t) {
      out << r.series_id << ',' << t << ',' << format_double(r.times[t]) << ',';
      if (r.lai_mask[t]) out << format_double(r.lai[t]);
      out << ',';
      if (r.vhvv_mask[t]) out << format_double(r.vhvv[t]);
      out << '\n';
    }
  }
}

void write_csv(const std::vector<TimeSeriesRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_csv(records, out);
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace laimpute
