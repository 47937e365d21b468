#ifndef LAIMPUTE_CHECKPOINT_HPP
#define LAIMPUTE_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "laimpute/net.hpp"
#include "laimpute/series.hpp"

namespace laimpute {

/// Identifies how per-step input features are assembled from a record.
enum class FeatureLayout : std::uint32_t {
  // normalized VH/VV, VH/VV mask bit, normalized LAI, LAI mask bit
  kVhvvLaiWithMasks = 1,
};

inline constexpr Index feature_count(FeatureLayout layout) {
  return layout == FeatureLayout::kVhvvLaiWithMasks ? 4 : 0;
}

struct Checkpoint {
  NetworkParamsd params;
  NormStats stats;
  FeatureLayout layout = FeatureLayout::kVhvvLaiWithMasks;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Byte layout is described in docs/checkpoint_format.md.
void save_checkpoint(const Checkpoint& checkpoint, std::ostream& out);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace laimpute

#endif  // LAIMPUTE_CHECKPOINT_HPP
