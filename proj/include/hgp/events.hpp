#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "hgp/image.hpp"

namespace hgp {

struct EventPoint {
  std::int64_t t = 0;  // microseconds
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int8_t p = 1;  // +1 or -1

  bool operator==(const EventPoint&) const = default;
};

struct SensorSize {
  std::size_t w = 0;
  std::size_t h = 0;
};

/// Time-sorted events from one sensor.
struct EventStream {
  std::size_t sensor_w = 0;
  std::size_t sensor_h = 0;
  std::vector<EventPoint> events;

  /// Throws ValidationError on an out-of-range coordinate, a bad polarity, a
  /// negative timestamp or an unsorted sequence.
  void validate() const;
  bool operator==(const EventStream&) const = default;
};

/// Reads `t,x,y,p` lines. An optional `# w=<W> h=<H>` line fixes the sensor
/// size, otherwise `sensor` is used, otherwise it is inferred from the largest
/// coordinates. A literal `t,x,y,p` header and blank lines are skipped.
/// Out-of-order events are stably sorted by time.
EventStream parse_event_csv(std::istream& is, std::optional<SensorSize> sensor = std::nullopt);
EventStream parse_event_csv(const std::filesystem::path& path,
                            std::optional<SensorSize> sensor = std::nullopt);
void write_event_csv(std::ostream& os, const EventStream& stream);
void write_event_csv(const std::filesystem::path& path, const EventStream& stream);

inline constexpr double kLogEpsilon = 1e-3;

/// Threshold-crossing event simulation on log(I + kLogEpsilon).
///
/// Each pixel keeps a reference level that starts at its first-frame value.
/// Between consecutive frames the log intensity is interpolated linearly; every
/// time it moves a full `threshold` away from the reference an event of that
/// sign is emitted at the interpolated crossing time and the reference steps
/// by one threshold.
EventStream simulate_events(const std::vector<ImagePlane>& frames,
                            const std::vector<std::int64_t>& timestamps, double threshold = 0.2);

/// Linear-interpolation percentile (q in [0, 100]) of `values`.
double percentile(std::vector<double> values, double q);

/// Polarity accumulation over the inclusive window [t0, t1].
///
/// Each pixel becomes clamp(0.5 + g * s, 0, 1) with s the signed event count
/// and g = 0.5 / max(1, p95(|s|)) taken over the whole frame.
ImagePlane synthesize_frame(const EventStream& stream, std::int64_t t0, std::int64_t t1);

}  // namespace hgp
