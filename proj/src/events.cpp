#include "hgp/events.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "hgp/error.hpp"

namespace hgp {

void EventStream::validate() const {
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.x < 0 || e.y < 0 || static_cast<std::size_t>(e.x) >= sensor_w ||
        static_cast<std::size_t>(e.y) >= sensor_h) {
      throw ValidationError("event " + std::to_string(i) + " at (" + std::to_string(e.x) + "," +
                            std::to_string(e.y) + ") outside " + std::to_string(sensor_w) + "x" +
                            std::to_string(sensor_h) + " sensor");
    }
    if (e.p != 1 && e.p != -1) {
      throw ValidationError("event " + std::to_string(i) + " has polarity " + std::to_string(e.p));
    }
    if (e.t < 0) throw ValidationError("event " + std::to_string(i) + " has a negative timestamp");
    if (i > 0 && events[i - 1].t > e.t) {
      throw ValidationError("events are not sorted by time at index " + std::to_string(i));
    }
  }
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_int(std::string_view s, T& out) {
  s = trim(s);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

// Parses "# w=<W> h=<H>"; returns false for any other comment.
bool parse_size_header(std::string_view line, SensorSize& out) {
  std::istringstream is{std::string(line.substr(1))};
  std::string a, b;
  if (!(is >> a >> b)) return false;
  if (a.rfind("w=", 0) != 0 || b.rfind("h=", 0) != 0) return false;
  return parse_int(std::string_view(a).substr(2), out.w) &&
         parse_int(std::string_view(b).substr(2), out.h);
}

}  // namespace

EventStream parse_event_csv(std::istream& is, std::optional<SensorSize> sensor) {
  EventStream stream;
  std::string line;
  std::size_t lineno = 0;
  std::optional<SensorSize> header;
  std::int64_t max_x = -1, max_y = -1;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string_view s = trim(line);
    if (s.empty()) continue;
    if (s.front() == '#') {
      SensorSize sz;
      if (parse_size_header(s, sz)) header = sz;
      continue;
    }
    if (s == "t,x,y,p") continue;
    std::string_view fields[4];
    std::size_t n = 0, start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      if (i == s.size() || s[i] == ',') {
        if (n == 4) throw ParseError("expected 4 comma-separated fields", lineno);
        fields[n++] = s.substr(start, i - start);
        start = i + 1;
      }
    }
    if (n != 4) throw ParseError("expected 4 comma-separated fields", lineno);
    EventPoint e;
    int p = 0;
    if (!parse_int(fields[0], e.t) || !parse_int(fields[1], e.x) || !parse_int(fields[2], e.y) ||
        !parse_int(fields[3], p)) {
      throw ParseError("malformed integer field in '" + std::string(s) + "'", lineno);
    }
    if (p != 1 && p != -1) throw ParseError("polarity must be 1 or -1", lineno);
    if (e.t < 0) throw ParseError("negative timestamp", lineno);
    e.p = static_cast<std::int8_t>(p);
    max_x = std::max<std::int64_t>(max_x, e.x);
    max_y = std::max<std::int64_t>(max_y, e.y);
    stream.events.push_back(e);
  }
  if (header) {
    sensor = header;
  } else if (!sensor) {
    sensor = SensorSize{static_cast<std::size_t>(max_x + 1), static_cast<std::size_t>(max_y + 1)};
  }
  stream.sensor_w = sensor->w;
  stream.sensor_h = sensor->h;
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const EventPoint& a, const EventPoint& b) { return a.t < b.t; });
  stream.validate();
  return stream;
}

EventStream parse_event_csv(const std::filesystem::path& path, std::optional<SensorSize> sensor) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path.string());
  return parse_event_csv(is, sensor);
}

void write_event_csv(std::ostream& os, const EventStream& stream) {
  os << "# w=" << stream.sensor_w << " h=" << stream.sensor_h << '\n';
  for (const auto& e : stream.events) {
    os << e.t << ',' << e.x << ',' << e.y << ',' << static_cast<int>(e.p) << '\n';
  }
}

void write_event_csv(const std::filesystem::path& path, const EventStream& stream) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_event_csv(os, stream);
}

EventStream simulate_events(const std::vector<ImagePlane>& frames,
                            const std::vector<std::int64_t>& timestamps, double threshold) {
  if (frames.size() < 2) throw ValidationError("simulate_events: need at least two frames");
  if (timestamps.size() != frames.size()) {
    throw ValidationError("simulate_events: one timestamp per frame required");
  }
  if (!(threshold > 0)) throw ConfigError("simulate_events: threshold must be positive");
  const std::size_t h = frames[0].h, w = frames[0].w;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].h != h || frames[i].w != w || frames[i].channels != 1) {
      throw ValidationError("simulate_events: frame " + std::to_string(i) +
                            " differs in size or is not single-channel");
    }
    if (i && timestamps[i] < timestamps[i - 1]) {
      throw ValidationError("simulate_events: timestamps must be non-decreasing");
    }
  }

  EventStream stream{w, h, {}};
  const std::size_t npix = h * w;
  std::vector<double> base(npix);
  std::vector<std::int64_t> level(npix, 0);  // reference = base + level * threshold
  for (std::size_t i = 0; i < npix; ++i) base[i] = std::log(frames[0].pixels[i] + kLogEpsilon);

  std::vector<EventPoint> interval;
  for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
    interval.clear();
    const double dt = static_cast<double>(timestamps[k + 1] - timestamps[k]);
    for (std::size_t i = 0; i < npix; ++i) {
      const double la = std::log(frames[k].pixels[i] + kLogEpsilon);
      const double lb = std::log(frames[k + 1].pixels[i] + kLogEpsilon);
      const auto emit = [&](double ref, int sign) {
        const double frac = (ref - la) / (lb - la);
        interval.push_back({timestamps[k] + std::llround(frac * dt),
                            static_cast<std::int32_t>(i % w), static_cast<std::int32_t>(i / w),
                            static_cast<std::int8_t>(sign)});
      };
      while (lb - (base[i] + static_cast<double>(level[i]) * threshold) >= threshold) {
        ++level[i];
        emit(base[i] + static_cast<double>(level[i]) * threshold, 1);
      }
      while ((base[i] + static_cast<double>(level[i]) * threshold) - lb >= threshold) {
        --level[i];
        emit(base[i] + static_cast<double>(level[i]) * threshold, -1);
      }
    }
    std::stable_sort(interval.begin(), interval.end(),
                     [](const EventPoint& a, const EventPoint& b) { return a.t < b.t; });
    stream.events.insert(stream.events.end(), interval.begin(), interval.end());
  }
  return stream;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

ImagePlane synthesize_frame(const EventStream& stream, std::int64_t t0, std::int64_t t1) {
  ImagePlane out(stream.sensor_h, stream.sensor_w, 1, 0.5);
  std::vector<double> counts(stream.sensor_h * stream.sensor_w, 0.0);
  bool any = false;
  for (const auto& e : stream.events) {
    if (e.t < t0 || e.t > t1) continue;
    counts[static_cast<std::size_t>(e.y) * stream.sensor_w + static_cast<std::size_t>(e.x)] += e.p;
    any = true;
  }
  if (!any) return out;
  std::vector<double> magnitudes(counts.size());
  std::transform(counts.begin(), counts.end(), magnitudes.begin(),
                 [](double s) { return std::abs(s); });
  const double gain = 0.5 / std::max(1.0, percentile(std::move(magnitudes), 95.0));
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out.pixels[i] = std::clamp(0.5 + gain * counts[i], 0.0, 1.0);
  }
  return out;
}

}  // namespace hgp
