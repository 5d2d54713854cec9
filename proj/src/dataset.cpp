#include "hgp/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "hgp/error.hpp"

namespace hgp {

std::string to_string(DegradationMix mix) {
  switch (mix) {
    case DegradationMix::clean: return "clean";
    case DegradationMix::mixed: return "mixed";
    case DegradationMix::dark_blur: return "dark_blur";
  }
  return "unknown";
}

DegradationMix parse_degradation_mix(const std::string& name) {
  for (auto m : {DegradationMix::clean, DegradationMix::mixed, DegradationMix::dark_blur}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown degradation mix '" + name + "' (expected clean, mixed or dark_blur)");
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::string random_label(std::mt19937_64& rng, const std::string& charset, std::size_t max_len) {
  if (charset.empty() || max_len == 0) throw ConfigError("random_label: empty charset or length");
  const auto has = [&](char c) { return charset.find(c) != std::string::npos; };
  bool digits = true;
  for (char c = '0'; c <= '9'; ++c) digits = digits && has(c);
  const auto pick = [&](const std::string& from) {
    return from[std::uniform_int_distribution<std::size_t>(0, from.size() - 1)(rng)];
  };
  const bool marker = digits && has('K') && has('+') && max_len >= 6;
  if (marker && std::uniform_int_distribution<int>(0, 1)(rng) == 0) {
    const std::size_t km_digits = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(3, max_len - 5))(rng);
    std::string s = "K";
    for (std::size_t i = 0; i < km_digits; ++i) s += pick("0123456789");
    s += '+';
    for (int i = 0; i < 3; ++i) s += pick("0123456789");
    return s;
  }
  const std::string pool = digits ? std::string("0123456789") : charset;
  std::string s(std::uniform_int_distribution<std::size_t>(1, max_len)(rng), ' ');
  for (auto& c : s) c = pick(pool);
  return s;
}

namespace {

std::uint64_t sample_seed(std::uint64_t seed, std::size_t index) {
  // splitmix64 finaliser over (seed, index)
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(index) + 1;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Degradation draw_degradation(DegradationMix mix, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (mix) {
    case DegradationMix::clean: return Degradation::none();
    case DegradationMix::dark_blur: return {4.0, 1.5, 0.0};
    case DegradationMix::mixed: break;
  }
  const double r = u(rng);
  if (r < 0.4) return Degradation::none();
  if (r < 0.55) return Degradation::dark(2.0 + 2.0 * u(rng));
  if (r < 0.7) return Degradation::blur(0.5 + u(rng));
  if (r < 0.85) return Degradation::noise(0.05 + 0.1 * u(rng));
  return {2.0 + 2.0 * u(rng), 0.5 + u(rng), 0.0};
}

std::string crop_text(const CropBox& c) {
  return std::to_string(c.y) + "," + std::to_string(c.x) + "," + std::to_string(c.h) + "," + std::to_string(c.w);
}

CropBox parse_crop(const std::string& text, std::size_t lineno) {
  CropBox c;
  std::size_t* fields[4] = {&c.y, &c.x, &c.h, &c.w};
  std::stringstream ss(text);
  std::string item;
  std::size_t n = 0;
  while (std::getline(ss, item, ',')) {
    if (n == 4) throw ParseError("crop needs four values", lineno);
    try {
      std::size_t used = 0;
      *fields[n++] = std::stoul(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ParseError("bad crop value '" + item + "'", lineno);
    }
  }
  if (n != 4) throw ParseError("crop needs four values", lineno);
  return c;
}

}  // namespace

SynthSample synth_sample(const SynthSpec& spec, std::size_t index) {
  std::mt19937_64 rng(sample_seed(spec.seed, index));
  const std::string label = random_label(rng, spec.charset, spec.max_len);
  const Degradation deg = draw_degradation(spec.mix, rng);
  MotionSpec motion;
  motion.velocity = (rng() % 2 ? 1.0 : -1.0) * std::uniform_real_distribution<double>(0.75, 2.0)(rng);
  const std::uint64_t render_seed = rng();
  static const FontAtlas atlas = FontAtlas::builtin();
  const RenderedScene scene = render_scene(label, atlas, motion, deg, render_seed, spec.render);
  SynthSample out;
  out.pair = finish_sample(scene, spec.render);
  out.pair.label = label;
  char id[32];
  std::snprintf(id, sizeof id, "%06zu", index);
  out.pair.id = spec.id_prefix + id;
  out.events = scene.events;
  out.crop = scene.crop;
  return out;
}

std::vector<SynthSample> synth_dataset(const SynthSpec& spec, std::size_t threads) {
  std::vector<SynthSample> out(spec.count);
  parallel_for(spec.count, threads, [&](std::size_t i) { out[i] = synth_sample(spec, i); });
  return out;
}

std::string format_manifest_record(const ManifestRecord& r) {
  std::string line = "id=" + r.id + "\tlabel=" + r.label + "\trgb=" + r.rgb;
  if (!r.gray.empty()) line += "\tgray=" + r.gray;
  if (!r.events.empty()) line += "\tevents=" + r.events;
  if (r.crop) line += "\tcrop=" + crop_text(*r.crop);
  return line;
}

ManifestRecord parse_manifest_record(const std::string& line, std::size_t lineno) {
  ManifestRecord r;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, '\t')) {
    if (field.empty()) continue;
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ParseError("field '" + field + "' is not key=value", lineno);
    const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
    if (key == "id") r.id = value;
    else if (key == "label") r.label = value;
    else if (key == "rgb") r.rgb = value;
    else if (key == "gray") r.gray = value;
    else if (key == "events") r.events = value;
    else if (key == "crop") r.crop = parse_crop(value, lineno);
    else throw ParseError("unknown manifest key '" + key + "'", lineno);
  }
  if (r.id.empty() || r.label.empty() || r.rgb.empty()) {
    throw ParseError("record needs id, label and rgb", lineno);
  }
  if (r.gray.empty() && r.events.empty()) throw ParseError("record needs gray or events", lineno);
  if (r.gray.empty() && !r.crop) throw ParseError("an events-only record needs crop", lineno);
  return r;
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open manifest " + path.string());
  std::vector<ManifestRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    out.push_back(parse_manifest_record(line, lineno));
  }
  return out;
}

std::filesystem::path write_dataset(const std::filesystem::path& dir, const std::vector<SynthSample>& samples,
                                    std::size_t threads) {
  std::filesystem::create_directories(dir / "rgb");
  std::filesystem::create_directories(dir / "gray");
  std::filesystem::create_directories(dir / "events");
  std::vector<ManifestRecord> records(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const auto& s = samples[i];
    ManifestRecord& r = records[i];
    r.id = s.pair.id;
    r.label = s.pair.label;
    r.rgb = "rgb/" + s.pair.id + ".ppm";
    r.gray = "gray/" + s.pair.id + ".pgm";
    r.events = "events/" + s.pair.id + ".csv";
    r.crop = s.crop;
    write_pnm(dir / r.rgb, s.pair.rgb);
    write_pnm(dir / r.gray, s.pair.event_gray);
    write_event_csv(dir / r.events, s.events);
  });
  const auto manifest = dir / "manifest.txt";
  std::ofstream os(manifest);
  if (!os) throw Error("cannot write " + manifest.string());
  for (const auto& r : records) os << format_manifest_record(r) << '\n';
  return manifest;
}

std::vector<SamplePair> load_dataset(const std::filesystem::path& manifest, const RenderConfig& cfg,
                                     std::size_t threads) {
  const auto records = read_manifest(manifest);
  const auto base = manifest.parent_path();
  std::vector<SamplePair> out(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const auto& r = records[i];
    SamplePair& p = out[i];
    p.id = r.id;
    p.label = r.label;
    p.rgb = read_pnm(base / r.rgb);
    if (p.rgb.channels == 1) p.rgb = replicate_channels(p.rgb, 3);
    if (p.rgb.h != cfg.out_h || p.rgb.w != cfg.out_w) p.rgb = resize_bilinear(p.rgb, cfg.out_h, cfg.out_w);
    if (!r.gray.empty()) {
      p.event_gray = to_gray(read_pnm(base / r.gray));
    } else {
      const EventStream ev = parse_event_csv(base / r.events);
      const std::int64_t t_end = ev.events.empty() ? 0 : ev.events.back().t;
      const CropBox& c = *r.crop;
      p.event_gray = crop(synthesize_frame(ev, 0, t_end), c.y, c.x, c.h, c.w);
    }
    if (p.event_gray.h != cfg.out_h || p.event_gray.w != cfg.out_w) {
      p.event_gray = resize_bilinear(p.event_gray, cfg.out_h, cfg.out_w);
    }
  });
  return out;
}

}  // namespace hgp
