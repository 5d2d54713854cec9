#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hgp/render.hpp"

namespace hgp {

/// Which degradations the RGB frames of a synthetic set receive.
enum class DegradationMix {
  clean,      // none
  mixed,      // training blend of clean, dark, blur, noise and dark+blur
  dark_blur,  // gamma 4 followed by blur sigma 1.5 on every sample
};

std::string to_string(DegradationMix mix);
DegradationMix parse_degradation_mix(const std::string& name);

struct SynthSpec {
  std::size_t count = 100;
  std::uint64_t seed = 1;
  DegradationMix mix = DegradationMix::clean;
  std::string charset = "0123456789K+";
  std::size_t max_len = 10;
  RenderConfig render;
  std::string id_prefix = "s";
};

/// Kilometre-marker strings "K<1-3 digits>+<3 digits>" when the charset has
/// 'K' and '+', otherwise (and for half of the draws) strings of 1..max_len
/// symbols. Digits are used for the plain strings when the charset has all
/// ten of them.
std::string random_label(std::mt19937_64& rng, const std::string& charset, std::size_t max_len);

struct SynthSample {
  SamplePair pair;
  EventStream events;  // full-canvas stream before cropping
  CropBox crop;
};

/// Sample `index` of the set; depends only on (spec, index).
SynthSample synth_sample(const SynthSpec& spec, std::size_t index);
/// All samples, generated on up to `threads` workers, in index order.
std::vector<SynthSample> synth_dataset(const SynthSpec& spec, std::size_t threads = 0);

/// One manifest line: tab-separated key=value fields.
///   id, label, rgb (PPM), and gray (PGM) and/or events (CSV) with crop=y,x,h,w
/// Paths are relative to the manifest's directory.
struct ManifestRecord {
  std::string id;
  std::string label;
  std::string rgb;
  std::string gray;
  std::string events;
  std::optional<CropBox> crop;
};

std::string format_manifest_record(const ManifestRecord& r);
ManifestRecord parse_manifest_record(const std::string& line, std::size_t lineno);
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

/// Writes images, event files and `manifest.txt` into `dir`.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const std::vector<SynthSample>& samples,
                                    std::size_t threads = 0);

/// Loads every record of a manifest as 32x128 (or cfg-sized) sample pairs.
/// A pre-synthesized grey image wins over the event file when both exist.
std::vector<SamplePair> load_dataset(const std::filesystem::path& manifest, const RenderConfig& cfg = {},
                                     std::size_t threads = 0);

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware
/// concurrency). Exceptions from any worker are rethrown after all finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace hgp
