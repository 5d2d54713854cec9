// Command-line front end: data synthesis, training, evaluation, inference and
// the diagnostic subcommands.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "hgp/ablation.hpp"
#include "hgp/checkpoint.hpp"
#include "hgp/dataset.hpp"
#include "hgp/error.hpp"
#include "hgp/eval.hpp"
#include "hgp/gradsuite.hpp"
#include "hgp/train.hpp"

using namespace hgp;

namespace {

/// One optional CLI flag per TrainConfig key, applied after the config file.
class ConfigFlags {
 public:
  void attach(CLI::App* app) {
    for (const auto& [key, value] : to_key_values(TrainConfig{})) {
      app->add_option("--" + key, values_[key], "config override (default " + value + ")")->group("Config");
    }
    app->add_option("--config", file_, "key = value config file")->check(CLI::ExistingFile);
  }

  TrainConfig resolve(TrainConfig base = {}) const {
    if (!file_.empty()) base = load_config_file(file_, base);
    for (const auto& [key, value] : values_) {
      if (value) set_config_value(base, key, *value);
    }
    base.validate();
    return base;
  }

  std::vector<std::string> given() const {
    std::vector<std::string> out;
    for (const auto& [key, value] : values_) {
      if (value) out.push_back(key);
    }
    return out;
  }
  bool has_file() const { return !file_.empty(); }

 private:
  std::map<std::string, std::optional<std::string>> values_;
  std::string file_;
};

std::vector<SamplePair> load_pairs(const std::string& manifest, std::size_t threads) {
  auto pairs = load_dataset(manifest, {}, threads);
  if (pairs.empty()) throw ConfigError("manifest " + manifest + " has no records");
  return pairs;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os << text;
}

int cmd_synth(const SynthSpec& spec, const std::string& out, std::size_t threads) {
  const auto samples = synth_dataset(spec, threads);
  const auto manifest = write_dataset(out, samples, threads);
  std::cout << "wrote " << samples.size() << " samples (" << to_string(spec.mix) << ") to " << manifest.string()
            << "\n";
  return 0;
}

int cmd_train(const ConfigFlags& flags, const std::string& data, const std::string& out, const std::string& log_path,
              const std::string& resume, std::size_t threads) {
  std::optional<TrainState> restored;
  TrainConfig cfg;
  if (!resume.empty()) {
    restored = load_checkpoint(resume);
    if (flags.has_file()) throw ConfigError("--config cannot be combined with --resume");
    for (const auto& key : flags.given()) {
      if (key != "max_steps" && key != "checkpoint_every") {
        throw ConfigError("--" + key + " would change a resumed run; only max_steps and checkpoint_every may be set");
      }
    }
    cfg = flags.resolve(restored->config);
    restored->config.max_steps = cfg.max_steps;
    restored->config.checkpoint_every = cfg.checkpoint_every;
  } else {
    cfg = flags.resolve();
  }

  const auto examples = make_examples(load_pairs(data, threads), cfg.model);
  Trainer trainer = restored ? Trainer(*restored, examples) : Trainer(cfg, examples);

  std::ofstream log_file;
  std::ostream* log = &std::cout;
  if (!log_path.empty()) {
    log_file.open(log_path, restored ? std::ios::app : std::ios::trunc);
    if (!log_file) throw Error("cannot write " + log_path);
    log = &log_file;
  }
  std::cerr << "training " << examples.size() << " samples for " << trainer.total_steps() << " steps from step "
            << trainer.step() << "\n";
  const auto t0 = std::chrono::steady_clock::now();
  const auto records = run_training(trainer, {log, out, {}});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "finished at step %zu, final loss %.6f, %.1f s; checkpoint %s\n", trainer.step(),
               records.empty() ? 0.0 : records.back().loss, secs, out.c_str());
  return 0;
}

int cmd_eval(const std::string& data, const std::string& ckpt, const std::string& mode, const std::string& report,
             std::size_t threads) {
  const Model model = model_from_state(load_checkpoint(ckpt));
  const EvalReport r = run_eval(model, load_pairs(data, threads), parse_modality(mode), threads);
  const std::string text = format_report(r);
  std::cout << text;
  if (!report.empty()) write_text(report, text);
  return 0;
}

std::optional<CropBox> parse_crop_flag(const std::string& text) {
  if (text.empty()) return std::nullopt;
  CropBox c;
  if (std::sscanf(text.c_str(), "%zu,%zu,%zu,%zu", &c.y, &c.x, &c.h, &c.w) != 4) {
    throw ConfigError("--crop expects y,x,h,w");
  }
  return c;
}

int cmd_infer(const std::string& image, const std::string& events, const std::string& ckpt, const std::string& mode,
              const std::string& crop_text) {
  const Model model = model_from_state(load_checkpoint(ckpt));
  SamplePair pair;
  pair.rgb = read_pnm(image);
  if (pair.rgb.channels == 1) pair.rgb = replicate_channels(pair.rgb, 3);
  const EventStream ev = parse_event_csv(std::filesystem::path(events));
  const std::int64_t t_end = ev.events.empty() ? 0 : ev.events.back().t;
  pair.event_gray = synthesize_frame(ev, 0, t_end);
  if (const auto c = parse_crop_flag(crop_text)) pair.event_gray = crop(pair.event_gray, c->y, c->x, c->h, c->w);
  std::cout << model.recognize(make_input(pair, model.config()), parse_modality(mode)) << "\n";
  return 0;
}

int cmd_grad_check(std::size_t trials, std::uint64_t seed) {
  constexpr Real kTolerance = 1e-4;
  bool ok = true;
  for (const auto& r : run_gradient_suite(trials, seed)) {
    const bool pass = r.max_rel_error < kTolerance;
    ok = ok && pass;
    std::printf("%-20s checks=%-3zu max_rel_err=%.3e %s\n", r.name.c_str(), r.checks, r.max_rel_error,
                pass ? "PASS" : "FAIL");
  }
  return ok ? 0 : 1;
}

int cmd_inspect(const std::string& id, const std::string& data, const std::string& ckpt) {
  Model model = model_from_state(load_checkpoint(ckpt));
  std::vector<SamplePair> pairs = load_pairs(data, 0);
  const SamplePair* sample = nullptr;
  for (const auto& p : pairs) {
    if (p.id == id) sample = &p;
  }
  if (!sample) throw ConfigError("no sample with id '" + id + "' in " + data);
  Hypergraph g;
  EncodeOptions opts;
  opts.graph_out = &g;
  const EncodeTrace trace = model.trace(make_input(*sample, model.config()), Modality::fused, opts);
  if (g.n_vertices == 0) {
    std::cout << "fusion strategy " << to_string(model.config().fusion) << " builds no hypergraph\n";
    return 0;
  }
  const std::size_t gw = model.config().input_w / model.config().patch_w;
  Real asym = 0, min_row = 1e300, max_row = -1e300;
  for (std::size_t i = 0; i < g.n_vertices; ++i) {
    Real row = 0;
    for (std::size_t j = 0; j < g.n_vertices; ++j) {
      const Real gij = g.propagation.data()[i * g.n_vertices + j];
      row += gij;
      asym = std::max(asym, std::abs(gij - g.propagation.data()[j * g.n_vertices + i]));
    }
    min_row = std::min(min_row, row);
    max_row = std::max(max_row, row);
  }
  std::printf("sample %s label %s prediction %s\n", id.c_str(), sample->label.c_str(),
              model.decoder().greedy_decode(trace.image_tokens).c_str());
  std::printf("vertices %zu hyperedges %zu k %zu max|G-G^T| %.3e G row sums [%.4f, %.4f]\n", g.n_vertices,
              g.n_edges(), model.config().knn_k, asym, min_row, max_row);
  std::printf("%-8s %-10s %-8s members (row,col)\n", "edge", "anchor", "De");
  for (std::size_t e = 0; e < g.n_edges(); ++e) {
    const std::size_t a = g.hyperedges[e].front();
    std::printf("%-8zu (%2zu,%2zu)    %-8.0f", e, a / gw, a % gw, g.edge_degree[e]);
    for (std::size_t v : g.hyperedges[e]) std::printf(" (%zu,%zu)", v / gw, v % gw);
    std::printf("\n");
  }
  std::printf("vertex degrees:");
  for (Real d : g.vertex_degree) std::printf(" %.0f", d);
  std::printf("\n");
  return 0;
}

int cmd_ablate(const ConfigFlags& flags, const std::string& train_data, const std::string& test_data,
               std::size_t train_count, std::size_t test_count, const std::string& out, std::size_t threads) {
  TrainConfig base;
  base.epochs = 2;
  base.batch_size = 16;
  AblationOptions opts;
  opts.base = flags.resolve(base);
  opts.progress = &std::cerr;
  std::vector<SamplePair> train, test;
  if (!train_data.empty()) {
    train = load_pairs(train_data, threads);
  } else {
    SynthSpec spec;
    spec.count = train_count;
    spec.seed = opts.base.seed;
    spec.mix = DegradationMix::mixed;
    spec.max_len = opts.base.model.max_len;
    spec.charset = opts.base.model.charset;
    for (auto& s : synth_dataset(spec, threads)) train.push_back(std::move(s.pair));
  }
  if (!test_data.empty()) {
    test = load_pairs(test_data, threads);
  } else {
    SynthSpec spec;
    spec.count = test_count;
    spec.seed = opts.base.seed + 1000003;
    spec.max_len = opts.base.model.max_len;
    spec.charset = opts.base.model.charset;
    spec.id_prefix = "t";
    for (auto& s : synth_dataset(spec, threads)) test.push_back(std::move(s.pair));
  }
  const auto rows = run_ablation(opts, train, test);
  const std::string table = format_ablation_table(rows);
  std::cout << table;
  if (!out.empty()) write_text(out, table);
  for (const auto& r : rows) {
    if (r.status != "ok" || r.ar_equal == "no") return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kilometre-marker recognition from RGB frames and event streams"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "worker threads for data and evaluation (0 = all cores)");

  SynthSpec spec;
  std::string synth_out, mix = "clean";
  auto* synth = app.add_subcommand("synth-data", "render a synthetic dataset with manifest, images and events");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--count", spec.count, "number of samples");
  synth->add_option("--seed", spec.seed, "dataset seed");
  synth->add_option("--mix", mix, "degradations: clean, mixed or dark_blur");
  synth->add_option("--max-len", spec.max_len, "longest label");
  synth->add_option("--charset", spec.charset, "label alphabet");
  synth->add_option("--id-prefix", spec.id_prefix, "sample id prefix");

  ConfigFlags train_flags;
  std::string data, ckpt_out = "model.ckpt", log_path, resume;
  auto* train = app.add_subcommand("train", "train a model; flags override the config file");
  train->add_option("--data", data, "training manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--out", ckpt_out, "checkpoint path");
  train->add_option("--log", log_path, "metrics log (default stdout)");
  train->add_option("--resume", resume, "continue from this checkpoint")->check(CLI::ExistingFile);
  train_flags.attach(train);

  std::string ckpt, mode = "fused", report;
  auto* eval = app.add_subcommand("eval", "word accuracy and CER of a checkpoint");
  eval->add_option("--data", data, "test manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--checkpoint", ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--mode", mode, "rgb, event or fused");
  eval->add_option("--report", report, "also write the key-value report here");

  std::string image, events, crop_text;
  auto* infer = app.add_subcommand("infer", "recognize one image + event file pair");
  infer->add_option("image", image, "RGB image (PPM or PGM)")->required()->check(CLI::ExistingFile);
  infer->add_option("events", events, "event CSV")->required()->check(CLI::ExistingFile);
  infer->add_option("--checkpoint", ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  infer->add_option("--mode", mode, "rgb, event or fused");
  infer->add_option("--crop", crop_text, "crop y,x,h,w applied to the event frame");

  std::size_t trials = 20;
  std::uint64_t gc_seed = 1234;
  auto* grad = app.add_subcommand("grad-check", "finite-difference check of every op and the model");
  grad->add_option("--trials", trials, "random inputs per op");
  grad->add_option("--seed", gc_seed, "input seed");

  std::string sample_id;
  auto* inspect = app.add_subcommand("inspect-hypergraph", "print the hypergraph built for one sample");
  inspect->add_option("sample-id", sample_id, "manifest id")->required();
  inspect->add_option("--data", data, "manifest containing the sample")->required()->check(CLI::ExistingFile);
  inspect->add_option("--checkpoint", ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);

  ConfigFlags ablate_flags;
  std::string train_data, test_data, table_out;
  std::size_t train_count = 256, test_count = 100;
  auto* ablate = app.add_subcommand("ablate", "fusion x inject-layer x K sweep at a reduced budget");
  ablate->add_option("--train-data", train_data, "training manifest (default: synthesize)");
  ablate->add_option("--test-data", test_data, "test manifest (default: synthesize)");
  ablate->add_option("--train-count", train_count, "synthetic training samples");
  ablate->add_option("--test-count", test_count, "synthetic test samples");
  ablate->add_option("--out", table_out, "also write the table here");
  ablate_flags.attach(ablate);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) {
      spec.mix = parse_degradation_mix(mix);
      return cmd_synth(spec, synth_out, threads);
    }
    if (*train) return cmd_train(train_flags, data, ckpt_out, log_path, resume, threads);
    if (*eval) return cmd_eval(data, ckpt, mode, report, threads);
    if (*infer) return cmd_infer(image, events, ckpt, mode, crop_text);
    if (*grad) return cmd_grad_check(trials, gc_seed);
    if (*inspect) return cmd_inspect(sample_id, data, ckpt);
    if (*ablate) return cmd_ablate(ablate_flags, train_data, test_data, train_count, test_count, table_out, threads);
  } catch (const hgp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
