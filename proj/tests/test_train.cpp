#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hgp/checkpoint.hpp"
#include "hgp/dataset.hpp"
#include "hgp/error.hpp"
#include "hgp/eval.hpp"
#include "hgp/train.hpp"
#include "test_util.hpp"

using namespace hgp;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.model.input_h = 8;
  cfg.model.input_w = 32;
  cfg.model.d_model = 32;
  cfg.model.enc_layers = 2;
  cfg.model.enc_heads = 2;
  cfg.model.knn_k = 3;
  cfg.model.max_len = 4;
  cfg.batch_size = 2;
  cfg.epochs = 2;
  cfg.permutations = 3;
  cfg.seed = 11;
  return cfg;
}

std::vector<TrainExample> tiny_data(const TrainConfig& cfg, std::size_t n) {
  SynthSpec spec;
  spec.count = n;
  spec.seed = 5;
  spec.max_len = cfg.model.max_len;
  std::vector<SamplePair> pairs;
  for (auto& s : synth_dataset(spec, 1)) pairs.push_back(s.pair);
  return make_examples(pairs, cfg.model);
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hgp_test_train_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("ce_loss examples") {
  const std::vector<int> targets = {3, 0, 7};
  Tensor confident({3, 11}, 0.0);
  for (std::size_t r = 0; r < 3; ++r) confident.mutable_data()[r * 11 + targets[r]] = 40.0;
  CHECK(ce_loss(confident, targets, 10).item() < 1e-6);

  const Tensor uniform({3, 11}, 0.25);
  CHECK(ce_loss(uniform, targets, 10).item() == doctest::Approx(std::log(11.0)).epsilon(1e-14));

  const std::vector<int> all_pad = {10, 10, 10};
  CHECK(ce_loss(uniform, all_pad, 10).item() == 0.0);

  // pad rows are excluded from the mean
  const std::vector<int> half_pad = {3, 10, 10};
  CHECK(ce_loss(confident, half_pad, 10).item() < 1e-6);
}

TEST_CASE("adam_step examples") {
  SUBCASE("zero gradient leaves parameters and moments unchanged") {
    ParamList params = {{"w", Tensor({3}, {0.5, -1.0, 2.0})}};
    params[0].tensor.set_requires_grad();
    AdamState st = make_adam_state(params);
    for (int i = 0; i < 5; ++i) adam_step(params, st, 1e-2);
    CHECK(params[0].tensor.data()[0] == 0.5);
    CHECK(params[0].tensor.data()[2] == 2.0);
    for (Real m : st.m[0]) CHECK(m == 0.0);
    for (Real v : st.v[0]) CHECK(v == 0.0);
  }
  SUBCASE("constant gradient moves a scalar by about -lr per step") {
    const double lr = 1e-3, g = 0.37;
    ParamList params = {{"w", Tensor({1}, {1.0})}};
    params[0].tensor.set_requires_grad();
    AdamState st = make_adam_state(params);
    double prev = 1.0;
    for (int i = 0; i < 3; ++i) {
      params[0].tensor.grad_buffer()[0] = g;
      adam_step(params, st, lr);
      const double now = params[0].tensor.data()[0];
      // m_hat = g and v_hat = g^2 for a constant gradient
      CHECK(now - prev == doctest::Approx(-lr * g / (g + 1e-8)).epsilon(1e-9));
      prev = now;
    }
  }
  SUBCASE("non-finite gradient names the parameter") {
    ParamList params = {{"enc.w", Tensor({2}, {1.0, 1.0})}};
    params[0].tensor.set_requires_grad();
    params[0].tensor.grad_buffer()[1] = std::nan("");
    AdamState st = make_adam_state(params);
    try {
      adam_step(params, st, 1e-3);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("enc.w") != std::string::npos);
    }
    CHECK(st.step == 0);
  }
  SUBCASE("equal seeds give equal parameters") {
    const auto run = [] {
      std::mt19937_64 rng(3);
      ParamList params = {{"a", testing::random_tensor({4, 3}, rng)}};
      params[0].tensor.set_requires_grad();
      AdamState st = make_adam_state(params);
      for (int i = 0; i < 10; ++i) {
        for (auto& v : params[0].tensor.grad_buffer()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
        adam_step(params, st, 1e-2);
      }
      return params[0].tensor.clone();
    };
    CHECK(testing::exactly_equal(run(), run()));
  }
}

TEST_CASE("one_cycle_lr examples") {
  CHECK(one_cycle_lr(100, 1000) == doctest::Approx(7e-4).epsilon(1e-15));
  CHECK(one_cycle_lr(0, 1000) == doctest::Approx(7e-6).epsilon(1e-15));
  CHECK(one_cycle_lr(1000, 1000) == doctest::Approx(7e-6).epsilon(1e-15));
  double prev = 0;
  for (std::size_t s = 0; s <= 100; ++s) {
    const double lr = one_cycle_lr(s, 1000);
    CHECK(lr >= prev);
    prev = lr;
  }
  for (std::size_t s = 101; s <= 1000; ++s) {
    const double lr = one_cycle_lr(s, 1000);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("config text round trip and precedence") {
  TrainConfig cfg = tiny_config();
  cfg.lr_peak = 0.1 + 0.2;  // not exactly representable in short decimal form
  cfg.model.fusion = FusionKind::concatenate;
  cfg.model.inject_layers = "last";
  const TrainConfig back = config_from_text(config_to_text(cfg));
  CHECK(config_to_text(back) == config_to_text(cfg));
  CHECK(back.lr_peak == cfg.lr_peak);

  // file over default, flag over file
  TrainConfig from_file = config_from_text("# comment\nepochs = 7\n\nbatch_size=4\n");
  CHECK(from_file.epochs == 7);
  CHECK(from_file.batch_size == 4);
  CHECK(from_file.lr_peak == TrainConfig{}.lr_peak);
  set_config_value(from_file, "epochs", "9");
  CHECK(from_file.epochs == 9);

  CHECK_THROWS_AS(set_config_value(from_file, "epoch", "9"), ConfigError);
  CHECK_THROWS_AS(set_config_value(from_file, "batch_size", "four"), ConfigError);
  try {
    config_from_text("epochs = 3\nno equals sign here\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find('2') != std::string::npos);
  }
  TrainConfig bad = tiny_config();
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("checkpoint save, load, save is byte-identical") {
  const TrainConfig cfg = tiny_config();
  Trainer trainer(cfg, tiny_data(cfg, 3));
  trainer.train_step();
  const auto dir = scratch("ckpt");
  save_checkpoint(dir / "a.ckpt", trainer.state());
  const TrainState loaded = load_checkpoint(dir / "a.ckpt");
  save_checkpoint(dir / "b.ckpt", loaded);
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
  CHECK(loaded.adam == trainer.state().adam);
  CHECK(!std::filesystem::exists(dir / "a.ckpt.tmp"));

  // forward outputs survive the round trip bitwise
  const auto data = tiny_data(cfg, 1);
  const Tensor z1 = trainer.model().encode(data[0].input);
  const Tensor z2 = model_from_state(loaded).encode(data[0].input);
  CHECK(testing::exactly_equal(z1, z2));
}

TEST_CASE("checkpoint rejects foreign and damaged files") {
  const TrainConfig cfg = tiny_config();
  Trainer trainer(cfg, tiny_data(cfg, 2));
  std::string bytes = serialize_checkpoint(trainer.state());
  std::string wrong_version = bytes;
  wrong_version[4] = 2;
  CHECK_THROWS_AS(deserialize_checkpoint(wrong_version), VersionError);
  std::string wrong_magic = bytes;
  wrong_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(wrong_magic), VersionError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() / 2)), ParseError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), ParseError);
}

TEST_CASE("resume reproduces the uninterrupted loss trajectory") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 3;
  const auto data = tiny_data(cfg, 5);
  Trainer straight(cfg, data);
  std::vector<StepRecord> full;
  while (!straight.done()) full.push_back(straight.train_step());
  REQUIRE(full.size() == 9);

  Trainer first(cfg, data);
  for (int i = 0; i < 4; ++i) first.train_step();
  const TrainState mid = deserialize_checkpoint(serialize_checkpoint(first.state()));
  Trainer resumed(mid, data);
  CHECK(resumed.step() == 4);
  for (std::size_t i = 4; i < full.size(); ++i) {
    const StepRecord r = resumed.train_step();
    CHECK(format_step(r) == format_step(full[i]));
  }
  CHECK(serialize_checkpoint(resumed.state()) == serialize_checkpoint(straight.state()));
}

TEST_CASE("run_training log grammar and periodic checkpoints") {
  TrainConfig cfg = tiny_config();
  cfg.checkpoint_every = 2;
  const auto dir = scratch("run");
  Trainer trainer(cfg, tiny_data(cfg, 4));
  std::ostringstream log;
  std::size_t saves_seen = 0;
  run_training(trainer, {&log, dir / "final.ckpt", [&](const StepRecord&) {
                           saves_seen += std::filesystem::exists(dir / "final.ckpt");
                         }});
  CHECK(saves_seen > 0);
  std::istringstream lines(log.str());
  std::string line;
  std::size_t expect = 1;
  while (std::getline(lines, line)) {
    std::size_t step = 0;
    double lr = 0, loss = 0;
    REQUIRE(std::sscanf(line.c_str(), "step=%zu lr=%lf loss=%lf", &step, &lr, &loss) == 3);
    CHECK(step == expect++);
    CHECK(std::isfinite(loss));
  }
  CHECK(expect - 1 == trainer.total_steps());
  CHECK(load_checkpoint(dir / "final.ckpt").adam.step == trainer.total_steps());
}

TEST_CASE("empty training set is a config error") {
  CHECK_THROWS_AS(Trainer(tiny_config(), {}), ConfigError);
}

TEST_CASE("synthetic data is deterministic per index") {
  SynthSpec spec;
  spec.count = 6;
  spec.seed = 9;
  spec.mix = DegradationMix::mixed;
  const auto serial = synth_dataset(spec, 1);
  const auto threaded = synth_dataset(spec, 3);
  for (std::size_t i = 0; i < spec.count; ++i) {
    CHECK(serial[i].pair.label == threaded[i].pair.label);
    CHECK(serial[i].pair.rgb.pixels == threaded[i].pair.rgb.pixels);
    CHECK(serial[i].pair.event_gray.pixels == threaded[i].pair.event_gray.pixels);
    CHECK(synth_sample(spec, i).pair.rgb.pixels == serial[i].pair.rgb.pixels);
  }
  const Charset cs(spec.charset);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 300; ++i) {
    const std::string s = random_label(rng, spec.charset, 10);
    CHECK(!s.empty());
    CHECK(s.size() <= 10);
    CHECK_NOTHROW(encode_label(s, cs, 10));
  }
}

TEST_CASE("dataset files round trip through the manifest") {
  SynthSpec spec;
  spec.count = 3;
  const auto samples = synth_dataset(spec, 1);
  const auto dir = scratch("data");
  const auto manifest = write_dataset(dir, samples, 2);
  const auto loaded = load_dataset(manifest);
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded[i].id == samples[i].pair.id);
    CHECK(loaded[i].label == samples[i].pair.label);
    // 8-bit files quantize to within half a grey level
    for (std::size_t j = 0; j < loaded[i].rgb.pixels.size(); ++j) {
      CHECK(std::abs(loaded[i].rgb.pixels[j] - samples[i].pair.rgb.pixels[j]) <= 0.5 / 255 + 1e-12);
    }
  }

  // events-only records re-synthesize the grey frame from the CSV
  auto records = read_manifest(manifest);
  records[0].gray.clear();
  {
    std::ofstream os(dir / "events_only.txt");
    os << format_manifest_record(records[0]) << '\n';
  }
  const auto from_events = load_dataset(dir / "events_only.txt");
  REQUIRE(from_events.size() == 1);
  for (std::size_t j = 0; j < from_events[0].event_gray.pixels.size(); ++j) {
    CHECK(std::abs(from_events[0].event_gray.pixels[j] - samples[0].pair.event_gray.pixels[j]) < 1e-9);
  }

  CHECK_THROWS_AS(parse_manifest_record("id=a\tlabel=1", 4), ParseError);
  CHECK_THROWS_AS(parse_manifest_record("id=a\tlabel=1\trgb=x\tevents=e.csv", 4), ParseError);
  CHECK_THROWS_AS(parse_manifest_record("id=a\tlabel=1\trgb=x\tgray=g\tcolour=red", 4), ParseError);
  CHECK_THROWS_AS(load_dataset(dir / "missing.txt"), ConfigError);
}

TEST_CASE("scoring is exact match with edit-distance CER") {
  CHECK(edit_distance("", "abc") == 3);
  CHECK(edit_distance("kitten", "sitting") == 3);
  CHECK(edit_distance("156", "157") == 1);
  const EvalReport r = score_predictions({"156", "K1+200", "42"}, {"157", "K1+200", "42"});
  CHECK(r.count == 3);
  CHECK(r.correct == 2);
  CHECK(r.accuracy == doctest::Approx(2.0 / 3.0));
  CHECK(r.cer == doctest::Approx(1.0 / 11.0));
  CHECK(r.per_length.at(3) == std::pair<std::size_t, std::size_t>{0, 1});
  CHECK(r.per_length.at(6) == std::pair<std::size_t, std::size_t>{1, 1});
  const std::string text = format_report(r);
  CHECK(text.find("count = 3\n") != std::string::npos);
  CHECK(text.find("acc_len_3 = 0/1\n") != std::string::npos);
}

TEST_CASE("rigged model scores 1.0 on ten samples") {
  TrainConfig cfg = tiny_config();
  Model model(cfg.model, 2);
  const Charset& cs = model.charset();
  const auto find = [&](const std::string& name) -> Tensor {
    for (auto& p : model.params()) {
      if (p.name == "decoder." + name) return p.tensor;
    }
    FAIL("no parameter " << name);
    return {};
  };
  const auto zero = [](Tensor t) { std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0); };
  for (const char* n : {"layer0.self_attn.out.weight", "layer0.self_attn.out.bias", "layer0.cross_attn.out.weight",
                        "layer0.cross_attn.out.bias", "layer0.mlp.fc2.weight", "layer0.mlp.fc2.bias"}) {
    zero(find(n));
  }
  Tensor queries = find("pos_queries");
  zero(queries);
  Tensor head_w = model.decoder().head().weight;
  zero(head_w);
  zero(model.decoder().head().bias);
  const int spelled[4] = {1, 5, 6, cs.eos()};
  for (std::size_t j = 0; j < 4; ++j) {
    queries.mutable_data()[j * 32 + j] = 1.0;
    head_w.mutable_data()[j * cs.num_classes() + static_cast<std::size_t>(spelled[j])] = 1.0;
  }
  SynthSpec spec;
  spec.count = 10;
  auto samples = synth_dataset(spec, 1);
  std::vector<SamplePair> pairs;
  for (auto& s : samples) {
    s.pair.label = "156";
    pairs.push_back(s.pair);
  }
  const EvalReport good = run_eval(model, pairs, Modality::fused, 2);
  CHECK(good.count == 10);
  CHECK(good.accuracy == 1.0);
  CHECK(good.cer == 0.0);
  for (auto& p : pairs) p.label = "157";
  const EvalReport bad = run_eval(model, pairs, Modality::rgb_only, 2);
  CHECK(bad.accuracy == 0.0);
  CHECK(bad.mode == "rgb_only");
}
