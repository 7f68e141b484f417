// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "avt/avt.hpp"

using namespace avt;
using namespace avt::harness;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.embed_dim = 8;
  cfg.heads = 2;
  cfg.encoder_depth = 1;
  cfg.fusion_blocks = 2;
  cfg.bottleneck_tokens = 2;
  cfg.proj_dim = 8;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e-3;
  cfg.steps = 12;
  cfg.eval_interval = 6;
  cfg.num_segments = 8;
  cfg.seed = 5;
  cfg.dataset.size = 24;
  cfg.dataset.noise = 0.3;
  cfg.dataset.audio_frames = 16;
  cfg.dataset.audio_bins = 8;
  cfg.patch_time = 4;
  cfg.patch_freq = 4;  // 8 audio tokens
  cfg.dataset.video_frames = 2;
  cfg.dataset.video_height = 4;
  cfg.dataset.video_width = 4;
  cfg.tubelet_t = 1;
  cfg.tubelet_h = 2;
  cfg.tubelet_w = 2;  // 8 video tokens
  cfg.validate();
  return cfg;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / ("avt_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("defaults carry the documented constants") {
  const ExperimentConfig cfg;
  CHECK(cfg.lambda1 == 0.5);
  CHECK(cfg.lambda2 == 0.1);
  CHECK(cfg.lambda3 == 0.01);
  CHECK(cfg.tau == 0.07);
  CHECK(cfg.fusion_blocks == 4);
  CHECK(cfg.bottleneck_tokens == 4);
  CHECK(cfg.num_segments == 50);
  CHECK(cfg.mask_ratio == 0.04);
  CHECK(cfg.proj_dim == 256);
  CHECK(cfg.learning_rate == 1e-4);
  CHECK(cfg.presets.size() == 8);
  cfg.validate();
}

TEST_CASE("unknown config keys are rejected by name") {
  nlohmann::json j = tiny_config().to_json();
  j["bogus_knob"] = 3;
  CHECK_THROWS_WITH(parse_config(j), Catch::Contains("bogus_knob"));
}

TEST_CASE("config JSON round-trips") {
  const ExperimentConfig cfg = tiny_config();
  const ExperimentConfig back = parse_config(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("invalid configurations fail validation") {
  ExperimentConfig cfg = tiny_config();
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = tiny_config();
  cfg.bottleneck_tokens = 8;  // = min token count
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = tiny_config();
  cfg.num_segments = 17;  // > audio_frames
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("xor dataset cues determine the label and hide it from each modality") {
  DatasetSpec spec;
  spec.size = 2000;
  spec.noise = 0.0;
  spec.seed = 3;
  const std::vector<SyntheticSample> data = gen_xor_dataset(spec);

  std::size_t audio0_label1 = 0, audio0 = 0;
  for (const SyntheticSample& s : data) {
    CHECK(s.label == static_cast<std::size_t>(s.audio_cue ^ s.video_cue));
    if (s.audio_cue == 0) {
      ++audio0;
      audio0_label1 += s.label;
    }
  }
  // XOR property: conditioned on the audio cue alone, labels stay balanced
  const double p1 = static_cast<double>(audio0_label1) / static_cast<double>(audio0);
  CHECK(p1 == Approx(0.5).margin(0.06));
}

TEST_CASE("xor dataset is a pure function of its spec") {
  DatasetSpec spec;
  spec.size = 16;
  spec.seed = 9;
  const auto a = gen_xor_dataset(spec);
  const auto b = gen_xor_dataset(spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].audio.values == b[i].audio.values);
    CHECK(a[i].video.values == b[i].video.values);
    CHECK(a[i].label == b[i].label);
  }
}

TEST_CASE("supervised-only training logs zero for the auxiliary terms") {
  const ExperimentConfig cfg = tiny_config();
  const std::vector<SyntheticSample> data = gen_xor_dataset(cfg.dataset);
  Trainer trainer(cfg, parse_preset("avbottleneck"), data);
  const StepRecord rec = trainer.train_step(1);
  CHECK(rec.losses.avc == 0.0);
  CHECK(rec.losses.avm == 0.0);
  CHECK(rec.losses.masegmv == 0.0);
  CHECK(rec.losses.total == rec.losses.cls_av);
}

TEST_CASE("the full objective logs every term") {
  ExperimentConfig cfg = tiny_config();
  cfg.mask_ratio = 0.25;
  const std::vector<SyntheticSample> data = gen_xor_dataset(cfg.dataset);
  Trainer trainer(cfg, parse_preset("avc_avm_masegmv"), data);
  const StepRecord rec = trainer.train_step(1);
  CHECK(rec.losses.avc > 0.0);
  CHECK(rec.losses.avm > 0.0);
  CHECK(rec.losses.masegmv > 0.0);
  const double expected = rec.losses.cls_av + cfg.lambda1 * rec.losses.avc +
                          cfg.lambda2 * rec.losses.avm + cfg.lambda3 * rec.losses.masegmv;
  CHECK(rec.losses.total == Approx(expected).margin(1e-12));
}

TEST_CASE("training reduces the loss on xor data") {
  ExperimentConfig cfg = tiny_config();
  cfg.steps = 300;
  cfg.learning_rate = 5e-3;
  cfg.dataset.size = 64;
  const std::vector<SyntheticSample> data = gen_xor_dataset(cfg.dataset);
  Trainer trainer(cfg, parse_preset("avbottleneck"), data);
  std::vector<double> losses;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    losses.push_back(trainer.train_step(step).losses.total);
  }
  const auto window_mean = [&](std::size_t from) {
    double acc = 0.0;
    for (std::size_t i = from; i < from + 20; ++i) acc += losses[i];
    return acc / 20.0;
  };
  CHECK(window_mean(losses.size() - 20) < 0.9 * window_mean(0));
}

TEST_CASE("two runs with one seed produce identical trajectories") {
  const ExperimentConfig cfg = tiny_config();
  const std::vector<SyntheticSample> data = gen_xor_dataset(cfg.dataset);
  const auto run = [&]() {
    Trainer trainer(cfg, parse_preset("avc_avm_masegmv"), data);
    std::vector<std::string> records;
    for (std::size_t step = 1; step <= 6; ++step) {
      records.push_back(trainer.train_step(step).to_json().dump());
    }
    return records;
  };
  CHECK(run() == run());
}

TEST_CASE("prediction is a probability vector and ignores the mask ratio") {
  ExperimentConfig cfg = tiny_config();
  const std::vector<SyntheticSample> data = gen_xor_dataset(cfg.dataset);
  const AVTModel model = AVTModel::build(cfg, parse_preset("avc_avm_masegmv"));
  const std::vector<double> probs = predict(model, data[0]);
  REQUIRE(probs.size() == 2);
  CHECK(probs[0] + probs[1] == Approx(1.0).margin(1e-12));

  ExperimentConfig other = cfg;
  other.mask_ratio = 0.5;
  const AVTModel model2 = AVTModel::build(other, parse_preset("avc_avm_masegmv"));
  const std::vector<double> probs2 = predict(model2, data[0]);
  CHECK(probs == probs2);
}

TEST_CASE("untrained predictions are near uniform in expectation over seeds") {
  ExperimentConfig cfg = tiny_config();
  const std::vector<SyntheticSample> data = gen_xor_dataset(cfg.dataset);
  double mean_p0 = 0.0;
  const std::size_t seeds = 24;
  for (std::size_t s = 0; s < seeds; ++s) {
    cfg.seed = 100 + s;
    const AVTModel model = AVTModel::build(cfg, parse_preset("avbottleneck"));
    mean_p0 += predict(model, data[0])[0];
  }
  mean_p0 /= static_cast<double>(seeds);
  CHECK(mean_p0 == Approx(0.5).margin(0.1));
}

TEST_CASE("every ablation preset builds and takes a training step") {
  ExperimentConfig cfg = tiny_config();
  cfg.mask_ratio = 0.25;
  const std::vector<SyntheticSample> data = gen_xor_dataset(cfg.dataset);
  for (const std::string& name : all_presets()) {
    Trainer trainer(cfg, parse_preset(name), data);
    const StepRecord rec = trainer.train_step(1);
    CHECK(std::isfinite(rec.losses.total));
    const std::vector<double> probs = predict(trainer.model(), data[0]);
    CHECK(probs.size() == cfg.dataset.num_classes);
  }
}

TEST_CASE("the averaging baseline is an exact elementwise mean") {
  const ExperimentConfig cfg = tiny_config();
  const std::vector<SyntheticSample> data = gen_xor_dataset(cfg.dataset);
  const AVTModel audio_model = AVTModel::build(cfg, parse_preset("audio_only"));
  const AVTModel video_model = AVTModel::build(cfg, parse_preset("video_only"));
  const AVTModel avg_model = AVTModel::build(cfg, parse_preset("avg"));
  for (std::size_t i = 0; i < 4; ++i) {
    const auto pa = predict(audio_model, data[i]);
    const auto pv = predict(video_model, data[i]);
    const auto pm = predict(avg_model, data[i]);
    for (std::size_t c = 0; c < pm.size(); ++c) {
      CHECK(pm[c] == 0.5 * (pa[c] + pv[c]));
    }
  }
}

TEST_CASE("checkpoints round-trip to bit-identical predictions") {
  const ExperimentConfig cfg = tiny_config();
  const std::vector<SyntheticSample> data = gen_xor_dataset(cfg.dataset);
  Trainer trainer(cfg, parse_preset("avc_avm_masegmv"), data);
  for (std::size_t step = 1; step <= 3; ++step) trainer.train_step(step);

  const auto dir = fresh_dir("ckpt");
  const std::string path = (dir / "model.checkpoint.json").string();
  save_checkpoint(trainer.model(), trainer.optimizer(), 3, path);
  const LoadedCheckpoint ck = load_checkpoint(path);
  CHECK(ck.step == 3);
  CHECK(ck.model.preset.name == "avc_avm_masegmv");
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(predict(trainer.model(), data[i]) == predict(ck.model, data[i]));
  }
}

TEST_CASE("resuming from a checkpoint matches an uninterrupted run") {
  ExperimentConfig cfg = tiny_config();
  cfg.steps = 10;
  const std::vector<SyntheticSample> data = gen_xor_dataset(cfg.dataset);

  Trainer straight(cfg, parse_preset("avbottleneck"), data);
  for (std::size_t step = 1; step <= 10; ++step) straight.train_step(step);

  Trainer first_leg(cfg, parse_preset("avbottleneck"), data);
  for (std::size_t step = 1; step <= 6; ++step) first_leg.train_step(step);
  const auto dir = fresh_dir("resume");
  const std::string path = (dir / "leg.checkpoint.json").string();
  save_checkpoint(first_leg.model(), first_leg.optimizer(), 6, path);

  Trainer resumed(load_checkpoint(path), data);
  CHECK(resumed.start_step() == 6);
  for (std::size_t step = 7; step <= 10; ++step) resumed.train_step(step);

  auto a = straight.model().named_params();
  auto b = resumed.model().named_params();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second.data() == b[i].second.data());
  }
}

TEST_CASE("a poisoned weight aborts training with a diagnostic") {
  const ExperimentConfig cfg = tiny_config();
  const std::vector<SyntheticSample> data = gen_xor_dataset(cfg.dataset);
  Trainer trainer(cfg, parse_preset("avbottleneck"), data);
  trainer.model().cls_head.weight[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(trainer.train_step(1), ContractError);
}

TEST_CASE("run_experiment writes metrics, checkpoints and a summary deterministically") {
  ExperimentConfig cfg = tiny_config();
  cfg.steps = 4;
  cfg.eval_interval = 2;
  cfg.presets = {"audio_only", "avbottleneck"};

  const auto dir1 = fresh_dir("exp1");
  cfg.out_dir = dir1.string();
  const nlohmann::json s1 = run_experiment(cfg);
  std::map<std::string, std::string> first_bytes;
  for (const std::string preset : {"audio_only", "avbottleneck"}) {
    for (const std::string suffix : {".metrics.jsonl", ".checkpoint.json"}) {
      REQUIRE(std::filesystem::exists(dir1 / (preset + suffix)));
      first_bytes[preset + suffix] = slurp(dir1 / (preset + suffix));
    }
  }
  const std::string summary_before = slurp(dir1 / "summary.json");

  // identical config and seed: the rerun must reproduce every file byte for byte
  std::filesystem::remove_all(dir1);
  const nlohmann::json s2 = run_experiment(cfg);
  for (const auto& [name, bytes] : first_bytes) CHECK(slurp(dir1 / name) == bytes);
  CHECK(slurp(dir1 / "summary.json") == summary_before);
  CHECK(s1["presets"] == s2["presets"]);

  // metrics lines carry the documented keys
  std::istringstream lines(slurp(dir1 / "avbottleneck.metrics.jsonl"));
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    const nlohmann::json rec = nlohmann::json::parse(line);
    for (const char* key : {"step", "L_cls_av", "L_avc", "L_avm", "L_masegmv", "L_total"}) {
      CHECK(rec.contains(key));
    }
    ++count;
  }
  CHECK(count == 4);
}

TEST_CASE("dataset spec files reject unknown keys") {
  const auto dir = fresh_dir("dataspec");
  const std::string path = (dir / "data.json").string();
  {
    std::ofstream out(path);
    out << R"({"dataset_size": 12, "dataset_seed": 4, "typo_key": 1})";
  }
  CHECK_THROWS_WITH(load_dataset_spec_file(path), Catch::Contains("typo_key"));
}
