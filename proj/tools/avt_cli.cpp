// SPDX-License-Identifier: Apache-2.0
//
// avt command-line interface: train, eval, segment, complexity, gradcheck.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "avt/avt.hpp"

namespace {

// AVT_SEED overrides the configured global seed.
bool seed_override(std::uint64_t& seed_out) {
  const char* env = std::getenv("AVT_SEED");
  if (env == nullptr || *env == '\0') return false;
  try {
    seed_out = std::stoull(env);
  } catch (const std::exception&) {
    throw avt::ConfigError(std::string("AVT_SEED is not an unsigned integer: ") + env);
  }
  return true;
}

// Grid syntax: "M=100,N=100,L=4,K=1"; each value may be a ':'-separated list,
// e.g. "M=16:32,N=16,L=2:4,K=1"; rows are the cross product.
std::vector<avt::complexity::ComplexityConfig> parse_grid(const std::string& grid,
                                                          std::size_t dim, bool include_cls) {
  std::vector<std::size_t> ms, ns, ls, ks;
  std::stringstream ss(grid);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const std::size_t eq = part.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= part.size()) {
      throw avt::ConfigError("bad grid entry '" + part + "' (expected KEY=V or KEY=V1:V2)");
    }
    const std::string key = part.substr(0, eq);
    std::vector<std::size_t>* target = nullptr;
    if (key == "M") target = &ms;
    else if (key == "N") target = &ns;
    else if (key == "L") target = &ls;
    else if (key == "K") target = &ks;
    else throw avt::ConfigError("unknown grid key '" + key + "' (expected M, N, L or K)");
    std::stringstream vs(part.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ':')) target->push_back(std::stoull(v));
  }
  if (ms.empty() || ns.empty() || ls.empty() || ks.empty()) {
    throw avt::ConfigError("grid must set all of M, N, L, K");
  }
  std::vector<avt::complexity::ComplexityConfig> rows;
  for (std::size_t m : ms)
    for (std::size_t n : ns)
      for (std::size_t l : ls)
        for (std::size_t k : ks) rows.push_back({m, n, l, k, dim, include_cls});
  return rows;
}

int cmd_train(const std::string& config_path, const std::string& resume_path,
              std::size_t steps_override) {
  if (!resume_path.empty()) {
    avt::harness::LoadedCheckpoint ck = avt::harness::load_checkpoint(resume_path);
    avt::harness::ExperimentConfig cfg = ck.model.cfg;
    if (steps_override > 0) cfg.steps = steps_override;
    if (ck.step >= cfg.steps) {
      std::cerr << "[avt] checkpoint already at step " << ck.step << ", nothing to do\n";
      return 0;
    }
    ck.model.cfg = cfg;
    const std::vector<avt::harness::SyntheticSample> data = avt::harness::gen_xor_dataset(cfg.dataset);
    const std::string name = ck.model.preset.name;
    avt::harness::Trainer trainer(std::move(ck), data);
    std::filesystem::create_directories(cfg.out_dir);
    const std::string base = cfg.out_dir + "/" + name;
    const avt::harness::PresetResult res =
        avt::harness::run_preset(trainer, base + ".metrics.jsonl", base + ".checkpoint.json");
    std::cerr << "[avt] resumed preset " << res.name << " to step " << res.steps << ", val_acc "
              << res.final_val_acc << "\n";
    return 0;
  }
  avt::harness::ExperimentConfig cfg = avt::harness::load_config_file(config_path);
  std::uint64_t seed = 0;
  if (seed_override(seed)) cfg.seed = seed;
  const nlohmann::json summary = avt::harness::run_experiment(cfg);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path) {
  const avt::harness::LoadedCheckpoint ck = avt::harness::load_checkpoint(checkpoint_path);
  const avt::harness::DatasetSpec spec = avt::harness::load_dataset_spec_file(data_path);
  const std::vector<avt::harness::SyntheticSample> data = avt::harness::gen_xor_dataset(spec);
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const double acc = avt::harness::evaluate_accuracy(ck.model, data, all);
  nlohmann::json out;
  out["preset"] = ck.model.preset.name;
  out["checkpoint_step"] = ck.step;
  out["n"] = data.size();
  out["accuracy"] = acc;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_segment(const std::string& input, std::size_t segments, std::size_t window,
                const std::string& output) {
  avt::encoders::SpectrogramInput spec;
  if (input == "-") {
    spec = avt::audioseg::read_spectrogram(std::cin);
  } else {
    spec = avt::audioseg::read_spectrogram_file(input);
  }
  const avt::audioseg::SegmentMap map =
      avt::audioseg::detect_segments(spec, segments, {window, 2});
  const nlohmann::json j = avt::audioseg::segment_map_to_json(map);
  if (output.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(output, std::ios::binary);
    if (!out) throw avt::ConfigError("cannot write output file: " + output);
    out << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_complexity(const std::vector<std::string>& grids, std::size_t dim, bool no_cls) {
  std::vector<avt::complexity::ComplexityConfig> rows;
  if (grids.empty()) {
    rows = avt::complexity::default_configs();
  } else {
    for (const std::string& g : grids) {
      const auto part = parse_grid(g, dim, !no_cls);
      rows.insert(rows.end(), part.begin(), part.end());
    }
  }
  std::cout << avt::complexity::report(rows);
  return 0;
}

int cmd_gradcheck(const std::string& loss, std::uint64_t base_seed, std::size_t num_seeds,
                  double h, double tol, std::size_t coords) {
  std::uint64_t seed = base_seed;
  seed_override(seed);
  std::vector<std::string> names;
  if (loss == "all") {
    names = avt::harness::audit_loss_names();
  } else {
    names.push_back(loss);
  }
  bool all_pass = true;
  for (const std::string& name : names) {
    for (std::size_t s = 0; s < num_seeds; ++s) {
      const avt::harness::AuditResult r =
          avt::harness::audit_loss_gradients(name, seed + s, h, tol, coords);
      std::cout << "loss=" << r.loss << " seed=" << r.seed << " coords=" << r.checked_coords
                << " max_rel_err=" << r.max_rel_error << (r.pass ? " PASS" : " FAIL") << "\n";
      all_pass = all_pass && r.pass;
    }
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"audio-video bottleneck transformer workbench"};
  app.require_subcommand(1);

  std::string config_path, resume_path;
  std::size_t steps_override = 0;
  CLI::App* train = app.add_subcommand("train", "train the configured ablation presets");
  train->add_option("--config", config_path, "experiment config JSON");
  train->add_option("--resume", resume_path, "checkpoint to resume from");
  train->add_option("--steps", steps_override, "override total steps when resuming");

  std::string checkpoint_path, data_path;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset spec");
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required();
  eval->add_option("--data", data_path, "dataset spec JSON")->required();

  std::string seg_input, seg_output;
  std::size_t seg_count = 50, seg_window = 5;
  CLI::App* segment = app.add_subcommand("segment", "detect audio activity segments");
  segment->add_option("--input", seg_input, "spectrogram matrix file ('-' for stdin)")->required();
  segment->add_option("--segments", seg_count, "number of segments (default 50)");
  segment->add_option("--window", seg_window, "smoothing window (odd, default 5)");
  segment->add_option("--output", seg_output, "output JSON path (default stdout)");

  std::vector<std::string> grids;
  std::size_t cx_dim = 32;
  bool cx_no_cls = false;
  CLI::App* complexity = app.add_subcommand("complexity", "attention cost accounting as CSV");
  complexity->add_option("--grid", grids,
                         "grid spec M=..,N=..,L=..,K=.. (values may be lists, e.g. M=16:32)");
  complexity->add_option("--dim", cx_dim, "embedding dim for MAC counts (default 32)");
  complexity->add_flag("--no-cls", cx_no_cls, "exclude CLS tokens (asymptotic form)");

  std::string gc_loss = "all";
  std::uint64_t gc_seed = 0;
  std::size_t gc_seeds = 5, gc_coords = 12;
  double gc_h = 1e-5, gc_tol = 1e-4;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gradcheck->add_option("--loss", gc_loss, "one of ce|avc|avm|mask|cls|hybrid|all")
      ->check(CLI::IsMember({"ce", "avc", "avm", "mask", "cls", "hybrid", "all"}));
  gradcheck->add_option("--seed", gc_seed, "base seed (default 0)");
  gradcheck->add_option("--seeds", gc_seeds, "number of seeds (default 5)");
  gradcheck->add_option("--fd-step", gc_h, "finite-difference step (default 1e-5)");
  gradcheck->add_option("--tol", gc_tol, "max relative error tolerance (default 1e-4)");
  gradcheck->add_option("--coords", gc_coords, "sampled coordinates per tensor, 0 = all");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      if (config_path.empty() && resume_path.empty()) {
        throw avt::ConfigError("train needs --config or --resume");
      }
      return cmd_train(config_path, resume_path, steps_override);
    }
    if (eval->parsed()) return cmd_eval(checkpoint_path, data_path);
    if (segment->parsed()) return cmd_segment(seg_input, seg_count, seg_window, seg_output);
    if (complexity->parsed()) return cmd_complexity(grids, cx_dim, cx_no_cls);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_loss, gc_seed, gc_seeds, gc_h, gc_tol, gc_coords);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
