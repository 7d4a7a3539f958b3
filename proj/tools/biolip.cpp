// biolip: command-line front end for the lip-kinematics deepfake detector.
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "biolip/biolip.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace biolip;

namespace {

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, path.string() + ": " + e.what());
  }
}

/// Feature, model, training and region-map settings resolved from one config file.
struct PipelineConfig {
  FeatureConfig features;
  ModelConfig model;
  TrainConfig train;
  RegionMap region_map = RegionMap::default_map();
  std::size_t min_valid_run = 25;

  json echo() const {
    return {{"features", feature_config_json(features)},
            {"model", model.to_json()},
            {"train", train.to_json()},
            {"region_map", region_map.to_json()},
            {"min_valid_run", min_valid_run}};
  }
};

PipelineConfig load_pipeline(const std::string& config_path, const std::string& region_map_path) {
  const json j = config_path.empty() ? json::object() : load_json_file(config_path);
  if (!j.is_object()) throw Error(Errc::invalid_config, "config must be a JSON object");
  PipelineConfig p;
  try {
    if (j.contains("features")) p.features = feature_config_from_json(j["features"]);
    json model = ModelConfig::for_features(p.features).to_json();
    if (j.contains("model")) model.merge_patch(j["model"]);
    p.model = ModelConfig::from_json(model);
    if (j.contains("train")) p.train = TrainConfig::from_json(j["train"]);
    if (j.contains("region_map")) {
      const auto& r = j["region_map"];
      p.region_map = r.is_string() ? RegionMap::load((fs::path(config_path).parent_path() / r.get<std::string>()).string())
                                   : RegionMap::from_json(r);
    }
    p.min_valid_run = j.value("min_valid_run", p.min_valid_run);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, std::string("config: ") + e.what());
  }
  if (!region_map_path.empty()) p.region_map = RegionMap::load(region_map_path);
  if (p.model.input_dim != static_cast<Index>(p.features.dim()) ||
      p.model.window_len != static_cast<Index>(p.features.window_len))
    throw Error(Errc::invalid_config, "model input_dim/window_len disagree with the feature config");
  return p;
}

/// Loads a dataset, reporting rejections, malformed lines and non-25 fps sequences on stderr.
LoadedDataset load_reported(const std::string& path, const RegionMap& rm, std::size_t min_run, RunManifest& m,
                            const std::string& role) {
  LoadedDataset d = load_dataset(path, rm, min_run);
  m.inputs.push_back(path);
  json note = {{"sequences", d.sequences.size()},
               {"rejected", d.rejected.size()},
               {"malformed_lines", d.malformed_lines}};
  for (const auto& r : d.rejected) std::cerr << "warning: rejected " << r.path << ": " << r.reason << "\n";
  if (d.malformed_lines) std::cerr << "warning: " << d.malformed_lines << " malformed lines skipped in " << path << "\n";
  json odd = json::array();
  for (const auto& s : d.sequences)
    if (s.nonstandard_fps()) odd.push_back(s.video_id);
  if (!odd.empty()) {
    std::cerr << "warning: " << odd.size() << " sequences in " << path
              << " are not 25 fps; windows still span 25 frames\n";
    note["nonstandard_fps"] = odd;
  }
  m.notes[role] = note;
  if (d.sequences.empty()) throw Error(Errc::sequence_rejected, "no usable sequences in " + path);
  return d;
}

fs::path manifest_for_file(const fs::path& out, const std::string& override_path) {
  return override_path.empty() ? fs::path(out.string() + ".manifest.ndjson") : fs::path(override_path);
}

fs::path manifest_for_dir(const fs::path& dir, const std::string& override_path) {
  return override_path.empty() ? dir / "run_manifest.ndjson" : fs::path(override_path);
}

RunManifest start_manifest(const std::string& command, int argc, char** argv) {
  RunManifest m;
  m.command = command;
  for (int i = 0; i < argc; ++i) m.argv.emplace_back(argv[i]);
  return m;
}

std::string auc_cell(std::optional<double> v) { return v ? fmt_double(*v) : std::string("nan"); }

// ---------------------------------------------------------------------------

struct SynthOptions {
  std::string config, out, manifest;
  std::optional<std::size_t> n_real, n_fake;
  std::optional<std::uint64_t> seed;
};

int run_synth(const SynthOptions& o, RunManifest m) {
  const json j = o.config.empty() ? json::object() : load_json_file(o.config);
  SynthConfig cfg = SynthConfig::from_json(j);
  if (o.seed) cfg.seed = *o.seed;
  std::size_t n_real = o.n_real.value_or(j.value("n_real", std::size_t{200}));
  std::size_t n_fake = o.n_fake.value_or(j.value("n_fake", std::size_t{200}));
  const auto paths = gen_dataset(cfg, n_real, n_fake, cfg.seed, o.out);
  m.config = cfg.to_json();
  m.config["n_real"] = n_real;
  m.config["n_fake"] = n_fake;
  m.seed = cfg.seed;
  if (!o.config.empty()) m.inputs.push_back(o.config);
  m.outputs.push_back(o.out);
  m.notes["files"] = paths.size();
  append_manifest(manifest_for_dir(o.out, o.manifest), m);
  std::cout << "wrote " << paths.size() << " sequences to " << o.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ExtractOptions {
  std::string in, out, config, region_map, index, manifest;
};

int run_extract(const ExtractOptions& o, RunManifest m) {
  const PipelineConfig p = load_pipeline(o.config, o.region_map);
  const auto data = load_reported(o.in, p.region_map, p.min_valid_run, m, "input");
  const fs::path index = o.index.empty() ? fs::path(o.out + ".index.csv") : fs::path(o.index);
  std::vector<std::size_t> counts;
  std::size_t total = 0;
  write_atomic(
      o.out,
      [&](std::ostream& out) {
        write_feature_cache_header(out, p.features);
        for (std::size_t v = 0; v < data.sequences.size(); ++v) {
          const auto feats = extract_features(data.sequences[v], p.features, p.region_map);
          for (const auto& f : feats) write_feature_cache_record(out, static_cast<std::uint32_t>(v), f);
          counts.push_back(feats.size());
          total += feats.size();
        }
      },
      true);
  write_atomic(index, [&](std::ostream& out) {
    out << csv_row({"video_index", "video_id", "label", "generator_tag", "n_windows"});
    for (std::size_t v = 0; v < data.sequences.size(); ++v) {
      const auto& s = data.sequences[v];
      out << csv_row({std::to_string(v), s.video_id, s.label ? std::to_string(*s.label) : "",
                      s.generator_tag.value_or(""), std::to_string(counts[v])});
    }
  });
  m.config = p.echo();
  m.outputs = {o.out, index.string()};
  m.notes["windows"] = total;
  append_manifest(manifest_for_file(o.out, o.manifest), m);
  std::cout << "wrote " << total << " windows from " << data.sequences.size() << " sequences to " << o.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string train, val, config, region_map, out, history, manifest;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

int run_train(const TrainOptions& o, RunManifest m) {
  PipelineConfig p = load_pipeline(o.config, o.region_map);
  if (o.seed) p.train.seed = *o.seed;
  if (o.epochs) {
    p.train.epochs = *o.epochs;
    if (p.train.patience > p.train.epochs) p.train.patience = p.train.epochs;
  }
  p.train.validate();
  const auto train_data = load_reported(o.train, p.region_map, p.min_valid_run, m, "train");
  std::optional<LoadedDataset> val_data;
  if (!o.val.empty()) {
    val_data = load_reported(o.val, p.region_map, p.min_valid_run, m, "val");
  } else {
    std::cerr << "warning: no --val split given; validating on the training set, so early stopping and the "
                 "selected checkpoint are optimistic\n";
    m.notes["val"] = "training set reused";
  }
  const WindowSet train_ws(train_data.sequences, p.features, p.region_map);
  const WindowSet val_ws(val_data ? val_data->sequences : train_data.sequences, p.features, p.region_map);

  const auto result = train(train_ws, val_ws, p.model, p.train, [&](const EpochRecord& r) {
    if (!o.quiet)
      std::fprintf(stderr, "epoch %3d  loss %.6f  val_auc %.6f  lr %.3e\n", r.epoch, r.loss, r.val_auc, r.lr);
  });

  Checkpoint ckpt;
  ckpt.model = p.model;
  ckpt.features = p.features;
  ckpt.region_map = p.region_map;
  ckpt.train = p.train;
  ckpt.params = result.best;
  ckpt.state = result.best_state;
  save_checkpoint(o.out, ckpt);

  const fs::path history = o.history.empty() ? fs::path(o.out + ".history.csv") : fs::path(o.history);
  write_atomic(history, [&](std::ostream& out) {
    out << csv_row({"epoch", "loss", "val_auc", "lr"});
    for (const auto& r : result.history.epochs)
      out << csv_row({std::to_string(r.epoch), fmt_double(r.loss), fmt_double(r.val_auc), fmt_double(r.lr)});
  });

  m.config = p.echo();
  m.seed = p.train.seed;
  m.outputs = {o.out, history.string()};
  m.notes["best_epoch"] = result.history.best_epoch;
  m.notes["best_val_auc"] = result.best_state.best_auc;
  m.notes["epochs_run"] = result.history.epochs.size();
  m.notes["pos_weight"] = result.history.pos_weight;
  m.notes["train_windows"] = train_ws.size();
  append_manifest(manifest_for_file(o.out, o.manifest), m);
  std::cout << "best epoch " << result.history.best_epoch << " val_auc " << fmt_double(result.best_state.best_auc)
            << " -> " << o.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string ckpt, data, report, scores, manifest;
  std::optional<std::size_t> min_run;
};

int run_eval(const EvalOptions& o, RunManifest m) {
  const Checkpoint ckpt = load_checkpoint(o.ckpt);
  m.inputs.push_back(o.ckpt);
  const auto data = load_reported(o.data, ckpt.region_map, o.min_run.value_or(25), m, "data");
  const WindowSet ws(data.sequences, ckpt.features, ckpt.region_map);
  const auto videos = score_videos(ckpt.model, ckpt.params, ws);
  if (videos.size() < data.sequences.size())
    std::cerr << "warning: " << data.sequences.size() - videos.size() << " sequences yield no window\n";
  const EvalReport report = evaluate(videos);

  // Language scope: videos whose header carries a "language" field.
  std::map<std::string, std::vector<const ScoredVideo*>> by_language;
  std::map<std::string, std::string> language_of;
  for (const auto& s : data.sequences)
    if (s.extra.contains("language") && s.extra["language"].is_string())
      language_of[s.video_id] = s.extra["language"].get<std::string>();
  for (const auto& v : videos)
    if (auto it = language_of.find(v.video_id); it != language_of.end()) by_language[it->second].push_back(&v);

  write_atomic(o.report, [&](std::ostream& out) {
    out << csv_row({"scope", "tag", "n_videos", "auc"});
    out << csv_row({"overall", "all", std::to_string(report.n_videos), fmt_double(report.overall_auc)});
    for (const auto& [tag, r] : report.per_generator)
      out << csv_row({"generator", tag, std::to_string(r.first), fmt_double(r.second)});
    if (report.mean_generator_auc)
      out << csv_row({"generator_mean", "all", std::to_string(report.per_generator.size()),
                      fmt_double(*report.mean_generator_auc)});
    for (const auto& [lang, vids] : by_language) {
      std::optional<double> auc;
      try {
        auc = videos_auc(vids);
      } catch (const Error&) {
        std::cerr << "warning: language " << lang << " holds one class; AUC undefined\n";
      }
      out << csv_row({"language", lang, std::to_string(vids.size()), auc_cell(auc)});
    }
  });
  m.outputs.push_back(o.report);
  if (!o.scores.empty()) {
    write_atomic(o.scores, [&](std::ostream& out) {
      out << csv_row({"video_id", "label", "generator_tag", "n_windows", "score"});
      for (const auto& v : videos)
        out << csv_row({v.video_id, std::to_string(v.label), v.generator_tag.value_or(""),
                        std::to_string(v.window_logits.size()), fmt_double(v.score)});
    });
    m.outputs.push_back(o.scores);
  }
  m.config = config_echo(ckpt);
  m.notes["overall_auc"] = report.overall_auc;
  append_manifest(manifest_for_file(o.report, o.manifest), m);
  std::cout << "videos " << report.n_videos << "  auc " << fmt_double(report.overall_auc) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct PerturbOptions {
  std::string kind = "noise", drop_mode = "hold_last", in, out, region_map, manifest;
  double sigma = 0.0, rate = 0.0;
  std::uint64_t seed = 42;
  std::size_t min_run = 25;
};

int run_perturb(const PerturbOptions& o, RunManifest m) {
  PerturbSpec spec;
  spec.kind = o.kind == "noise" ? PerturbSpec::Kind::noise : PerturbSpec::Kind::frame_drop;
  spec.sigma = o.sigma;
  spec.rate = o.rate;
  spec.drop_mode = o.drop_mode == "delete" ? DropMode::remove : DropMode::hold_last;
  spec.seed = o.seed;
  spec.validate();
  const RegionMap rm = o.region_map.empty() ? RegionMap::default_map() : RegionMap::load(o.region_map);

  std::size_t written = 0;
  json rejected = json::array();
  for (const auto& path : input_files(o.in)) {
    NormalizedSequence seq;
    try {
      seq = filter_sequence(read_trajectory(path), rm, o.min_run);
    } catch (const Error& e) {
      if (e.code() == Errc::io_failure || e.code() == Errc::invalid_config) throw;
      std::cerr << "warning: rejected " << path.string() << ": " << e.what() << "\n";
      rejected.push_back(path.string());
      continue;
    }
    const auto perturbed = apply_perturbation(seq, spec);
    write_atomic(fs::path(o.out) / path.filename(),
                 [&](std::ostream& out) { write_trajectory_file(out, to_trajectory(perturbed)); });
    ++written;
  }
  m.config = spec.provenance();
  m.config["min_valid_run"] = o.min_run;
  m.config["region_map"] = rm.to_json();
  m.seed = o.seed;
  m.inputs.push_back(o.in);
  m.outputs.push_back(o.out);
  m.notes = {{"written", written}, {"rejected", rejected}};
  append_manifest(manifest_for_dir(o.out, o.manifest), m);
  std::cout << "wrote " << written << " perturbed sequences to " << o.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct StatsOptions {
  std::string data, config, region_map, report, psd, axis = "y", manifest;
};

int run_stats(const StatsOptions& o, RunManifest m) {
  const PipelineConfig p = load_pipeline(o.config, o.region_map);
  const auto data = load_reported(o.data, p.region_map, p.min_valid_run, m, "data");
  const WindowSet ws(data.sequences, p.features, p.region_map);
  const auto reports = kinematic_reports(ws);
  write_atomic(o.report, [&](std::ostream& out) {
    out << csv_row({"name", "n_fake", "n_real", "mean_fake", "std_fake", "mean_real", "std_real", "cohens_d",
                    "u_fake", "p_mann_whitney", "f", "p_anova", "delta_percent"});
    for (const auto& r : reports)
      out << csv_row({r.name, std::to_string(r.n_fake), std::to_string(r.n_real), fmt_double(r.mean_fake),
                      fmt_double(r.std_fake), fmt_double(r.mean_real), fmt_double(r.std_real), fmt_double(r.cohens_d),
                      fmt_double(r.u_fake), fmt_double(r.p_mann_whitney), fmt_double(r.f), fmt_double(r.p_anova),
                      fmt_double(r.delta_percent)});
  });
  m.outputs.push_back(o.report);
  if (!o.psd.empty()) {
    const int axis = o.axis == "x" ? axis_x : o.axis == "z" ? axis_z : axis_y;
    const auto spectra = class_psd(data.sequences, axis);
    write_atomic(o.psd, [&](std::ostream& out) {
      out << csv_row({"frequency", "power_real", "power_fake"});
      for (std::size_t i = 0; i < spectra.real.frequency.size(); ++i)
        out << csv_row({fmt_double(spectra.real.frequency[i]), fmt_double(spectra.real.power[i]),
                        fmt_double(spectra.fake.power[i])});
    });
    m.outputs.push_back(o.psd);
    m.notes["psd"] = {{"axis", o.axis},
                      {"n_real", spectra.n_real},
                      {"n_fake", spectra.n_fake},
                      {"band_1_8_real", band_energy(spectra.real, 1.0, 8.0)},
                      {"band_1_8_fake", band_energy(spectra.fake, 1.0, 8.0)}};
  }
  m.config = p.echo();
  append_manifest(manifest_for_file(o.report, o.manifest), m);
  for (const auto& r : reports)
    std::printf("%-20s d=%+.4f  p_mw=%.3g  F=%.4g\n", r.name.c_str(), r.cohens_d, r.p_mann_whitney, r.f);
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchOptions {
  std::string ckpt, report, manifest;
  BenchConfig bench;
};

int run_bench(const BenchOptions& o, RunManifest m) {
  Checkpoint ckpt;
  if (!o.ckpt.empty()) {
    ckpt = load_checkpoint(o.ckpt);
    m.inputs.push_back(o.ckpt);
  } else {
    ckpt.model = ModelConfig::for_features(ckpt.features);
    ckpt.params = init_params(ckpt.model, o.bench.seed);
  }
  const BenchResult r = bench_forward(ckpt.model, ckpt.params, ckpt.features, ckpt.region_map, o.bench);
  const std::vector<std::string> header = {"mode",   "warmup",  "iterations",   "mean_ms",
                                           "p50_ms", "p99_ms",  "rss_start_kb", "rss_end_kb"};
  const std::vector<std::string> row = {o.bench.with_features ? "with_features" : "classifier",
                                        std::to_string(o.bench.warmup),
                                        std::to_string(r.iterations),
                                        fmt_double(r.mean_ms),
                                        fmt_double(r.p50_ms),
                                        fmt_double(r.p99_ms),
                                        std::to_string(r.rss_start_kb),
                                        std::to_string(r.rss_end_kb)};
  std::cout << csv_row(header) << csv_row(row);
  m.config = config_echo(ckpt);
  m.config["bench"] = {{"warmup", o.bench.warmup},
                       {"iterations", o.bench.iterations},
                       {"with_features", o.bench.with_features}};
  m.seed = o.bench.seed;
  m.notes = {{"mean_ms", r.mean_ms}, {"p50_ms", r.p50_ms}, {"p99_ms", r.p99_ms}, {"checksum", r.checksum}};
  if (!o.report.empty()) {
    write_atomic(o.report, [&](std::ostream& out) { out << csv_row(header) << csv_row(row); });
    m.outputs.push_back(o.report);
    append_manifest(manifest_for_file(o.report, o.manifest), m);
  } else if (!o.manifest.empty()) {
    append_manifest(o.manifest, m);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"biolip: lip-kinematics deepfake detection toolkit"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", kToolVersion);
  const std::set<std::string> axes = {"x", "y", "z"};

  SynthOptions so;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic smooth/jittery Landmark JSONL dataset");
  synth->add_option("--config", so.config, "SynthConfig JSON (may also hold n_real, n_fake)")->check(CLI::ExistingFile);
  synth->add_option("--out", so.out, "Output directory")->required();
  synth->add_option("--n-real", so.n_real, "Smooth sequences (default 200)");
  synth->add_option("--n-fake", so.n_fake, "Jittery sequences (default 200)");
  synth->add_option("--seed", so.seed, "Overrides the config seed");
  synth->add_option("--manifest", so.manifest, "Manifest file (default <out>/run_manifest.ndjson)");

  ExtractOptions eo;
  auto* extract = app.add_subcommand("extract", "Compute window features into a binary feature cache");
  extract->add_option("--in", eo.in, "Landmark JSONL directory, file or split list")->required()->check(CLI::ExistingPath);
  extract->add_option("--out", eo.out, "Feature cache file")->required();
  extract->add_option("--config", eo.config, "Pipeline config JSON")->check(CLI::ExistingFile);
  extract->add_option("--region-map", eo.region_map, "Region map JSON")->check(CLI::ExistingFile);
  extract->add_option("--index", eo.index, "Video index CSV (default <out>.index.csv)");
  extract->add_option("--manifest", eo.manifest, "Manifest file (default <out>.manifest.ndjson)");

  TrainOptions to;
  auto* trn = app.add_subcommand("train", "Train the classifier; writes the best-validation checkpoint");
  trn->add_option("--train", to.train, "Training JSONL directory, file or split list")->required()->check(CLI::ExistingPath);
  trn->add_option("--val", to.val, "Validation JSONL directory, file or split list")->check(CLI::ExistingPath);
  trn->add_option("--config", to.config, "Pipeline config JSON")->check(CLI::ExistingFile);
  trn->add_option("--region-map", to.region_map, "Region map JSON")->check(CLI::ExistingFile);
  trn->add_option("--out", to.out, "Checkpoint file")->required();
  trn->add_option("--history", to.history, "History CSV (default <out>.history.csv)");
  trn->add_option("--epochs", to.epochs, "Overrides train.epochs (patience is clamped to it)")->check(CLI::PositiveNumber);
  trn->add_option("--seed", to.seed, "Overrides train.seed");
  trn->add_flag("--quiet", to.quiet, "No per-epoch progress");
  trn->add_option("--manifest", to.manifest, "Manifest file (default <out>.manifest.ndjson)");

  EvalOptions vo;
  auto* ev = app.add_subcommand("eval", "Score videos and report overall, per-generator and per-language AUC");
  ev->add_option("--ckpt", vo.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", vo.data, "Landmark JSONL directory, file or split list")->required()->check(CLI::ExistingPath);
  ev->add_option("--report", vo.report, "AUC report CSV (scope,tag,n_videos,auc)")->required();
  ev->add_option("--scores", vo.scores, "Per-video score CSV");
  ev->add_option("--min-run", vo.min_run, "Minimum contiguous valid run (default 25)");
  ev->add_option("--manifest", vo.manifest, "Manifest file (default <report>.manifest.ndjson)");

  PerturbOptions po;
  auto* pert = app.add_subcommand("perturb", "Inject landmark noise or drop frames; writes Landmark JSONL");
  pert->add_option("--kind", po.kind, "noise | frame_drop")->required()->check(CLI::IsMember({"noise", "frame_drop"}));
  pert->add_option("--sigma", po.sigma, "Noise std in normalized units")->check(CLI::NonNegativeNumber);
  pert->add_option("--rate", po.rate, "Frame drop probability in [0, 1)")->check(CLI::Range(0.0, 1.0));
  pert->add_option("--drop-mode", po.drop_mode, "hold_last | delete")->check(CLI::IsMember({"hold_last", "delete"}));
  pert->add_option("--in", po.in, "Input JSONL directory, file or split list")->required()->check(CLI::ExistingPath);
  pert->add_option("--out", po.out, "Output directory")->required();
  pert->add_option("--seed", po.seed, "Base seed, mixed with each video id");
  pert->add_option("--region-map", po.region_map, "Region map JSON")->check(CLI::ExistingFile);
  pert->add_option("--min-run", po.min_run, "Minimum contiguous valid run (default 25)");
  pert->add_option("--manifest", po.manifest, "Manifest file (default <out>/run_manifest.ndjson)");

  StatsOptions sto;
  auto* st = app.add_subcommand("stats", "Real-vs-fake kinematic statistics and class PSD");
  st->add_option("--data", sto.data, "Landmark JSONL directory, file or split list")->required()->check(CLI::ExistingPath);
  st->add_option("--config", sto.config, "Pipeline config JSON")->check(CLI::ExistingFile);
  st->add_option("--region-map", sto.region_map, "Region map JSON")->check(CLI::ExistingFile);
  st->add_option("--report", sto.report, "StatReport CSV")->required();
  st->add_option("--psd", sto.psd, "Class-mean PSD CSV (frequency, power_real, power_fake)");
  st->add_option("--axis", sto.axis, "PSD axis: x | y | z")->check(CLI::IsMember(axes));
  st->add_option("--manifest", sto.manifest, "Manifest file (default <report>.manifest.ndjson)");

  BenchOptions bo;
  auto* bench = app.add_subcommand("bench", "Single-window eval forward latency (mean/p50/p99 ms) and RSS");
  bench->add_option("--ckpt", bo.ckpt, "Checkpoint (default: freshly initialized default model)")->check(CLI::ExistingFile);
  bench->add_option("--warmup", bo.bench.warmup, "Untimed forwards (default 100)");
  bench->add_option("--iters", bo.bench.iterations, "Timed forwards (default 10000)")->check(CLI::PositiveNumber);
  bench->add_flag("--with-features", bo.bench.with_features, "Include kinematic feature extraction per call");
  bench->add_option("--seed", bo.bench.seed, "Seed of the synthetic input window and default model");
  bench->add_option("--report", bo.report, "Latency CSV");
  bench->add_option("--manifest", bo.manifest, "Manifest file (default <report>.manifest.ndjson)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (pert->parsed()) {
    if (po.kind == "noise" && pert->count("--rate")) {
      std::cerr << "usage: --rate applies to --kind frame_drop only\n" << pert->help();
      return 2;
    }
    if (po.kind == "frame_drop" && pert->count("--sigma")) {
      std::cerr << "usage: --sigma applies to --kind noise only\n" << pert->help();
      return 2;
    }
  }

  try {
    if (synth->parsed()) return run_synth(so, start_manifest("synth", argc, argv));
    if (extract->parsed()) return run_extract(eo, start_manifest("extract", argc, argv));
    if (trn->parsed()) return run_train(to, start_manifest("train", argc, argv));
    if (ev->parsed()) return run_eval(vo, start_manifest("eval", argc, argv));
    if (pert->parsed()) return run_perturb(po, start_manifest("perturb", argc, argv));
    if (st->parsed()) return run_stats(sto, start_manifest("stats", argc, argv));
    if (bench->parsed()) return run_bench(bo, start_manifest("bench", argc, argv));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
