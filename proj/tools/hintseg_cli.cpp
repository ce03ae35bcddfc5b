// hintseg: command-line front end for corpus generation, staged training,
// evaluation, ablation grids and plotting.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hintseg/ablation.hpp"
#include "hintseg/config.hpp"
#include "hintseg/corpus.hpp"
#include "hintseg/svg_plot.hpp"
#include "hintseg/training_pipeline.hpp"

namespace fs = std::filesystem;
using namespace hintseg;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string corpus_dir;
  std::string run_dir;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool needs_corpus = true, bool needs_run = true) {
  cmd->add_option("--config", o.config_path, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "random seed (overrides the config)");
  cmd->add_option("--set", o.overrides, "extra key=value assignment (repeatable)");
  if (needs_corpus) cmd->add_option("--corpus", o.corpus_dir, "corpus directory")->required()->check(CLI::ExistingDirectory);
  if (needs_run) cmd->add_option("--run", o.run_dir, "run directory")->required();
}

RunConfig resolve_config(const CommonOptions& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw config_error("--set expects key=value, got '" + kv + "'");
    cfg.set(config_detail::trim(kv.substr(0, eq)), kv.substr(eq + 1));
  }
  if (o.seed) cfg.set("seed", std::to_string(*o.seed));
  cfg.validate();
  return cfg;
}

nlohmann::json read_json_or_empty(const fs::path& p) {
  if (!fs::exists(p)) return nlohmann::json::object();
  std::ifstream is(p);
  return nlohmann::json::parse(is);
}

void merge_report(const fs::path& run, const nlohmann::json& update) {
  nlohmann::json j = read_json_or_empty(run / "report.json");
  for (auto it = update.begin(); it != update.end(); ++it) {
    if (it.key() == "epochs" && j.contains("epochs")) {
      for (const auto& e : it.value()) j["epochs"].push_back(e);
    } else {
      j[it.key()] = it.value();
    }
  }
  std::ofstream(run / "report.json") << j.dump(2) << "\n";
}

void append_losses(const fs::path& path, const RunReport& r, bool fresh) {
  if (fresh || !fs::exists(path)) {
    write_losses_csv(path.string(), r);
    return;
  }
  RunReport tmp;
  tmp.losses = r.losses;
  const fs::path part = path.string() + ".part";
  write_losses_csv(part.string(), tmp);
  std::ifstream in(part, std::ios::binary);
  std::string header;
  std::getline(in, header);
  std::ofstream out(path, std::ios::binary | std::ios::app);
  out << in.rdbuf();
  in.close();
  fs::remove(part);
}

void write_config_echo(const fs::path& run, const RunConfig& cfg) { std::ofstream(run / "config.txt") << cfg.to_text(); }

struct SynthOptions {
  std::string preset = "tiny", out, mode = "discriminative";
  std::uint64_t seed = 0;
  std::optional<double> contrast;
  std::optional<int> n_scenes, bg_distance;
  std::vector<double> radius_range;
  int ppo = 1;
};

int cmd_synth(const SynthOptions& o) {
  CorpusPreset p = corpus_preset(o.preset);
  if (o.contrast) p.contrast = *o.contrast;
  if (o.n_scenes) p.n_scenes = *o.n_scenes;
  if (o.bg_distance) p.bg_distance_d = *o.bg_distance;
  if (!o.radius_range.empty()) {
    if (o.radius_range.size() != 2) throw std::invalid_argument("--object-radius expects min,max");
    p.min_radius_frac = o.radius_range[0];
    p.max_radius_frac = o.radius_range[1];
  }
  p.annotation.mode = parse_annotation_kind(o.mode);
  p.annotation.points_per_object = o.ppo;
  const Corpus c = generate_corpus(p, o.seed);
  write_corpus(c, o.out);
  std::cout << "wrote " << c.size() << " scenes to " << o.out << "\n";
  return 0;
}

int cmd_warmup(const CommonOptions& o) {
  const RunConfig cfg = resolve_config(o);
  const fs::path run(o.run_dir);
  fs::create_directories(run / "checkpoints");
  write_config_echo(run, cfg);
  const auto items = prepare_corpus(read_corpus(o.corpus_dir, cfg.hint.d), cfg.input_size);
  RunReport rep;
  rep.config_text = cfg.to_text();
  ModelState model = warmup(items, cfg, rep);
  write_losses_csv((run / "losses.csv").string(), rep);
  nlohmann::json j = report_json(rep);
  if (rep.diverged) {
    save_checkpoint(model, (run / "checkpoints" / "last_good.ckpt").string());
    std::ofstream(run / "report.json") << j.dump(2) << "\n";
    std::cerr << "warm-up diverged: " << rep.diverged_reason << "\n";
    return 2;
  }
  save_checkpoint(model, (run / "checkpoints" / "warmup.ckpt").string());
  j["warmup_metrics"] = metrics_json(evaluate(items, model.net));
  std::ofstream(run / "report.json") << j.dump(2) << "\n";
  std::cout << "warm-up finished at epoch " << model.epoch << "\n";
  return 0;
}

int cmd_hints(const CommonOptions& o) {
  const RunConfig cfg = resolve_config(o);
  const fs::path run(o.run_dir);
  ModelState model = load_checkpoint((run / "checkpoints" / "warmup.ckpt").string());
  const auto items = prepare_corpus(read_corpus(o.corpus_dir, cfg.hint.d), cfg.input_size);
  RunReport rep;
  const auto hints = hint_stage(items, model, cfg, rep);
  write_hints((run / "hints").string(), items, hints, rep);
  save_checkpoint(model, (run / "checkpoints" / "hints.ckpt").string());
  nlohmann::json j = report_json(rep);
  merge_report(run, {{"hints", j["hints"]}, {"fallback_fraction", j["fallback_fraction"]}});
  std::cout << "hint stage: " << hints.size() << " images, fallback fraction " << rep.fallback_fraction() << "\n";
  return 0;
}

int cmd_train(const CommonOptions& o, int until_epoch) {
  const RunConfig cfg = resolve_config(o);
  const fs::path run(o.run_dir);
  const fs::path ck = run / "checkpoints";
  const bool resuming = fs::exists(ck / "main.ckpt");
  ModelState model = load_checkpoint((resuming ? ck / "main.ckpt" : ck / "hints.ckpt").string());
  if (model.stage == TrainingStage::Trained) {
    std::cout << "model is already trained (epoch " << model.epoch << ")\n";
    return 0;
  }
  const auto items = prepare_corpus(read_corpus(o.corpus_dir, cfg.hint.d), cfg.input_size);
  const auto hints = read_hints((run / "hints").string(), items);
  RunReport rep;
  rep.config_text = cfg.to_text();
  main_train(items, hints, model, cfg, rep, until_epoch);
  append_losses(run / "losses.csv", rep, false);
  if (rep.diverged) {
    save_checkpoint(model, (ck / "last_good.ckpt").string());
    merge_report(run, {{"diverged", true}, {"diverged_epoch", rep.diverged_epoch}, {"diverged_reason", rep.diverged_reason}});
    std::cerr << "training diverged: " << rep.diverged_reason << "\n";
    return 2;
  }
  save_checkpoint(model, (ck / (model.stage == TrainingStage::Trained ? "final.ckpt" : "main.ckpt")).string());
  if (model.stage == TrainingStage::Trained && fs::exists(ck / "main.ckpt")) fs::remove(ck / "main.ckpt");
  nlohmann::json j = report_json(rep);
  merge_report(run, {{"epochs", j["epochs"]}, {"diverged", false}});
  std::cout << "trained to epoch " << model.epoch << " (" << stage_name(model.stage) << ")\n";
  return 0;
}

int cmd_run(const CommonOptions& o) {
  const RunConfig cfg = resolve_config(o);
  fs::create_directories(o.run_dir);
  write_config_echo(o.run_dir, cfg);
  const auto items = prepare_corpus(read_corpus(o.corpus_dir, cfg.hint.d), cfg.input_size);
  const RunReport rep = run_pipeline(items, cfg, o.run_dir);
  if (rep.diverged) {
    std::cerr << "run diverged: " << rep.diverged_reason << "\n";
    return 2;
  }
  std::cout << "MAE " << rep.metrics->mae << "  S_m " << rep.metrics->s_measure << "  E_m " << rep.metrics->e_measure
            << "  F^w " << rep.metrics->f_w_beta << "  (" << rep.wall_seconds << " s)\n";
  return 0;
}

int cmd_eval(const CommonOptions& o, const std::string& checkpoint, const std::string& predictions) {
  const RunConfig cfg = resolve_config(o);
  const fs::path run(o.run_dir);
  fs::create_directories(run);
  const Corpus corpus = read_corpus(o.corpus_dir, cfg.hint.d);
  std::vector<std::pair<std::string, MetricReport>> rows;
  std::vector<MetricReport> all;
  if (!predictions.empty()) {
    for (const auto& it : corpus.items) {
      if (!it.scene.mask) throw std::invalid_argument("evaluation needs a mask for " + it.scene.id);
      const PredictionMap p = read_prediction_png((fs::path(predictions) / (it.scene.id + ".png")).string());
      rows.push_back({it.scene.id, evaluate_metrics(p, *it.scene.mask)});
      all.push_back(rows.back().second);
    }
  } else {
    const fs::path ck = checkpoint.empty() ? run / "checkpoints" / "final.ckpt" : fs::path(checkpoint);
    const ModelState model = load_checkpoint(ck.string());
    const auto items = prepare_corpus(corpus, cfg.input_size);
    fs::create_directories(run / "predictions");
    for (const auto& it : items) {
      const PredictionMap p = predict(model.net, it);
      write_prediction_png((run / "predictions" / (it.id + ".png")).string(), p);
      if (!it.mask) throw std::invalid_argument("evaluation needs a mask for " + it.id);
      rows.push_back({it.id, evaluate_metrics(p, *it.mask)});
      all.push_back(rows.back().second);
    }
  }
  write_metrics_csv((run / "metrics.csv").string(), rows);
  const MetricReport mean = corpus_mean(all);
  nlohmann::json summary = {{"n_images", rows.size()}, {"metrics", metrics_json(mean)}};
  std::ofstream(run / "eval.json") << summary.dump(2) << "\n";
  merge_report(run, {{"metrics", metrics_json(mean)}});
  std::cout << "MAE " << mean.mae << "  S_m " << mean.s_measure << "  E_m " << mean.e_measure << "  F^w " << mean.f_w_beta
            << "\n";
  return 0;
}

int cmd_ablate(const CommonOptions& o, const std::vector<std::string>& axes, const std::vector<std::uint64_t>& seeds) {
  const RunConfig cfg = resolve_config(o);
  std::vector<AblationAxis> grid;
  for (const auto& a : axes) grid.push_back(parse_ablation_axis(a));
  const auto items = prepare_corpus(read_corpus(o.corpus_dir, cfg.hint.d), cfg.input_size);
  const auto result = run_ablation(grid, items, cfg, seeds, [](const AblationCell& c, const AblationRun& r) {
    std::cout << c.label() << " seed " << r.seed << ": "
              << (!r.ok ? "error " + r.error : r.diverged ? std::string("diverged") : "MAE " + std::to_string(r.metrics.mae))
              << std::endl;
  });
  write_ablation_outputs(result, o.run_dir);
  for (const auto& c : result.cells)
    std::cout << c.label() << ": median MAE " << c.median(&MetricReport::mae) << ", var " << c.mae_variance()
              << (c.reference ? " [reference]" : "") << (c.flagged ? " FLAGGED " + c.flag_reason : "") << "\n";
  return 0;
}

int cmd_plot(const std::string& run_dir) {
  const fs::path run(run_dir);
  fs::create_directories(run / "plots");
  int written = 0;
  if (fs::exists(run / "losses.csv")) {
    std::ifstream is(run / "losses.csv");
    std::string line;
    std::getline(is, line);
    svg::Series pce{"l_pce", {}, {}}, lc{"l_c", {}, {}}, total{"total", {}, {}};
    while (std::getline(is, line)) {
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string tok;
      while (std::getline(ss, tok, ',')) f.push_back(tok);
      if (f.size() < 6) continue;
      const double step = std::stod(f[0]);
      pce.x.push_back(step);
      pce.y.push_back(std::stod(f[3]));
      lc.x.push_back(step);
      lc.y.push_back(std::stod(f[4]));
      total.x.push_back(step);
      total.y.push_back(std::stod(f[5]));
    }
    std::ofstream(run / "plots" / "losses.svg") << svg::line_chart("Training losses", {total, pce, lc}, "step", "loss");
    ++written;
  }
  if (fs::exists(run / "metrics.csv")) {
    std::ifstream is(run / "metrics.csv");
    std::string line;
    std::getline(is, line);
    std::vector<std::string> labels;
    std::vector<svg::Series> s{{"MAE", {}, {}}, {"S_m", {}, {}}, {"E_m", {}, {}}, {"F^w_b", {}, {}}};
    while (std::getline(is, line)) {
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string tok;
      while (std::getline(ss, tok, ',')) f.push_back(tok);
      if (f.size() < 5) continue;
      labels.push_back(f[0]);
      for (int k = 0; k < 4; ++k) s[k].y.push_back(std::stod(f[k + 1]));
    }
    std::ofstream(run / "plots" / "metrics.svg") << svg::bar_chart("Per-image metrics", labels, s, 960, 420);
    ++written;
  }
  if (written == 0) {
    std::cerr << "nothing to plot in " << run_dir << "\n";
    return 1;
  }
  std::cout << "wrote " << written << " plot(s) to " << (run / "plots").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hintseg: point-supervised camouflaged object segmentation"};
  app.require_subcommand(1);

  SynthOptions so;
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--preset", so.preset, "tiny or small")->check(CLI::IsMember({"tiny", "small"}));
  synth->add_option("--out", so.out, "output corpus directory")->required();
  synth->add_option("--seed", so.seed, "generation seed");
  synth->add_option("--contrast", so.contrast, "object tint strength in (0,1]");
  synth->add_option("--scenes", so.n_scenes, "override the preset's scene count");
  synth->add_option("--object-radius", so.radius_range, "object radius range as fractions of the side, min,max")
      ->delimiter(',')
      ->expected(2);
  synth->add_option("--bg-distance", so.bg_distance, "background click lies farther than 2x this from every object")
      ->check(CLI::PositiveNumber);
  synth->add_option("--annotation", so.mode, "discriminative, center or random")
      ->check(CLI::IsMember({"discriminative", "center", "random"}));
  synth->add_option("--points-per-object", so.ppo, "1, 2 or 3")->check(CLI::Range(1, 3));
  std::string synth_config;
  synth->add_option("--config", synth_config, "accepted for uniformity; unused");

  CommonOptions warm_o, hint_o, train_o, run_o, eval_o, abl_o;
  auto* warm = app.add_subcommand("warmup", "warm-up training on square labels");
  add_common(warm, warm_o);
  auto* hints = app.add_subcommand("hints", "expand point labels into hint areas");
  add_common(hints, hint_o);
  int until_epoch = -1;
  auto* train = app.add_subcommand("train", "main training (resumes from checkpoints/main.ckpt when present)");
  add_common(train, train_o);
  train->add_option("--until-epoch", until_epoch, "stop after this epoch (for staged runs)");
  auto* run = app.add_subcommand("run", "warm-up, hints, main training and evaluation in one go");
  add_common(run, run_o);

  std::string checkpoint, predictions;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint or a directory of 8-bit predictions");
  add_common(eval, eval_o);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file (default: <run>/checkpoints/final.ckpt)");
  eval->add_option("--predictions", predictions, "directory of <id>.png grayscale predictions")->check(CLI::ExistingDirectory);

  std::vector<std::string> axes;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  auto* ablate = app.add_subcommand("ablate", "run a config grid over several seeds");
  add_common(ablate, abl_o);
  ablate->add_option("--grid", axes, "axis as key=v1|v2|... (repeatable)")->required();
  ablate->add_option("--seeds", seeds, "comma-separated seeds")->delimiter(',');

  std::string plot_dir;
  auto* plot = app.add_subcommand("plot", "render SVG plots for a run directory");
  plot->add_option("--run", plot_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  std::string plot_config;
  std::optional<std::uint64_t> plot_seed;
  plot->add_option("--config", plot_config, "accepted for uniformity; unused");
  plot->add_option("--seed", plot_seed, "accepted for uniformity; unused");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return cmd_synth(so);
    if (*warm) return cmd_warmup(warm_o);
    if (*hints) return cmd_hints(hint_o);
    if (*train) return cmd_train(train_o, until_epoch);
    if (*run) return cmd_run(run_o);
    if (*eval) return cmd_eval(eval_o, checkpoint, predictions);
    if (*ablate) return cmd_ablate(abl_o, axes, seeds);
    if (*plot) return cmd_plot(plot_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
