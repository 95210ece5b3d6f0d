#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "vinet/errors.hpp"
#include "vinet/experiment.hpp"
#include "vinet/runtime.hpp"

using namespace vinet;

namespace {

// Flags left unset keep whatever the config file (or its defaults) says.
struct Overrides {
  std::string config_path;
  std::optional<std::string> data;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  // dataset
  std::optional<std::size_t> subjects, views, repetitions, min_frames, max_frames, height, width;
  std::optional<int> max_score;
  std::optional<double> sigma;
  std::optional<std::string> family, action_tag;
  bool occlusion = false;
  // model and training
  std::optional<std::string> backbone, stn, descriptor_norm, normalization, rule;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> lr;
  bool no_balance = false;
  // split
  std::optional<std::string> split;
  std::optional<std::size_t> folds, fold;
  std::optional<std::string> train_views;
  bool pairs = false;
};

std::vector<int> parse_view_list(const std::string& text) {
  std::vector<int> views;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      views.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("bad view list '" + text + "' (expected e.g. 2,5)");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return views;
}

bool parse_on_off(const std::string& text, const char* what) {
  if (text == "on") return true;
  if (text == "off") return false;
  throw ConfigError(std::string(what) + " must be on or off, got '" + text + "'");
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
}

ExperimentConfig build_config(const Overrides& o) {
  Json j = Json::object();
  if (!o.config_path.empty()) j = read_json_file(o.config_path);
  // A resolved_config.json echo is accepted as is.
  if (j.is_object() && j.contains("command") && j.contains("config")) {
    if (!j["command"].is_string()) throw ConfigError("config " + o.config_path + ": command must be a string");
    j = Json(j["config"]);
  }
  ExperimentConfig c;
  from_json(j, c);

  if (const char* env = std::getenv("VINET_SEED")) {
    std::uint64_t seed = 0;
    try {
      std::size_t used = 0;
      seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("VINET_SEED must be an unsigned integer, got '") + env + "'");
    }
    const bool dataset_seed = j.contains("dataset") && j["dataset"].contains("seed");
    const bool train_seed = j.contains("train") && j["train"].contains("seed");
    if (!dataset_seed) c.dataset.seed = seed;
    if (!train_seed) c.train.seed = seed;
  }

  if (o.data) c.data = *o.data;
  if (o.seed) c.dataset.seed = c.train.seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.subjects) c.dataset.subjects = *o.subjects;
  if (o.views) c.dataset.views = *o.views;
  if (o.repetitions) c.dataset.repetitions = *o.repetitions;
  if (o.min_frames) c.dataset.min_frames = *o.min_frames;
  if (o.max_frames) c.dataset.max_frames = *o.max_frames;
  if (o.height) c.dataset.height = *o.height;
  if (o.width) c.dataset.width = *o.width;
  if (o.max_score) c.dataset.max_score = *o.max_score;
  if (o.sigma) c.dataset.sigma = *o.sigma;
  if (o.family) c.dataset.family = synth::parse_motion_family(*o.family);
  if (o.action_tag) c.dataset.action_tag = *o.action_tag;
  if (o.occlusion) c.dataset.occlusion.enabled = true;
  if (o.backbone) c.model.scorer.style = parse_backbone_style(*o.backbone);
  if (o.stn) {
    if (*o.stn == "both") {
      c.stn = StnVariants::both;
    } else {
      c.model.stn_enabled = parse_on_off(*o.stn, "--stn");
      c.stn = c.model.stn_enabled ? StnVariants::on : StnVariants::off;
    }
  }
  if (o.descriptor_norm) c.model.vtdm.descriptor_norm = parse_on_off(*o.descriptor_norm, "--descriptor-norm");
  if (o.normalization) c.train.normalization = parse_normalization_scope(*o.normalization);
  if (o.rule) c.rule = parse_scoring_rule(*o.rule);
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.batch_size) c.train.batch_size = *o.batch_size;
  if (o.lr) c.train.lr = *o.lr;
  if (o.no_balance) c.train.balance = false;
  if (o.split) c.split.kind = parse_split_kind(*o.split);
  if (o.folds) c.split.folds = *o.folds;
  if (o.fold) c.split.fold = *o.fold;
  if (o.train_views) c.split.train_views = parse_view_list(*o.train_views);
  if (o.pairs) c.split.pairs = true;
  c.dataset.validate(c.train.action.clip_length);
  return c;
}

std::filesystem::path prepare_out(const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out + ": " + ec.message());
  return out;
}

std::size_t fold_count(const ExperimentConfig& c) {
  return c.split.folds ? c.split.folds : static_cast<std::size_t>(c.train.action.num_classes());
}

SplitPlan select_split(const ExperimentConfig& c, const SampleSource& source) {
  if (c.split.kind == SplitKind::cross_subject) {
    const auto plans = make_cross_subject_splits(source.samples(), fold_count(c));
    if (c.split.fold >= plans.size()) {
      throw ConfigError("fold " + std::to_string(c.split.fold) + " out of range (" + std::to_string(plans.size()) +
                        " folds)");
    }
    return plans[c.split.fold];
  }
  return make_cross_view_split(source.samples(), c.split.train_views);
}

std::vector<std::size_t> select_samples(const std::string& which, const ExperimentConfig& c,
                                        const SampleSource& source) {
  if (which == "all") {
    std::vector<std::size_t> all(source.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  const auto plan = select_split(c, source);
  if (which == "test") return plan.test;
  if (which == "train") return plan.train;
  throw ConfigError("--samples must be all, train or test, got '" + which + "'");
}

void log_line(const std::string& m) { std::cerr << m << '\n'; }

Json split_json(const SplitPlan& plan, const SampleSource& source) {
  Json train = Json::array(), test = Json::array();
  for (auto i : plan.train) train.push_back(source.samples()[i].id);
  for (auto i : plan.test) test.push_back(source.samples()[i].id);
  return {{"label", plan.label()},
          {"train_subjects", plan.train_subjects},
          {"test_subjects", plan.test_subjects},
          {"train_views", plan.train_views},
          {"test_views", plan.test_views},
          {"train", train},
          {"test", test}};
}

int cmd_generate(const Overrides& o, const std::string& out) {
  ExperimentConfig c = build_config(o);
  const auto dir = prepare_out(out);
  write_json({{"command", "generate"}, {"config", to_json(c)}}, dir / "resolved_config.json");
  const auto manifest = synth::generate_dataset(c.dataset, dir, c.jobs);
  std::cout << "wrote " << manifest.samples.size() << " samples to " << (dir / synth::kManifestName).string() << '\n';
  return 0;
}

int cmd_train(const Overrides& o, const std::string& out) {
  ExperimentConfig c = build_config(o);
  const auto source = open_source(c);
  resolve(c, *source);
  const auto plan = select_split(c, *source);
  const auto dir = prepare_out(out);
  write_json({{"command", "train"}, {"config", to_json(c)}}, dir / "resolved_config.json");
  write_json(split_json(plan, *source), dir / "split.json");
  auto result = train(*source, plan, c.model, c.train, [&](std::size_t e, double loss) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "epoch %zu loss %.6f", e, loss);
    log_line(buf);
  });
  save_checkpoint(result.model, c.train.epochs, dir / "checkpoint.vick");
  Table loss{{"epoch", "loss"}, {}};
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", result.epoch_loss[e]);
    loss.rows.push_back({std::to_string(e + 1), buf});
  }
  loss.write_csv(dir / "loss.csv");
  std::cout << "trained " << plan.label() << " on " << result.clips_per_epoch << " clips per epoch; checkpoint "
            << (dir / "checkpoint.vick").string() << '\n';
  return 0;
}

// Shared by score and evaluate: the model comes from the checkpoint, the
// data from the config.
struct Loaded {
  ExperimentConfig config;
  std::unique_ptr<SampleSource> source;
  LoadedCheckpoint checkpoint;
};

Loaded load_for_scoring(const Overrides& o, const std::string& checkpoint) {
  if (checkpoint.empty()) throw ConfigError("--checkpoint is required");
  ExperimentConfig c = build_config(o);
  auto source = open_source(c);
  auto ck = load_checkpoint(checkpoint);
  c.model = ck.model.config();
  const auto& m = c.model;
  if (source->joints() != m.scorer.input_channels || source->height() != m.vtdm.height ||
      source->width() != m.vtdm.width) {
    throw ConfigError("checkpoint " + checkpoint + " expects " + std::to_string(m.scorer.input_channels) + " joints of " +
                      std::to_string(m.vtdm.height) + "x" + std::to_string(m.vtdm.width) + " heatmaps");
  }
  c.train.action.clip_length = m.vtdm.clip_length;
  c.train.action.max_score = static_cast<int>(m.scorer.num_classes) - 1;
  return {std::move(c), std::move(source), std::move(ck)};
}

int cmd_score(const Overrides& o, const std::string& out, const std::string& checkpoint, const std::string& which) {
  auto l = load_for_scoring(o, checkpoint);
  const auto indices = select_samples(which, l.config, *l.source);
  const auto dir = prepare_out(out);
  write_json({{"command", "score"}, {"checkpoint", checkpoint}, {"samples", which}, {"config", to_json(l.config)}},
             dir / "resolved_config.json");
  const std::size_t k = l.config.model.scorer.num_classes;
  Table t;
  t.header = {"sample_id", "subject", "view", "truth", "prediction"};
  for (std::size_t c = 0; c < k; ++c) t.header.push_back("mean_logit_" + std::to_string(c));
  t.rows.resize(indices.size());
  parallel_for(indices.size(), l.config.jobs, [&](std::size_t n) {
    const auto& info = l.source->samples()[indices[n]];
    const auto s = video_score(l.checkpoint.model, *l.source, indices[n], l.config.model.vtdm.clip_length,
                               l.config.train.normalization, l.config.rule);
    std::vector<std::string> row{info.id, std::to_string(info.subject_id), std::to_string(info.view_id),
                                 std::to_string(info.score), std::to_string(s.predicted)};
    for (double v : s.mean_logits) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      row.push_back(buf);
    }
    t.rows[n] = std::move(row);
  });
  t.write_csv(dir / "predictions.csv");
  std::cout << "scored " << indices.size() << " videos into " << (dir / "predictions.csv").string() << '\n';
  return 0;
}

int cmd_evaluate(const Overrides& o, const std::string& out, const std::string& checkpoint, const std::string& which) {
  auto l = load_for_scoring(o, checkpoint);
  const auto indices = select_samples(which, l.config, *l.source);
  const auto dir = prepare_out(out);
  const Json echo{{"command", "evaluate"}, {"checkpoint", checkpoint}, {"samples", which}, {"config", to_json(l.config)}};
  write_json(echo, dir / "resolved_config.json");
  EvalOptions eval{l.config.model.vtdm.clip_length, l.config.train.normalization, l.config.rule, l.config.jobs};
  auto report = evaluate(l.checkpoint.model, *l.source, indices, eval);
  report.config_json = echo.dump();
  report.write_csv(dir / "eval.csv");
  std::cout << "spearman rho " << format_rho(report.rho) << " over " << indices.size() << " videos\n";
  return 0;
}

std::vector<bool> stn_settings(StnVariants v) {
  if (v == StnVariants::off) return {false};
  if (v == StnVariants::on) return {true};
  return {false, true};
}

const char* variant_name(bool stn) { return stn ? "w STN" : "w/o STN"; }

int cmd_grid(const Overrides& o, const std::string& out) {
  ExperimentConfig c = build_config(o);
  const auto source = open_source(c);
  resolve(c, *source);
  const auto dir = prepare_out(out);
  write_json({{"command", "grid"}, {"config", to_json(c)}}, dir / "resolved_config.json");
  const std::string action = c.data.empty() ? c.dataset.action_tag : c.train.action.name;
  EvalOptions eval{c.train.action.clip_length, c.train.normalization, c.rule, 1};

  if (c.split.kind == SplitKind::cross_subject) {
    const std::size_t folds = fold_count(c);
    Table table;
    table.header = {"action", "variant"};
    for (std::size_t k = 0; k < folds; ++k) table.header.push_back("fold_" + std::to_string(k));
    table.header.push_back("mean");
    table.header.push_back("pooled");
    for (bool stn : stn_settings(c.stn)) {
      auto model = c.model;
      model.stn_enabled = stn;
      const auto r = run_cross_subject(*source, model, c.train, eval, folds, c.jobs, [&](const std::string& m) {
        log_line(std::string(variant_name(stn)) + " " + m);
      });
      std::vector<std::string> row{action, variant_name(stn)};
      for (std::size_t k = 0; k < r.folds.size(); ++k) {
        row.push_back(format_rho(r.folds[k].report.rho));
        r.folds[k].report.write_csv(dir / ("eval_" + std::string(stn ? "stn" : "nostn") + "_fold" +
                                           std::to_string(k) + ".csv"));
      }
      row.push_back(format_rho(r.mean_rho));
      row.push_back(format_rho(r.pooled_rho));
      table.rows.push_back(row);
    }
    table.write_csv(dir / "summary_cross_subject.csv");
    for (const auto& row : table.rows) std::cout << row[1] << " mean rho " << row[row.size() - 2] << '\n';
    return 0;
  }

  std::vector<SplitPlan> plans;
  if (c.split.pairs) {
    plans = make_view_pair_splits(source->samples(), {std::begin(synth::kFrontalViews), std::end(synth::kFrontalViews)},
                                  {std::begin(synth::kSideViews), std::end(synth::kSideViews)});
  } else {
    plans.push_back(make_cross_view_split(source->samples(), c.split.train_views));
  }
  std::vector<int> all_views;
  for (const auto& s : source->samples()) all_views.push_back(s.view_id);
  std::sort(all_views.begin(), all_views.end());
  all_views.erase(std::unique(all_views.begin(), all_views.end()), all_views.end());

  Table table;
  table.header = {"action", "variant", "train_views"};
  for (int v : all_views) table.header.push_back("view_" + std::to_string(v));
  table.header.push_back("average");
  struct Job {
    std::size_t plan;
    bool stn;
  };
  std::vector<Job> jobs;
  for (bool stn : stn_settings(c.stn))
    for (std::size_t p = 0; p < plans.size(); ++p) jobs.push_back({p, stn});
  std::vector<CrossViewResult> results(jobs.size());
  parallel_for(jobs.size(), c.jobs, [&](std::size_t i) {
    auto model = c.model;
    model.stn_enabled = jobs[i].stn;
    results[i] = run_cross_view(*source, plans[jobs[i].plan], model, c.train, eval, [&](const std::string& m) {
      log_line(std::string(variant_name(jobs[i].stn)) + " " + m);
    });
  });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& r = results[i];
    std::string train_views;
    for (int v : r.split.train_views) train_views += (train_views.empty() ? "" : "+") + std::to_string(v);
    std::vector<std::string> row{action, variant_name(jobs[i].stn), train_views};
    for (int v : all_views) {
      std::string cell;
      for (const auto& [view, rho] : r.per_view)
        if (view == v) cell = format_rho(rho);
      row.push_back(cell);
    }
    row.push_back(format_rho(r.mean_rho));
    table.rows.push_back(row);
    r.report.write_csv(dir / ("eval_" + std::string(jobs[i].stn ? "stn" : "nostn") + "_train" + train_views + ".csv"));
    std::cout << row[1] << " train " << train_views << " average rho " << row.back() << '\n';
  }
  table.write_csv(dir / "summary_cross_view.csv");
  return 0;
}

int cmd_check(const std::string& suite_dir) {
  const std::filesystem::path dir = suite_dir.empty() ? std::filesystem::path(VINET_TEST_DIR) : std::filesystem::path(suite_dir);
  int status = 0;
  for (const auto& [name, args] : {std::pair<std::string, std::string>{"unit_tests", ""},
                                   std::pair<std::string, std::string>{"acceptance", " --fast"}}) {
    const auto exe = dir / name;
    if (!std::filesystem::exists(exe)) {
      std::cerr << "check: " << exe.string() << " not found (build the tests first)\n";
      return 1;
    }
    const std::string cmd = "\"" + exe.string() + "\"" + args;
    const int rc = std::system(cmd.c_str());
    std::cout << name << ": " << (rc == 0 ? "PASS" : "FAIL") << '\n';
    if (rc != 0) status = 1;
  }
  return status;
}

void add_dataset_flags(CLI::App* app, Overrides& o) {
  app->add_option("--subjects", o.subjects, "Synthetic subjects");
  app->add_option("--views", o.views, "Synthetic views (at most 6)");
  app->add_option("--repetitions", o.repetitions, "Repetitions per subject");
  app->add_option("--max-score", o.max_score, "Highest score S");
  app->add_option("--min-frames", o.min_frames, "Shortest video");
  app->add_option("--max-frames", o.max_frames, "Longest video");
  app->add_option("--height", o.height, "Heatmap height");
  app->add_option("--width", o.width, "Heatmap width");
  app->add_option("--sigma", o.sigma, "Gaussian std in pixels");
  app->add_option("--family", o.family, "Motion family: walk or sit-stand");
  app->add_option("--action-tag", o.action_tag, "Action tag written to the manifest");
  app->add_flag("--occlusion", o.occlusion, "Hide random joint frame ranges");
}

void add_common_flags(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "JSON config; flags override it");
  app->add_option("--seed", o.seed, "Seed for data and training (default: VINET_SEED or 0)");
  app->add_option("--jobs", o.jobs, "Parallel workers");
}

void add_model_flags(CLI::App* app, Overrides& o) {
  app->add_option("--data", o.data, "Manifest of a generated corpus; synthetic data is rendered on demand otherwise");
  app->add_option("--backbone", o.backbone, "tiny, vgg-like or resnext-like");
  app->add_option("--stn", o.stn, "on or off (grid also accepts both)");
  app->add_option("--descriptor-norm", o.descriptor_norm, "on or off");
  app->add_option("--normalization", o.normalization, "clip, joint or frame");
  app->add_option("--rule", o.rule, "mean_logits or max_clip");
  app->add_option("--epochs", o.epochs, "Training epochs");
  app->add_option("--lr", o.lr, "Learning rate");
  app->add_option("--batch-size", o.batch_size, "Clips per batch");
  app->add_flag("--no-balance", o.no_balance, "Skip temporal-crop balancing");
  app->add_option("--split", o.split, "cross_subject or cross_view");
  app->add_option("--folds", o.folds, "Cross-subject folds (default S+1)");
  app->add_option("--fold", o.fold, "Fold used by train/score/evaluate");
  app->add_option("--train-views", o.train_views, "Comma-separated training views, e.g. 2,5");
  app->add_flag("--pairs", o.pairs, "grid: every frontal/side training pair");
}

}  // namespace

int main(int argc, char** argv) {
  vinet::tune_allocator();
  CLI::App app{"Viewpoint-invariant movement scoring on joint heatmaps"};
  app.require_subcommand(1);
  Overrides o;
  std::string out, checkpoint, which = "all", suite_dir;

  auto* gen = app.add_subcommand("generate", "Render a synthetic multi-view corpus to disk");
  add_common_flags(gen, o);
  add_dataset_flags(gen, o);
  gen->add_option("--out", out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train one model and write a checkpoint and loss curve");
  add_common_flags(tr, o);
  add_dataset_flags(tr, o);
  add_model_flags(tr, o);
  tr->add_option("--out", out, "Output directory")->required();

  auto* sc = app.add_subcommand("score", "Per-video predictions from a checkpoint");
  add_common_flags(sc, o);
  add_dataset_flags(sc, o);
  add_model_flags(sc, o);
  sc->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  sc->add_option("--samples", which, "all, train or test side of the configured split");
  sc->add_option("--out", out, "Output directory")->required();

  auto* ev = app.add_subcommand("evaluate", "Spearman rho of a checkpoint on a set of videos");
  add_common_flags(ev, o);
  add_dataset_flags(ev, o);
  add_model_flags(ev, o);
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  ev->add_option("--samples", which, "all, train or test side of the configured split");
  ev->add_option("--out", out, "Output directory")->required();

  auto* gr = app.add_subcommand("grid", "Cross-subject or cross-view result tables");
  add_common_flags(gr, o);
  add_dataset_flags(gr, o);
  add_model_flags(gr, o);
  gr->add_option("--out", out, "Output directory")->required();

  auto* ck = app.add_subcommand("check", "Run the oracle and invariant suites");
  ck->add_option("--suite-dir", suite_dir, "Directory holding unit_tests and acceptance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_generate(o, out);
    if (*tr) return cmd_train(o, out);
    if (*sc) return cmd_score(o, out, checkpoint, which);
    if (*ev) return cmd_evaluate(o, out, checkpoint, which);
    if (*gr) return cmd_grid(o, out);
    if (*ck) return cmd_check(suite_dir);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const SplitError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
