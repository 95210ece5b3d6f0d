#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "vinet/errors.hpp"
#include "vinet/experiment.hpp"

namespace vinet {

using detail::check_keys;
using detail::read_key;

StnVariants parse_stn_variants(const std::string& text) {
  if (text == "off") return StnVariants::off;
  if (text == "on") return StnVariants::on;
  if (text == "both") return StnVariants::both;
  throw ConfigError("unknown stn setting '" + text + "' (expected on, off or both)");
}

std::string to_string(StnVariants v) {
  switch (v) {
    case StnVariants::off: return "off";
    case StnVariants::on: return "on";
    default: return "both";
  }
}

Json to_json(const SplitSettings& s) {
  return {{"kind", to_string(s.kind)},
          {"folds", s.folds},
          {"fold", s.fold},
          {"train_views", s.train_views},
          {"pairs", s.pairs}};
}

void from_json(const Json& j, SplitSettings& s) {
  const std::string where = "split settings";
  check_keys(j, {"kind", "folds", "fold", "train_views", "pairs"}, where);
  if (j.contains("kind")) {
    std::string kind;
    read_key(j, "kind", kind, where);
    s.kind = parse_split_kind(kind);
  }
  read_key(j, "folds", s.folds, where);
  read_key(j, "fold", s.fold, where);
  read_key(j, "train_views", s.train_views, where);
  read_key(j, "pairs", s.pairs, where);
}

Json to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"lr", t.lr},
          {"batch_size", t.batch_size},
          {"seed", t.seed},
          {"action", to_json(t.action)},
          {"normalization", to_string(t.normalization)},
          {"balance", t.balance}};
}

void from_json(const Json& j, TrainConfig& t) {
  const std::string where = "train config";
  check_keys(j, {"epochs", "lr", "batch_size", "seed", "action", "normalization", "balance"}, where);
  read_key(j, "epochs", t.epochs, where);
  read_key(j, "lr", t.lr, where);
  read_key(j, "batch_size", t.batch_size, where);
  read_key(j, "seed", t.seed, where);
  if (j.contains("action")) from_json(j.at("action"), t.action);
  if (j.contains("normalization")) {
    std::string scope;
    read_key(j, "normalization", scope, where);
    t.normalization = parse_normalization_scope(scope);
  }
  read_key(j, "balance", t.balance, where);
}

Json to_json(const ExperimentConfig& c) {
  return {{"dataset", to_json(c.dataset)},
          {"data", c.data},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"rule", to_string(c.rule)},
          {"split", to_json(c.split)},
          {"stn", to_string(c.stn)},
          {"jobs", c.jobs}};
}

void from_json(const Json& j, ExperimentConfig& c) {
  const std::string where = "config";
  check_keys(j, {"dataset", "data", "model", "train", "rule", "split", "stn", "jobs"}, where);
  if (j.contains("dataset")) from_json(j.at("dataset"), c.dataset);
  read_key(j, "data", c.data, where);
  if (j.contains("model")) from_json(j.at("model"), c.model);
  if (j.contains("train")) from_json(j.at("train"), c.train);
  if (j.contains("rule")) {
    std::string rule;
    read_key(j, "rule", rule, where);
    c.rule = parse_scoring_rule(rule);
  }
  if (j.contains("split")) from_json(j.at("split"), c.split);
  if (j.contains("stn")) {
    std::string stn;
    read_key(j, "stn", stn, where);
    c.stn = parse_stn_variants(stn);
  }
  read_key(j, "jobs", c.jobs, where);
}

std::unique_ptr<SampleSource> open_source(const ExperimentConfig& config) {
  if (!config.data.empty()) return std::make_unique<FileDataset>(config.data);
  return std::make_unique<synth::SyntheticDataset>(config.dataset);
}

void resolve(ExperimentConfig& c, const SampleSource& source) {
  if (source.size() == 0) throw ConfigError("dataset holds no samples");
  if (c.data.empty()) {
    c.train.action.max_score = c.dataset.max_score;
  } else {
    for (const auto& s : source.samples()) {
      if (s.score < 0 || s.score > c.train.action.max_score) {
        throw ConfigError("sample " + s.id + " has score " + std::to_string(s.score) + " outside 0.." +
                          std::to_string(c.train.action.max_score) + " (set train.action.max_score)");
      }
    }
  }
  c.model.vtdm.clip_length = c.train.action.clip_length;
  c.model.vtdm.height = source.height();
  c.model.vtdm.width = source.width();
  c.model.scorer.input_channels = source.joints();
  c.model.scorer.num_classes = static_cast<std::size_t>(c.train.action.num_classes());
  if (c.jobs == 0) throw ConfigError("jobs must be at least 1");
  c.model.validate();
  c.train.validate();
}

void write_json(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, count));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

CrossSubjectResult run_cross_subject(const SampleSource& source, const ModelConfig& model, const TrainConfig& train,
                                     const EvalOptions& eval, std::size_t folds, std::size_t jobs, const Logger& log) {
  const auto plans = make_cross_subject_splits(source.samples(), folds);
  CrossSubjectResult result;
  result.folds.resize(plans.size());
  std::mutex log_mutex;
  auto say = [&](const std::string& m) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    log(m);
  };
  parallel_for(plans.size(), jobs, [&](std::size_t k) {
    const auto& plan = plans[k];
    auto trained = vinet::train(source, plan, model, train, [&](std::size_t e, double loss) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "fold %zu epoch %zu loss %.6f", k, e, loss);
      say(buf);
    });
    EvalOptions one = eval;
    one.jobs = 1;
    auto report = evaluate(trained.model, source, plan.test, one);
    say("fold " + std::to_string(k) + " rho " + format_rho(report.rho));
    result.folds[k] = {plan, std::move(trained.epoch_loss), std::move(report)};
  });
  std::vector<EvalRow> all;
  double total = 0.0;
  for (const auto& f : result.folds) {
    total += f.report.rho_or_zero();
    all.insert(all.end(), f.report.rows.begin(), f.report.rows.end());
  }
  result.mean_rho = total / static_cast<double>(result.folds.size());
  result.pooled_rho = spearman_of_rows(all);
  return result;
}

CrossViewResult run_cross_view(const SampleSource& source, const SplitPlan& split, const ModelConfig& model,
                               const TrainConfig& train, const EvalOptions& eval, const Logger& log) {
  CrossViewResult result;
  result.split = split;
  auto trained = vinet::train(source, split, model, train, [&](std::size_t e, double loss) {
    if (!log) return;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s epoch %zu loss %.6f", split.label().c_str(), e, loss);
    log(buf);
  });
  result.loss = std::move(trained.epoch_loss);
  result.report = evaluate(trained.model, source, split.test, eval);
  double total = 0.0;
  for (int v : split.test_views) {
    const auto rho = spearman_of_rows(rows_for_view(result.report.rows, v));
    result.per_view.emplace_back(v, rho);
    total += rho.value_or(0.0);
  }
  result.mean_rho = split.test_views.empty() ? 0.0 : total / static_cast<double>(split.test_views.size());
  if (log) log(split.label() + " mean rho " + format_rho(result.mean_rho));
  return result;
}

void Table::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << csv_escape(fields[i]);
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  if (!out) throw IoError("write failed for " + path.string());
}

std::string format_rho(const std::optional<double>& rho) {
  if (!rho) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *rho);
  return buf;
}

}  // namespace vinet
