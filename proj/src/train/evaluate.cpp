#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "vinet/errors.hpp"
#include "vinet/ops.hpp"
#include "vinet/train.hpp"

namespace vinet {

ScoringRule parse_scoring_rule(const std::string& text) {
  if (text == "mean_logits") return ScoringRule::mean_logits;
  if (text == "max_clip") return ScoringRule::max_clip;
  throw ConfigError("unknown scoring rule '" + text + "' (expected mean_logits or max_clip)");
}

std::string to_string(ScoringRule rule) { return rule == ScoringRule::mean_logits ? "mean_logits" : "max_clip"; }

std::size_t argmax_lowest(const std::vector<double>& values) {
  if (values.empty()) throw ContractViolation("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] > values[best]) best = k;
  return best;
}

VideoScore score_from_clip_logits(std::vector<std::vector<double>> clip_logits, ScoringRule rule) {
  if (clip_logits.empty()) throw SequenceTooShort("video has no complete clip to score");
  const std::size_t k = clip_logits.front().size();
  VideoScore out;
  out.mean_logits.assign(k, 0.0);
  std::size_t max_clip = 0;
  for (const auto& row : clip_logits) {
    if (row.size() != k) throw ContractViolation("clip logits differ in length");
    for (std::size_t c = 0; c < k; ++c) out.mean_logits[c] += row[c];
    max_clip = std::max(max_clip, argmax_lowest(row));
  }
  for (auto& v : out.mean_logits) v /= static_cast<double>(clip_logits.size());
  out.predicted = static_cast<int>(rule == ScoringRule::mean_logits ? argmax_lowest(out.mean_logits) : max_clip);
  out.clip_logits = std::move(clip_logits);
  return out;
}

VideoScore video_score(VinetModel& model, const SampleSource& source, std::size_t index, std::size_t clip_length,
                       NormalizationScope scope, ScoringRule rule) {
  const auto& info = source.samples().at(index);
  const std::size_t m = info.frames / clip_length;
  if (m == 0) {
    throw SequenceTooShort("sample " + info.id + ": " + std::to_string(info.frames) + " frames hold no " +
                           std::to_string(clip_length) + "-frame clip");
  }
  NoGradGuard no_grad;
  std::vector<std::vector<double>> rows;
  constexpr std::size_t kChunk = 8;
  for (std::size_t c0 = 0; c0 < m; c0 += kChunk) {
    std::vector<ClipRef> batch;
    for (std::size_t c = c0; c < std::min(m, c0 + kChunk); ++c) batch.push_back({index, c * clip_length, info.score});
    const Tensor logits = model.forward(load_clip_batch(source, batch, clip_length, scope), Mode::eval);
    const std::size_t k = logits.size(1);
    const auto v = logits.values();
    for (std::size_t b = 0; b < batch.size(); ++b) rows.emplace_back(v.begin() + b * k, v.begin() + (b + 1) * k);
  }
  return score_from_clip_logits(std::move(rows), rule);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

bool constant(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

double evaluate_spearman(const std::vector<double>& predictions, const std::vector<double>& ground_truth) {
  if (predictions.size() != ground_truth.size()) {
    throw EvaluationError("spearman: " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(ground_truth.size()) + " ground-truth values");
  }
  if (predictions.size() < 2) throw EvaluationError("spearman: need at least two videos");
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (!std::isfinite(predictions[i]) || !std::isfinite(ground_truth[i])) {
      throw EvaluationError("spearman: non-finite value at position " + std::to_string(i));
    }
  }
  if (constant(ground_truth)) throw EvaluationError("spearman: ground truth is constant");
  if (constant(predictions)) throw EvaluationError("spearman: predictions are constant");
  const auto a = average_ranks(predictions), b = average_ranks(ground_truth);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<double> spearman_of_rows(const std::vector<EvalRow>& rows) {
  std::vector<double> p, t;
  for (const auto& r : rows) {
    p.push_back(r.prediction);
    t.push_back(r.truth);
  }
  try {
    return evaluate_spearman(p, t);
  } catch (const EvaluationError&) {
    return std::nullopt;
  }
}

std::vector<EvalRow> rows_for_view(const std::vector<EvalRow>& rows, int view) {
  std::vector<EvalRow> out;
  std::copy_if(rows.begin(), rows.end(), std::back_inserter(out), [&](const EvalRow& r) { return r.view == view; });
  return out;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "sample_id,subject,view,truth,prediction\n";
  for (const auto& r : rows) {
    out << csv_escape(r.sample_id) << ',' << r.subject << ',' << r.view << ',' << r.truth << ',' << r.prediction << '\n';
  }
  char buf[64] = "undefined";
  if (rho) std::snprintf(buf, sizeof buf, "%.6f", *rho);
  out << "spearman_rho,,,," << buf << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

EvalReport evaluate(VinetModel& model, const SampleSource& source, const std::vector<std::size_t>& indices,
                    const EvalOptions& options) {
  EvalReport report;
  report.rows.resize(indices.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t n = next++; n < indices.size(); n = next++) {
      try {
        const auto& info = source.samples().at(indices[n]);
        const auto s =
            video_score(model, source, indices[n], options.clip_length, options.normalization, options.rule);
        report.rows[n] = {info.id, info.subject_id, info.view_id, info.score, s.predicted};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = indices.size();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(1, indices.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  report.rho = spearman_of_rows(report.rows);
  return report;
}

}  // namespace vinet
