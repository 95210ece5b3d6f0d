#include <algorithm>
#include <set>

#include "vinet/errors.hpp"
#include "vinet/train.hpp"

namespace vinet {

namespace {

std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<int> views_of(const std::vector<SampleInfo>& samples) {
  std::vector<int> v;
  for (const auto& s : samples) v.push_back(s.view_id);
  return sorted_unique(v);
}

void fill_sides(SplitPlan& plan, const std::vector<SampleInfo>& samples) {
  std::vector<int> ts, es, tv, ev;
  for (auto i : plan.train) {
    ts.push_back(samples[i].subject_id);
    tv.push_back(samples[i].view_id);
  }
  for (auto i : plan.test) {
    es.push_back(samples[i].subject_id);
    ev.push_back(samples[i].view_id);
  }
  plan.train_subjects = sorted_unique(ts);
  plan.test_subjects = sorted_unique(es);
  plan.train_views = sorted_unique(tv);
  plan.test_views = sorted_unique(ev);
}

std::string join(const std::vector<int>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

SplitKind parse_split_kind(const std::string& text) {
  if (text == "cross_subject") return SplitKind::cross_subject;
  if (text == "cross_view") return SplitKind::cross_view;
  throw ConfigError("unknown split kind '" + text + "' (expected cross_subject or cross_view)");
}

std::string to_string(SplitKind kind) { return kind == SplitKind::cross_subject ? "cross_subject" : "cross_view"; }

void SplitPlan::check_hygiene(const std::vector<SampleInfo>& samples) const {
  const std::string where = label() + ": ";
  if (train.empty() || test.empty()) throw SplitError(where + "empty train or test side");
  std::set<std::size_t> seen;
  for (auto i : train) {
    if (i >= samples.size()) throw SplitError(where + "train index out of range");
    if (!seen.insert(i).second) throw SplitError(where + "duplicate train sample " + samples[i].id);
  }
  std::set<int> subjects, views;
  for (auto i : train) {
    subjects.insert(samples[i].subject_id);
    views.insert(samples[i].view_id);
  }
  for (auto i : test) {
    if (i >= samples.size()) throw SplitError(where + "test index out of range");
    if (seen.count(i)) throw SplitError(where + "sample " + samples[i].id + " on both sides");
    if (kind == SplitKind::cross_subject && subjects.count(samples[i].subject_id)) {
      throw SplitError(where + "subject " + std::to_string(samples[i].subject_id) + " on both sides");
    }
    if (kind == SplitKind::cross_view && views.count(samples[i].view_id)) {
      throw SplitError(where + "view " + std::to_string(samples[i].view_id) + " on both sides");
    }
  }
}

std::string SplitPlan::label() const {
  if (kind == SplitKind::cross_subject) return "cross_subject fold " + std::to_string(fold);
  return "cross_view train " + join(train_views, '+');
}

std::vector<SplitPlan> make_cross_subject_splits(const std::vector<SampleInfo>& samples, std::size_t folds) {
  if (samples.empty()) throw SplitError("cannot split an empty dataset");
  if (folds < 2) throw SplitError("cross-subject evaluation needs at least 2 folds");
  std::vector<int> subjects;
  for (const auto& s : samples) subjects.push_back(s.subject_id);
  subjects = sorted_unique(subjects);
  if (subjects.size() < folds) {
    throw SplitError(std::to_string(subjects.size()) + " subjects cannot fill " + std::to_string(folds) + " folds");
  }
  std::vector<SplitPlan> plans(folds);
  for (std::size_t k = 0; k < folds; ++k) {
    plans[k].kind = SplitKind::cross_subject;
    plans[k].fold = k;
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto pos = static_cast<std::size_t>(
        std::lower_bound(subjects.begin(), subjects.end(), samples[i].subject_id) - subjects.begin());
    for (std::size_t k = 0; k < folds; ++k) (pos % folds == k ? plans[k].test : plans[k].train).push_back(i);
  }
  for (auto& p : plans) {
    fill_sides(p, samples);
    p.check_hygiene(samples);
  }
  return plans;
}

SplitPlan make_cross_view_split(const std::vector<SampleInfo>& samples, const std::vector<int>& train_views) {
  if (samples.empty()) throw SplitError("cannot split an empty dataset");
  const auto wanted = sorted_unique(train_views);
  if (wanted.empty()) throw SplitError("cross-view split needs at least one training view");
  const auto present = views_of(samples);
  for (int v : wanted) {
    if (!std::binary_search(present.begin(), present.end(), v)) {
      throw SplitError("training view " + std::to_string(v) + " is not in the dataset");
    }
  }
  SplitPlan plan;
  plan.kind = SplitKind::cross_view;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const bool in_train = std::binary_search(wanted.begin(), wanted.end(), samples[i].view_id);
    (in_train ? plan.train : plan.test).push_back(i);
  }
  if (plan.test.empty()) throw SplitError("no view left for testing");
  fill_sides(plan, samples);
  plan.check_hygiene(samples);
  return plan;
}

std::vector<SplitPlan> make_single_view_splits(const std::vector<SampleInfo>& samples) {
  std::vector<SplitPlan> plans;
  for (int v : views_of(samples)) plans.push_back(make_cross_view_split(samples, {v}));
  return plans;
}

std::vector<SplitPlan> make_view_pair_splits(const std::vector<SampleInfo>& samples, const std::vector<int>& frontal,
                                             const std::vector<int>& side) {
  const auto present = views_of(samples);
  auto has = [&](int v) { return std::binary_search(present.begin(), present.end(), v); };
  std::vector<SplitPlan> plans;
  for (int f : frontal)
    for (int s : side)
      if (has(f) && has(s)) plans.push_back(make_cross_view_split(samples, {f, s}));
  if (plans.empty()) throw SplitError("no frontal/side view pair is present in the dataset");
  return plans;
}

}  // namespace vinet
