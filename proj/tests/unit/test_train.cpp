#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "../support/oracles.hpp"
#include "../support/temp_dir.hpp"
#include "vinet/errors.hpp"
#include "vinet/log.hpp"
#include "vinet/synth.hpp"
#include "vinet/train.hpp"

using namespace vinet;

namespace {

std::vector<SampleInfo> grid_infos(int subjects, int views, int scores) {
  std::vector<SampleInfo> out;
  for (int s = 1; s <= subjects; ++s)
    for (int q = 0; q < scores; ++q)
      for (int v = 1; v <= views; ++v)
        out.push_back({"s" + std::to_string(s) + "q" + std::to_string(q) + "v" + std::to_string(v), "", s, v, q, "walk",
                       32});
  return out;
}

std::vector<int> views_of(const std::vector<SampleInfo>& infos, const std::vector<std::size_t>& idx) {
  std::set<int> v;
  for (auto i : idx) v.insert(infos[i].view_id);
  return {v.begin(), v.end()};
}

synth::DatasetSpec tiny_spec(std::size_t subjects = 2) {
  synth::DatasetSpec s;
  s.subjects = subjects;
  s.views = 2;
  s.max_score = 2;
  s.min_frames = 16;
  s.max_frames = 40;
  s.height = 16;
  s.width = 16;
  s.sigma = 1.0;
  s.seed = 3;
  return s;
}

ModelConfig tiny_model(bool stn = true) {
  ModelConfig m;
  m.vtdm.height = 16;
  m.vtdm.width = 16;
  m.scorer.num_classes = 3;
  m.scorer.first_filters = 4;
  m.scorer.stage_widths = {6};
  m.stn_enabled = stn;
  return m;
}

TrainConfig tiny_train(std::size_t epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.action.max_score = 2;
  t.seed = 5;
  return t;
}

MovementSample counting_sample(std::size_t frames) {
  MovementSample s;
  s.joints = 2;
  s.frames = frames;
  s.height = 2;
  s.width = 3;
  s.score = 3;
  s.subject_id = 4;
  s.view_id = 5;
  s.action_tag = "walk";
  s.heatmaps.resize(2 * frames * 6);
  for (std::size_t i = 0; i < s.heatmaps.size(); ++i) s.heatmaps[i] = static_cast<float>(i);
  return s;
}

}  // namespace

TEST_CASE("cross-view splits follow the train-view choice") {
  const auto infos = grid_infos(3, 6, 5);
  const auto single = make_cross_view_split(infos, {2});
  CHECK(single.train_views == std::vector<int>{2});
  CHECK(single.test_views == std::vector<int>{1, 3, 4, 5, 6});
  CHECK(views_of(infos, single.test) == std::vector<int>{1, 3, 4, 5, 6});
  CHECK(single.train.size() == 15);
  CHECK(single.test.size() == 75);

  const auto pair = make_cross_view_split(infos, {5, 2});
  CHECK(pair.train_views == std::vector<int>{2, 5});
  CHECK(pair.test_views == std::vector<int>{1, 3, 4, 6});
  CHECK(pair.label() == "cross_view train 2+5");

  CHECK(make_single_view_splits(infos).size() == 6);
  const auto pairs = make_view_pair_splits(infos, {1, 2, 3}, {4, 5, 6});
  CHECK(pairs.size() == 9);
  for (const auto& p : pairs) CHECK(p.test_views.size() == 4);

  CHECK_THROWS_AS(make_cross_view_split(infos, {7}), SplitError);
  CHECK_THROWS_AS(make_cross_view_split(infos, {1, 2, 3, 4, 5, 6}), SplitError);
  CHECK_THROWS_AS(make_cross_view_split({}, {1}), SplitError);
}

TEST_CASE("cross-subject folds partition the subjects") {
  const auto infos = grid_infos(10, 3, 5);
  const auto plans = make_cross_subject_splits(infos, 5);
  REQUIRE(plans.size() == 5);
  std::map<int, int> times_tested;
  for (const auto& p : plans) {
    CHECK(p.test_subjects.size() == 2);
    CHECK(p.train_subjects.size() == 8);
    CHECK(p.test_views == std::vector<int>{1, 2, 3});
    CHECK(p.train_views == std::vector<int>{1, 2, 3});
    CHECK(p.train.size() + p.test.size() == infos.size());
    for (int s : p.test_subjects) ++times_tested[s];
  }
  CHECK(times_tested.size() == 10);
  for (auto [s, n] : times_tested) CHECK(n == 1);

  CHECK_THROWS_AS(make_cross_subject_splits(grid_infos(4, 2, 5), 5), SplitError);
  CHECK_THROWS_AS(make_cross_subject_splits({}, 5), SplitError);
}

TEST_CASE("split hygiene violations are reported") {
  const auto infos = grid_infos(2, 2, 2);
  SplitPlan p;
  p.kind = SplitKind::cross_subject;
  p.train = {0, 1};
  p.test = {1, 4};
  CHECK_THROWS_AS(p.check_hygiene(infos), SplitError);  // shared sample
  p.test = {2};                                         // subject 1 again
  CHECK_THROWS_AS(p.check_hygiene(infos), SplitError);
  p.test = {4};
  CHECK_NOTHROW(p.check_hygiene(infos));
  p.kind = SplitKind::cross_view;
  p.train = {0};  // view 1
  p.test = {2};   // view 1
  CHECK_THROWS_AS(p.check_hygiene(infos), SplitError);
  p.test = {};
  CHECK_THROWS_AS(p.check_hygiene(infos), SplitError);
}

TEST_CASE("temporal crops are contiguous sub-ranges of at least one clip") {
  const auto sample = counting_sample(100);
  const auto crops = augment_temporal_crop(sample, 40, 16, 9);
  REQUIRE(crops.size() == 40);
  for (const auto& c : crops) {
    CHECK(c.frames >= 16);
    CHECK(c.frames <= 100);
    CHECK(c.score == 3);
    CHECK(c.subject_id == 4);
    CHECK(c.view_id == 5);
    // Frame f of joint j holds values starting at (j * 100 + f) * 6.
    const auto start = static_cast<std::size_t>(c.heatmaps[0]) / 6;
    CHECK(start + c.frames <= 100);
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t f = 0; f < c.frames; ++f)
        CHECK(c.at(j, f, 1, 2) == sample.at(j, start + f, 1, 2));
  }
  CHECK(augment_temporal_crop(sample, 0, 16, 9).empty());
  CHECK(augment_temporal_crop(sample, 5, 16, 9).front().heatmaps ==
        augment_temporal_crop(sample, 5, 16, 9).front().heatmaps);

  std::vector<std::string> warnings;
  auto previous = set_warning_sink([&](const std::string& m) { warnings.push_back(m); });
  CHECK(augment_temporal_crop(counting_sample(16), 3, 16, 1).empty());
  CHECK(augment_temporal_crop(counting_sample(10), 3, 16, 1).empty());
  set_warning_sink(previous);
  CHECK(warnings.size() == 2);
}

TEST_CASE("balancing tops minority scores up to the majority count on the train side") {
  std::vector<MovementSample> samples;
  for (int i = 0; i < 15; ++i) {
    auto s = counting_sample(40);
    s.score = 0;
    samples.push_back(s);
  }
  for (int i = 0; i < 4; ++i) {
    auto s = counting_sample(40);
    s.score = 3;
    samples.push_back(s);
  }
  for (int i = 0; i < 3; ++i) {  // test side, never counted or cropped
    auto s = counting_sample(40);
    s.score = 1;
    samples.push_back(s);
  }
  const InMemoryDataset data(std::move(samples));
  std::vector<std::size_t> train(19);
  for (std::size_t i = 0; i < 19; ++i) train[i] = i;
  const auto ranges = balanced_training_set(data, train, 16, 2);
  std::map<int, int> originals, extra;
  for (const auto& r : ranges) {
    (r.augmented ? extra : originals)[r.score]++;
    CHECK(r.sample < 19);
    CHECK(r.frames >= 16);
    CHECK(r.start + r.frames <= 40);
    if (r.augmented) CHECK(data.samples()[r.sample].score == 3);
  }
  CHECK(originals[0] == 15);
  CHECK(originals[3] == 4);
  CHECK(extra[3] == 11);
  CHECK(extra.count(0) == 0);
  CHECK(extra.count(1) == 0);
}

TEST_CASE("video score averages raw logits and breaks ties low") {
  const auto two = score_from_clip_logits({{0.1, 0.9}, {0.8, 0.2}}, ScoringRule::mean_logits);
  CHECK(two.predicted == 1);
  CHECK(two.mean_logits[0] == doctest::Approx(0.45).epsilon(1e-15));
  CHECK(two.mean_logits[1] == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(score_from_clip_logits({{0.1, 0.9}, {0.8, 0.2}}, ScoringRule::max_clip).predicted == 1);
  CHECK(score_from_clip_logits({{0.3, 0.1, 0.2}}, ScoringRule::mean_logits).predicted == 0);
  CHECK(score_from_clip_logits({{0.5, 0.5, 0.1}}, ScoringRule::mean_logits).predicted == 0);
  // Mean picks 0 here while the largest clip argmax is 2.
  const std::vector<std::vector<double>> split{{3.0, 0.0, 0.0}, {3.0, 0.0, 0.0}, {0.0, 0.0, 1.0}};
  CHECK(score_from_clip_logits(split, ScoringRule::mean_logits).predicted == 0);
  CHECK(score_from_clip_logits(split, ScoringRule::max_clip).predicted == 2);
  CHECK_THROWS_AS(score_from_clip_logits({}, ScoringRule::mean_logits), SequenceTooShort);

  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 6));
    std::vector<std::vector<double>> logits(m);
    for (auto& row : logits) row = oracle::random_vector(5, rng, -3, 3);
    const int base = score_from_clip_logits(logits, ScoringRule::mean_logits).predicted;
    if (m == 1) CHECK(static_cast<std::size_t>(base) == argmax_lowest(logits[0]));
    auto shifted = logits;
    for (auto& row : shifted) {
      const double c = rng.uniform(-10, 10);
      for (auto& v : row) v += c;
    }
    CHECK(score_from_clip_logits(shifted, ScoringRule::mean_logits).predicted == base);
    auto mapped = logits;
    const double a = rng.uniform(0.1, 5), b = rng.uniform(-5, 5);
    for (auto& row : mapped)
      for (auto& v : row) v = a * v + b;
    CHECK(score_from_clip_logits(mapped, ScoringRule::mean_logits).predicted == base);
  }
}

TEST_CASE("spearman: orderings, ties and errors") {
  CHECK(evaluate_spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(evaluate_spearman({4, 3, 2, 1}, {10, 20, 30, 40}) == doctest::Approx(-1.0).epsilon(1e-15));
  const std::vector<double> p{1, 2, 2, 3}, t{1, 2, 3, 4};
  CHECK(std::abs(evaluate_spearman(p, t) - oracle::spearman(p, t)) < 1e-12);
  CHECK(std::abs(evaluate_spearman(p, t) - 0.9486832980505138) < 1e-12);

  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(3, 30));
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(rng.uniform_int(0, 4));
      b[i] = static_cast<double>(rng.uniform_int(0, 4));
    }
    if (std::all_of(a.begin(), a.end(), [&](double v) { return v == a[0]; })) a[0] += 1;
    if (std::all_of(b.begin(), b.end(), [&](double v) { return v == b[0]; })) b[0] += 1;
    const double rho = evaluate_spearman(a, b);
    CHECK(std::abs(rho - oracle::spearman(a, b)) < 1e-12);
    auto warped = a;
    for (auto& v : warped) v = std::exp(v) * 3 - 7;
    CHECK(std::abs(evaluate_spearman(warped, b) - rho) < 1e-12);
  }

  CHECK_THROWS_AS(evaluate_spearman({1, 2}, {1, 2, 3}), EvaluationError);
  CHECK_THROWS_AS(evaluate_spearman({1}, {1}), EvaluationError);
  CHECK_THROWS_AS(evaluate_spearman({1, 2, 3}, {2, 2, 2}), EvaluationError);
  CHECK_THROWS_AS(evaluate_spearman({2, 2, 2}, {1, 2, 3}), EvaluationError);
  CHECK(!spearman_of_rows({{"a", 1, 1, 0, 1}, {"b", 1, 1, 1, 1}}).has_value());
}

TEST_CASE("zero epochs returns the initial model and training is deterministic") {
  const synth::SyntheticDataset data(tiny_spec());
  const auto split = make_cross_subject_splits(data.samples(), 2)[0];
  for (bool stn : {true, false}) {
    auto untouched = train(data, split, tiny_model(stn), tiny_train(0));
    CHECK(untouched.epoch_loss.empty());
    auto fresh = initial_model(tiny_model(stn), tiny_train(0));
    CHECK(model_arrays(untouched.model) == model_arrays(fresh));

    auto a = train(data, split, tiny_model(stn), tiny_train(2));
    auto b = train(data, split, tiny_model(stn), tiny_train(2));
    REQUIRE(a.epoch_loss.size() == 2);
    CHECK(a.epoch_loss == b.epoch_loss);
    CHECK(model_arrays(a.model) == model_arrays(b.model));
    CHECK(model_arrays(a.model) != model_arrays(fresh));
  }
  // Without the transformer the localisation weights are never touched.
  auto off = train(data, split, tiny_model(false), tiny_train(1));
  auto init = initial_model(tiny_model(false), tiny_train(1));
  const auto loc_a = off.model.vtdm.localisation_parameters();
  const auto loc_b = init.vtdm.localisation_parameters();
  for (std::size_t i = 0; i < loc_a.size(); ++i) {
    const auto va = loc_a[i].tensor.values(), vb = loc_b[i].tensor.values();
    CHECK(std::equal(va.begin(), va.end(), vb.begin()));
  }
}

TEST_CASE("a fixed batch is overfitted within 50 steps") {
  const synth::SyntheticDataset data(tiny_spec());
  std::vector<ClipRef> batch;
  for (std::size_t i = 0; i < 5; ++i) batch.push_back({i, 0, data.samples()[i].score});
  auto cfg = tiny_train(50);
  cfg.lr = 0.01;
  auto model = initial_model(tiny_model(), cfg);
  const auto curve = train_epochs(model, data, batch, cfg);
  REQUIRE(curve.size() == 50);
  CHECK(curve.back() < curve.front());
  CHECK(curve.back() < 0.5 * curve.front());
}

TEST_CASE("training rejects mismatched configurations") {
  const synth::SyntheticDataset data(tiny_spec());
  const auto split = make_cross_subject_splits(data.samples(), 2)[0];
  auto wrong_res = tiny_model();
  wrong_res.vtdm.height = 32;
  CHECK_THROWS_AS(train(data, split, wrong_res, tiny_train(1)), ConfigError);
  auto wrong_classes = tiny_train(1);
  wrong_classes.action.max_score = 4;
  CHECK_THROWS_AS(train(data, split, tiny_model(), wrong_classes), ConfigError);
  auto bad_lr = tiny_train(1);
  bad_lr.lr = 0.0;
  CHECK_THROWS_AS(train(data, split, tiny_model(), bad_lr), ConfigError);
  SplitPlan empty = split;
  empty.train.clear();
  CHECK_THROWS_AS(train(data, empty, tiny_model(), tiny_train(1)), ConfigError);
}

TEST_CASE("video score and evaluation on a trained model") {
  const synth::SyntheticDataset data(tiny_spec(3));
  const auto split = make_cross_subject_splits(data.samples(), 3)[1];
  auto result = train(data, split, tiny_model(), tiny_train(1));

  const auto s = video_score(result.model, data, split.test[0], 16);
  CHECK(s.clip_logits.size() == data.samples()[split.test[0]].frames / 16);
  CHECK(s.mean_logits.size() == 3);
  CHECK(s.predicted == static_cast<int>(argmax_lowest(s.mean_logits)));
  // Scoring does not disturb the model.
  const auto before = model_arrays(result.model);
  const auto again = video_score(result.model, data, split.test[0], 16);
  CHECK(again.mean_logits == s.mean_logits);
  CHECK(model_arrays(result.model) == before);

  EvalOptions one;
  EvalOptions three;
  three.jobs = 3;
  const auto a = evaluate(result.model, data, split.test, one);
  const auto b = evaluate(result.model, data, split.test, three);
  REQUIRE(a.rows.size() == split.test.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].sample_id == b.rows[i].sample_id);
    CHECK(a.rows[i].prediction == b.rows[i].prediction);
  }
  CHECK(a.rho == b.rho);

  TempDir dir;
  EvalReport r;
  r.rows = {{"x,1", 1, 2, 0, 1}, {"y", 1, 3, 2, 2}};
  r.rho = 1.0;
  r.write_csv(dir / "r.csv");
  std::ifstream in(dir / "r.csv");
  std::stringstream text;
  text << in.rdbuf();
  CHECK(text.str() ==
        "sample_id,subject,view,truth,prediction\n\"x,1\",1,2,0,1\ny,1,3,2,2\nspearman_rho,,,,1.000000\n");

  MovementSample tiny;
  tiny.joints = 15;
  tiny.frames = 8;
  tiny.height = 16;
  tiny.width = 16;
  tiny.heatmaps.assign(15 * 8 * 256, 0.5f);
  const InMemoryDataset short_video({tiny});
  CHECK_THROWS_AS(video_score(result.model, short_video, 0, 16), SequenceTooShort);
}
