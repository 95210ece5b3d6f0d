#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

#include "acceptance.hpp"
#include "../support/oracles.hpp"
#include "../support/temp_dir.hpp"
#include "vinet/errors.hpp"
#include "vinet/model.hpp"
#include "vinet/ops.hpp"
#include "vinet/random.hpp"
#include "vinet/synth.hpp"
#include "vinet/train.hpp"
#include "vinet/vtdm.hpp"

namespace vinet::acceptance {

std::string Failures::summary() const {
  std::string s = std::to_string(checked_ - failed_) + "/" + std::to_string(checked_) + " checks";
  for (const auto& m : messages_) s += "; " + m;
  return s;
}

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true, double lo = -1.0, double hi = 1.0) {
  const std::size_t n = shape_numel(shape);
  return Tensor::from_data(std::move(shape), oracle::random_vector(n, rng, lo, hi), requires_grad);
}

Tensor kink_free(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.05, 1.0);
  return Tensor::from_data(std::move(shape), std::move(v), true);
}

Tensor readout(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  auto w = Tensor::from_data(y.shape(), oracle::random_vector(y.numel(), rng), false);
  return sum(mul(y, w));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

char buf[256];

}  // namespace

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::map<std::string, double> worst;
  std::string worst_where;
  double overall = 0.0;
  auto note = [&](const std::string& op, const oracle::GradCheckResult& r) {
    worst[op] = std::max(worst[op], r.max_rel_error);
    if (r.max_rel_error >= overall) {
      overall = r.max_rel_error;
      worst_where = op + " " + r.worst;
    }
  };
  for (std::uint64_t seed = 0; seed < kGradSeeds; ++seed) {
    Rng rng(1000 + seed);
    const std::size_t stride = 1 + seed % 2, pad = seed % 3;
    auto x = random_tensor({2, 2, 6, 5}, rng);
    auto w = random_tensor({3, 2, 3, 3}, rng);
    auto b = random_tensor({3}, rng);
    note("conv2d", oracle::grad_check([&] { return readout(conv2d(x, w, b, stride, pad), seed); }, {x, w, b}));

    auto p = random_tensor({2, 7, 6}, rng);
    note("maxpool2d", oracle::grad_check([&] { return readout(maxpool2d(p, 2 + seed % 2, 2), seed); }, {p}));

    auto k = kink_free({3, 5}, rng);
    note("relu", oracle::grad_check([&] { return readout(relu(k), seed); }, {k}));

    auto bx = random_tensor({3, 2, 3, 3}, rng);
    auto gamma = random_tensor({2}, rng);
    auto beta = random_tensor({2}, rng);
    BatchNormState st(2);
    note("batchnorm2d", oracle::grad_check([&] { return readout(batchnorm2d(bx, gamma, beta, st, Mode::train), seed); },
                                           {bx, gamma, beta}));
    note("batchnorm2d", oracle::grad_check([&] { return readout(batchnorm2d(bx, gamma, beta, st, Mode::eval), seed); },
                                           {bx, gamma, beta}));

    auto lx = random_tensor({3, 6}, rng);
    auto lw = random_tensor({4, 6}, rng);
    auto lb = random_tensor({4}, rng);
    note("linear", oracle::grad_check([&] { return readout(linear(lx, lw, lb), seed); }, {lx, lw, lb}));

    auto logits = random_tensor({4, 5}, rng, true, -4, 4);
    std::vector<int> labels(4);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(0, 4));
    note("softmax_cross_entropy", oracle::grad_check([&] { return softmax_cross_entropy(logits, labels); }, {logits}));

    auto img = random_tensor({2, 2, 5, 6}, rng);
    std::vector<double> th;
    for (int n = 0; n < 2; ++n) {
      th.insert(th.end(), {rng.uniform(0.6, 1.2), rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(0.6, 1.2)});
    }
    auto theta = Tensor::from_data({2, 4}, th, true);
    note("bilinear_sample", oracle::grad_check(
                                [&] { return readout(bilinear_sample(img, affine_grid(theta, 4, 5)), seed); }, {img, theta}));

    auto vol = random_tensor({2, 4, 5, 5}, rng);
    auto phi = random_tensor({1, 4, 3, 3}, rng);
    auto phi_b = random_tensor({1}, rng);
    note("trajectory_descriptor",
         oracle::grad_check([&] { return readout(trajectory_descriptor(vol, phi, phi_b), seed); }, {vol, phi, phi_b}));

    auto gx = random_tensor({2, 3, 3, 4}, rng);
    note("global_avg_pool", oracle::grad_check([&] { return readout(global_avg_pool(gx), seed); }, {gx}));

    // VTDM + MSM at 16 x 16, transformer on, theta moved off the identity.
    ModelConfig cfg;
    cfg.vtdm.height = cfg.vtdm.width = 16;
    VinetModel model(cfg, seed);
    for (auto& v : model.vtdm.loc_fc2_w.mutable_values()) v = rng.uniform(-1e-3, 1e-3);
    auto fc2b = model.vtdm.loc_fc2_b.mutable_values();
    fc2b[0] = rng.uniform(0.85, 0.95);
    fc2b[1] = rng.uniform(-0.1, 0.1);
    fc2b[2] = rng.uniform(-0.1, 0.1);
    fc2b[3] = rng.uniform(0.85, 0.95);
    auto clips = random_tensor({2, 15, 16, 16, 16}, rng, false, 0, 1);
    std::vector<Tensor> params;
    for (auto& prm : model.trainable_parameters()) params.push_back(prm.tensor);
    const std::vector<int> y{static_cast<int>(seed % 5), static_cast<int>((seed + 2) % 5)};
    note("vtdm+msm 16x16", oracle::grad_check(
                               [&] { return softmax_cross_entropy(model.forward(clips, Mode::train), y); }, params,
                               1e-4, 4, seed));
  }
  const double elapsed = seconds_since(t0);
  std::string detail;
  for (const auto& [op, e] : worst) {
    std::snprintf(buf, sizeof buf, "%s %.1e, ", op.c_str(), e);
    detail += buf;
  }
  std::snprintf(buf, sizeof buf, "%zu seeds, max rel err %.2e (tol %.0e), %.1f s (budget %.0f s)", kGradSeeds,
                overall, kGradTolerance, elapsed, kGradBudgetSeconds);
  detail = buf + std::string("; ") + detail;
  const bool pass = overall < kGradTolerance && elapsed < kGradBudgetSeconds;
  if (overall >= kGradTolerance) detail += "worst at " + worst_where;
  return {pass, detail};
}

Outcome stn_exactness() {
  Failures f;
  Rng rng(2024);
  // Identity theta reproduces the input.
  double identity_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = static_cast<std::size_t>(rng.uniform_int(2, 40));
    const auto w = static_cast<std::size_t>(rng.uniform_int(2, 40));
    auto img = random_tensor({2, 3, h, w}, rng, false, -5, 5);
    auto theta = Tensor::from_data({2, 4}, {1, 0, 0, 1, 1, 0, 0, 1});
    auto out = bilinear_sample(img, affine_grid(theta, h, w));
    for (std::size_t i = 0; i < img.numel(); ++i) {
      identity_err = std::max(identity_err, std::abs(out.values()[i] - img.values()[i]));
    }
    auto grid = affine_grid(Tensor::from_data({4}, {1, 0, 0, 1}), h, w);
    const auto base = base_grid(h, w);
    for (std::size_t i = 0; i < base.size(); ++i) f.expect(grid.values()[i] == base[i], "identity grid differs");
  }
  f.expect(identity_err <= kIdentityTolerance, "identity reproduction error " + std::to_string(identity_err));

  // Sampler linearity: dyadic grid and integer images keep every product exact.
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> pts;
    for (int i = 0; i < 40; ++i) pts.push_back(-1.5 + 0.125 * static_cast<double>(rng.uniform_int(0, 24)));
    auto grid = Tensor::from_data({1, 4, 5, 2}, pts);
    std::vector<double> a(54), b(54), ab(54);
    const double ca = static_cast<double>(rng.uniform_int(-4, 4)), cb = static_cast<double>(rng.uniform_int(-4, 4));
    for (std::size_t i = 0; i < 54; ++i) {
      a[i] = static_cast<double>(rng.uniform_int(-100, 100));
      b[i] = static_cast<double>(rng.uniform_int(-100, 100));
      ab[i] = ca * a[i] + cb * b[i];
    }
    auto sa = bilinear_sample(Tensor::from_data({1, 2, 3, 9}, a), grid);
    auto sb = bilinear_sample(Tensor::from_data({1, 2, 3, 9}, b), grid);
    auto sab = bilinear_sample(Tensor::from_data({1, 2, 3, 9}, ab), grid);
    for (std::size_t i = 0; i < sab.numel(); ++i) {
      f.expect(sab.values()[i] == ca * sa.values()[i] + cb * sb.values()[i], "sampler not exactly linear");
    }
  }

  // Grid composition: Gamma_{AB}(G) = A Gamma_B(G).
  double comp_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    AffineParams a, b;
    for (auto& v : a.theta) v = rng.uniform(-2, 2);
    for (auto& v : b.theta) v = rng.uniform(-2, 2);
    const auto h = static_cast<std::size_t>(rng.uniform_int(2, 12));
    const auto w = static_cast<std::size_t>(rng.uniform_int(2, 12));
    const auto& ab = a.compose(b).theta;
    auto composed = affine_grid(Tensor::from_data({4}, {ab[0], ab[1], ab[2], ab[3]}), h, w);
    auto inner = affine_grid(Tensor::from_data({4}, {b.theta[0], b.theta[1], b.theta[2], b.theta[3]}), h, w);
    for (std::size_t p = 0; p < h * w; ++p) {
      const double x = inner.values()[2 * p], y = inner.values()[2 * p + 1];
      comp_err = std::max(comp_err, std::abs(composed.values()[2 * p] - (a.theta[0] * x + a.theta[1] * y)));
      comp_err = std::max(comp_err, std::abs(composed.values()[2 * p + 1] - (a.theta[2] * x + a.theta[3] * y)));
    }
  }
  f.expect(comp_err <= kCompositionTolerance, "composition error " + std::to_string(comp_err));

  // Out of bounds: points whose every tap lies outside read exactly zero;
  // partially outside points match the zero-padded oracle.
  double oob_err = 0.0;
  std::size_t outside = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = 6, w = 7;
    auto img = random_tensor({1, 1, h, w}, rng, false, 0.5, 2.0);
    auto grid = random_tensor({1, 6, 6, 2}, rng, false, -3, 3);
    auto out = bilinear_sample(img, grid);
    for (std::size_t p = 0; p < 36; ++p) {
      const double px = (grid.values()[2 * p] + 1) / 2 * (w - 1), py = (grid.values()[2 * p + 1] + 1) / 2 * (h - 1);
      const bool all_out = px <= -1 || px >= static_cast<double>(w) || py <= -1 || py >= static_cast<double>(h);
      if (all_out) {
        ++outside;
        f.expect(out.values()[p] == 0.0, "outside point did not read zero");
      }
      oob_err = std::max(oob_err, std::abs(out.values()[p] - oracle::bilinear(img.values(), h, w, px, py)));
    }
  }
  f.expect(outside > 500, "too few outside points drawn");
  f.expect(oob_err <= kIdentityTolerance, "zero-padding oracle mismatch " + std::to_string(oob_err));

  std::snprintf(buf, sizeof buf, "identity err %.1e, composition err %.1e, %zu fully outside points; ", identity_err,
                comp_err, outside);
  return {f.ok(), buf + f.summary()};
}

Outcome oracle_equivalence() {
  Failures f;
  Rng rng(77);
  double conv_err = 0.0, pool_err = 0.0, lin_err = 0.0;
  std::size_t conv_shapes = 0, pool_shapes = 0;
  for (std::size_t c = 1; c <= 3; ++c)
    for (std::size_t h = 1; h <= 5; ++h)
      for (std::size_t w = 1; w <= 5; ++w)
        for (std::size_t k = 1; k <= 3; ++k)
          for (std::size_t stride = 1; stride <= 2; ++stride)
            for (std::size_t pad = 0; pad <= 2; ++pad) {
              if (h + 2 * pad < k || w + 2 * pad < k) continue;
              const std::size_t out_c = 1 + (c + h + k) % 3;
              auto x = random_tensor({2, c, h, w}, rng, false);
              auto wt = random_tensor({out_c, c, k, k}, rng, false);
              auto b = random_tensor({out_c}, rng, false);
              auto y = conv2d(x, wt, b, stride, pad);
              const std::size_t per = c * h * w;
              for (std::size_t n = 0; n < 2; ++n) {
                auto ref = oracle::conv2d(x.values().subspan(n * per, per), c, h, w, wt.values(), out_c, k, b.values(),
                                          stride, pad);
                for (std::size_t i = 0; i < ref.size(); ++i) {
                  conv_err = std::max(conv_err, std::abs(y.values()[n * ref.size() + i] - ref[i]));
                }
              }
              ++conv_shapes;
            }
  for (std::size_t c = 1; c <= 3; ++c)
    for (std::size_t h = 1; h <= 7; ++h)
      for (std::size_t w = 1; w <= 7; ++w)
        for (std::size_t win = 1; win <= 3; ++win)
          for (std::size_t stride = 1; stride <= 3; ++stride) {
            if (h < win || w < win) continue;
            auto x = random_tensor({c, h, w}, rng, false);
            auto y = maxpool2d(x, win, stride);
            auto ref = oracle::maxpool2d(x.values(), c, h, w, win, stride);
            f.expect(y.numel() == ref.size(), "maxpool output size");
            for (std::size_t i = 0; i < std::min(ref.size(), y.numel()); ++i) {
              pool_err = std::max(pool_err, std::abs(y.values()[i] - ref[i]));
            }
            ++pool_shapes;
          }
  for (std::size_t rows = 1; rows <= 8; ++rows)
    for (std::size_t cols = 1; cols <= 8; ++cols) {
      auto x = random_tensor({cols}, rng, false);
      auto wt = random_tensor({rows, cols}, rng, false);
      auto b = random_tensor({rows}, rng, false);
      auto y = linear(x, wt, b);
      auto ref = oracle::matvec(wt.values(), rows, cols, x.values(), b.values());
      for (std::size_t i = 0; i < rows; ++i) lin_err = std::max(lin_err, std::abs(y.values()[i] - ref[i]));
    }
  f.expect(conv_err <= kOracleTolerance, "conv2d oracle error " + std::to_string(conv_err));
  f.expect(pool_err == 0.0, "maxpool2d oracle error " + std::to_string(pool_err));
  f.expect(lin_err <= kOracleTolerance, "linear oracle error " + std::to_string(lin_err));

  double rho_err = 0.0;
  std::size_t with_ties = 0;
  for (std::size_t trial = 0; trial < kSpearmanVectors;) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(2, 40));
    const auto levels = rng.uniform_int(1, 8);
    std::vector<double> pred(n), truth(n);
    for (auto& v : pred) v = static_cast<double>(rng.uniform_int(0, levels));
    for (auto& v : truth) v = static_cast<double>(rng.uniform_int(0, 4));
    auto constant = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
    };
    if (constant(pred) || constant(truth)) continue;
    const double got = evaluate_spearman(pred, truth);
    const double want = oracle::spearman(pred, truth);
    rho_err = std::max(rho_err, std::abs(got - want));
    std::vector<double> sorted = pred;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) ++with_ties;
    ++trial;
  }
  f.expect(rho_err < kSpearmanTolerance, "spearman oracle error " + std::to_string(rho_err));
  f.expect(with_ties > kSpearmanVectors / 2, "too few tied vectors");

  double ce_err = 0.0;
  for (int s = 1; s <= 12; ++s) {
    const auto k = static_cast<std::size_t>(s + 1);
    for (double level : {-3.0, 0.0, 7.5}) {
      auto logits = Tensor::full({k}, level);
      for (int label = 0; label <= s; ++label) {
        ce_err = std::max(ce_err, std::abs(softmax_cross_entropy(logits, label).item() - std::log(double(k))));
      }
    }
  }
  // Logits (0, ln 3) with label 0: -log(1 / (1 + 3)) = ln 4.
  ce_err = std::max(ce_err, std::abs(softmax_cross_entropy(Tensor::from_data({2}, {0.0, std::log(3.0)}), 0).item() -
                                     std::log(4.0)));
  for (int trial = 0; trial < 200; ++trial) {
    auto logits = random_tensor({5}, rng, false, -6, 6);
    const auto label = static_cast<int>(rng.uniform_int(0, 4));
    const double want = oracle::cross_entropy(logits.values(), static_cast<std::size_t>(label));
    ce_err = std::max(ce_err, std::abs(softmax_cross_entropy(logits, label).item() - want));
  }
  f.expect(ce_err <= kOracleTolerance, "cross-entropy error " + std::to_string(ce_err));

  std::snprintf(buf, sizeof buf,
                "conv2d %zu shapes err %.1e, maxpool2d %zu shapes err %.1e, linear err %.1e, spearman %zu vectors "
                "(%zu tied) err %.1e, cross-entropy err %.1e; ",
                conv_shapes, conv_err, pool_shapes, pool_err, lin_err, kSpearmanVectors, with_ties, rho_err, ce_err);
  return {f.ok(), buf + f.summary()};
}

Outcome protocol_conformance() {
  Failures f;
  std::size_t plans = 0;
  auto hygienic = [&](const SplitPlan& plan, const std::vector<SampleInfo>& samples) {
    ++plans;
    try {
      plan.check_hygiene(samples);
      f.expect(!plan.train.empty() && !plan.test.empty(), plan.label() + " has an empty side");
      f.expect(plan.train.size() + plan.test.size() <= samples.size(), plan.label() + " repeats samples");
    } catch (const std::exception& e) {
      f.expect(false, plan.label() + ": " + e.what());
    }
  };
  synth::DatasetSpec spec;
  spec.height = spec.width = 16;
  const synth::SyntheticDataset data(spec);
  const auto& samples = data.samples();
  for (std::size_t k : {2u, 3u, 5u, 10u, 20u}) {
    for (const auto& plan : make_cross_subject_splits(samples, k)) hygienic(plan, samples);
  }
  for (const auto& plan : make_single_view_splits(samples)) hygienic(plan, samples);
  for (const auto& plan : make_view_pair_splits(samples, {1, 2, 3}, {4, 5, 6})) hygienic(plan, samples);
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> views;
    for (int v = 1; v <= 6; ++v)
      if (rng.uniform() < 0.5) views.push_back(v);
    if (views.empty() || views.size() == 6) continue;
    hygienic(make_cross_view_split(samples, views), samples);
  }

  std::size_t invariance_trials = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 8));
    const auto k = static_cast<std::size_t>(rng.uniform_int(2, 13));
    std::vector<std::vector<double>> logits(m);
    for (auto& row : logits) row = oracle::random_vector(k, rng, -4, 4);
    const int base = score_from_clip_logits(logits, ScoringRule::mean_logits).predicted;
    auto shifted = logits;
    for (auto& row : shifted) {
      const double c = rng.uniform(-20, 20);
      for (auto& v : row) v += c;
    }
    f.expect(score_from_clip_logits(shifted, ScoringRule::mean_logits).predicted == base, "per-clip shift moved s");
    auto mapped = logits;
    const double a = rng.uniform(0.01, 10), b = rng.uniform(-10, 10);
    for (auto& row : mapped)
      for (auto& v : row) v = a * v + b;
    f.expect(score_from_clip_logits(mapped, ScoringRule::mean_logits).predicted == base, "affine map moved s");
    ++invariance_trials;
  }

  // Two identical training runs.
  synth::DatasetSpec small;
  small.subjects = 4;
  small.views = 2;
  small.min_frames = 32;
  small.max_frames = 40;
  small.height = small.width = 16;
  small.sigma = 1.0;
  const synth::SyntheticDataset tiny(small);
  const auto split = make_cross_subject_splits(tiny.samples(), 2)[0];
  ModelConfig mc;
  mc.vtdm.height = mc.vtdm.width = 16;
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 99;
  auto a = train(tiny, split, mc, tc);
  auto b = train(tiny, split, mc, tc);
  f.expect(a.epoch_loss.size() == 3, "loss curve length");
  f.expect(a.epoch_loss == b.epoch_loss, "loss curves differ between runs");
  f.expect(model_arrays(a.model) == model_arrays(b.model), "trained weights differ between runs");

  std::snprintf(buf, sizeof buf, "%zu split plans hygienic, %zu video_score invariance trials, loss curve [", plans,
                invariance_trials);
  std::string detail = buf;
  for (std::size_t i = 0; i < a.epoch_loss.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.6f", i ? " " : "", a.epoch_loss[i]);
    detail += buf;
  }
  return {f.ok(), detail + "] repeated bit-identically; " + f.summary()};
}

Outcome format_round_trip() {
  Failures f;
  TempDir dir;
  Rng rng(8);
  for (std::size_t i = 0; i < kRoundTrips; ++i) {
    MovementSample s;
    s.joints = static_cast<std::size_t>(rng.uniform_int(1, 16));
    s.frames = static_cast<std::size_t>(rng.uniform_int(1, 20));
    s.height = static_cast<std::size_t>(rng.uniform_int(1, 12));
    s.width = static_cast<std::size_t>(rng.uniform_int(1, 12));
    s.heatmaps.resize(s.joints * s.frames * s.height * s.width);
    for (auto& v : s.heatmaps) {
      // Random non-negative finite bit patterns, subnormals included.
      std::uint32_t bits;
      do {
        bits = static_cast<std::uint32_t>(rng.next_u64()) & 0x7FFFFFFFu;
      } while ((bits >> 23) == 0xFF);
      std::memcpy(&v, &bits, 4);
    }
    const auto path = dir / ("s" + std::to_string(i) + ".vihm");
    save_sequence(s, path);
    const auto back = load_sequence(path);
    f.expect(back.joints == s.joints && back.frames == s.frames && back.height == s.height && back.width == s.width,
             "dimensions changed");
    f.expect(back.heatmaps.size() == s.heatmaps.size() &&
                 std::memcmp(back.heatmaps.data(), s.heatmaps.data(), s.heatmaps.size() * 4) == 0,
             "payload changed");
  }

  auto header = [&](const std::string& name, const char* magic, std::uint32_t version,
                    std::array<std::uint32_t, 4> dims, std::size_t payload_floats) {
    std::ofstream out(dir / name, std::ios::binary);
    out.write(magic, 4);
    out.write(reinterpret_cast<const char*>(&version), 4);
    for (auto d : dims) out.write(reinterpret_cast<const char*>(&d), 4);
    std::vector<float> payload(payload_floats, 0.0f);
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * 4));
  };
  auto expect_offset = [&](const std::string& name, std::uint64_t offset) {
    try {
      load_sequence(dir / name);
      f.expect(false, name + " accepted");
    } catch (const FormatError& e) {
      f.expect(e.offset() == offset && std::string(e.what()).find(std::to_string(offset)) != std::string::npos,
               name + " reported offset " + std::to_string(e.offset()));
    }
  };
  header("magic.vihm", "VIHX", 1, {1, 1, 1, 1}, 1);
  expect_offset("magic.vihm", 0);
  header("version.vihm", "VIHM", 7, {1, 1, 1, 1}, 1);
  expect_offset("version.vihm", 4);
  header("joints.vihm", "VIHM", 1, {0, 1, 1, 1}, 0);
  expect_offset("joints.vihm", 8);
  header("frames.vihm", "VIHM", 1, {1, 0, 1, 1}, 0);
  expect_offset("frames.vihm", 12);
  header("height.vihm", "VIHM", 1, {1, 1, 0, 1}, 0);
  expect_offset("height.vihm", 16);
  header("width.vihm", "VIHM", 1, {1, 1, 1, 0}, 0);
  expect_offset("width.vihm", 20);
  header("short.vihm", "VIHM", 1, {2, 3, 4, 5}, 119);
  expect_offset("short.vihm", 24 + 119 * 4);
  header("long.vihm", "VIHM", 1, {1, 1, 2, 2}, 5);
  expect_offset("long.vihm", 24 + 16);
  {
    std::ofstream out(dir / "stub.vihm", std::ios::binary);
    out.write("VIHM\x01\x00\x00\x00\x02\x00", 10);
  }
  try {
    load_sequence(dir / "stub.vihm");
    f.expect(false, "truncated header accepted");
  } catch (const FormatError& e) {
    f.expect(e.offset() <= 10, "truncated header offset " + std::to_string(e.offset()));
  }
  std::snprintf(buf, sizeof buf, "%zu random samples round-tripped, 9 malformed files; ", kRoundTrips);
  return {f.ok(), buf + f.summary()};
}

}  // namespace vinet::acceptance
