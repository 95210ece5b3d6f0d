#include <cmath>
#include <numbers>

#include "vinet/errors.hpp"
#include "vinet/random.hpp"
#include "vinet/synth.hpp"

namespace vinet::synth {

namespace {

constexpr double kPi = std::numbers::pi;

using Pose = std::array<Point, kJointCount>;

// Everything that shapes one pose sequence. The nominal and the fully
// degraded motion differ only in these numbers.
struct Gait {
  double leg_amp[2] = {0.42, 0.42};  // right, left
  double knee_flex[2] = {0.55, 0.55};
  double arm_amp[2] = {0.35, 0.35};
  double hip_drop[2] = {0.0, 0.0};
  double lean = 0.0;
  double depth[2] = {1.0, 1.0};  // sit-stand knee travel per side
  double wrist_to_knee = 0.0;    // 1: hands pushing on the knees
  double crouch = 0.0;           // hip lowering, with matching knee bend
  double arm_raise = 0.0;        // upper arms held away from the body (rad)
};

struct Degradation {
  int side = 0;
  double stride_loss = 0.6;
  double lean = 0.3;
  double hip_drop = 0.04;
  double tremor = 0.03;
  double crouch = 0.1;
  double arm_raise = 0.8;
};

Degradation draw_degradation(std::uint64_t seed) {
  Rng rng(seed);
  Degradation d;
  d.side = rng.uniform() < 0.5 ? 0 : 1;
  d.stride_loss = rng.uniform(0.6, 0.8);
  d.lean = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 0.65);
  d.hip_drop = rng.uniform(0.05, 0.08);
  d.tremor = rng.uniform(0.03, 0.045);
  d.crouch = rng.uniform(0.12, 0.16);
  d.arm_raise = rng.uniform(1.1, 1.4);
  return d;
}

Gait degraded_gait(const Degradation& d) {
  Gait g;
  const int s = d.side;
  g.leg_amp[s] *= 1.0 - d.stride_loss;
  g.leg_amp[1 - s] *= 1.0 - 0.3 * d.stride_loss;
  g.knee_flex[s] *= 1.0 - d.stride_loss;
  g.arm_amp[0] *= 0.3;
  g.arm_amp[1] *= 0.3;
  g.hip_drop[s] = d.hip_drop;
  g.lean = d.lean;
  g.depth[s] = 1.0 - d.stride_loss;
  g.depth[1 - s] = 1.0 - 0.5 * d.stride_loss;
  g.wrist_to_knee = 0.8;
  g.crouch = d.crouch;
  g.arm_raise = d.arm_raise;
  return g;
}

Point rotate_about(Point p, Point c, double angle) {
  const double cs = std::cos(angle), sn = std::sin(angle);
  const double dx = p.x - c.x, dy = p.y - c.y;
  return {c.x + cs * dx - sn * dy, c.y + sn * dx + cs * dy};
}

Point limb(Point from, double length, double angle) {
  return {from.x + length * std::sin(angle), from.y + length * std::cos(angle)};
}

Point lerp(Point a, Point b, double w) { return {a.x + w * (b.x - a.x), a.y + w * (b.y - a.y)}; }

// Upper body above `hip`, leaning by `lean`; arms hang with the given swing.
void upper_body(Pose& p, Point hip, const SubjectStyle& st, double lean, const double swing[2], double raise) {
  p[kMidHip] = hip;
  p[kNeck] = {hip.x, hip.y - 0.42};
  p[kNose] = {hip.x + 0.02, hip.y - 0.56};
  const double half = 0.13 * st.shoulder;
  p[kRShoulder] = {p[kNeck].x - half, p[kNeck].y + 0.02};
  p[kLShoulder] = {p[kNeck].x + half, p[kNeck].y + 0.02};
  const std::size_t shoulder[2] = {kRShoulder, kLShoulder};
  const std::size_t elbow[2] = {kRElbow, kLElbow};
  const std::size_t wrist[2] = {kRWrist, kLWrist};
  const double outward[2] = {-raise, raise};
  for (int s = 0; s < 2; ++s) {
    p[elbow[s]] = limb(p[shoulder[s]], 0.17 * st.limb, swing[s] + outward[s]);
    p[wrist[s]] = limb(p[elbow[s]], 0.16 * st.limb, swing[s] + outward[s] + 0.35);
  }
  for (std::size_t j : {kNeck, kNose, kRShoulder, kLShoulder, kRElbow, kLElbow, kRWrist, kLWrist}) {
    p[j] = rotate_about(p[j], hip, lean);
  }
}

Pose walk_pose(const SubjectStyle& st, const Gait& g, double t) {
  const double phi = 2.0 * kPi * t / st.period + st.phase;
  const double side_phase[2] = {0.0, kPi};
  Pose p{};
  const Point hip{0.0, 0.05 + g.crouch + 0.015 * std::cos(2.0 * phi)};
  double swing[2];
  for (int s = 0; s < 2; ++s) swing[s] = -g.arm_amp[s] * std::sin(phi + side_phase[s]);
  upper_body(p, hip, st, g.lean, swing, g.arm_raise);

  const double half = 0.08 * st.shoulder;
  const std::size_t hips[2] = {kRHip, kLHip};
  const std::size_t knees[2] = {kRKnee, kLKnee};
  const std::size_t ankles[2] = {kRAnkle, kLAnkle};
  const double lateral[2] = {-half, half};
  for (int s = 0; s < 2; ++s) {
    const double ph = phi + side_phase[s];
    Point h{hip.x + lateral[s], hip.y + g.hip_drop[s] * std::max(0.0, std::sin(ph))};
    const double alpha = g.leg_amp[s] * std::sin(ph);
    const double kappa = g.knee_flex[s] * std::max(0.0, std::sin(ph + kPi / 2)) + 4.0 * g.crouch;
    p[hips[s]] = h;
    p[knees[s]] = limb(h, 0.24 * st.limb, alpha);
    p[ankles[s]] = limb(p[knees[s]], 0.24 * st.limb, alpha - kappa);
  }
  return p;
}

Pose sit_stand_pose(const SubjectStyle& st, const Gait& g, double t) {
  const double phi = 2.0 * kPi * t / st.period + st.phase;
  const double sit = 0.5 - 0.5 * std::cos(phi);  // 0 standing, 1 seated
  Pose p{};
  const double depth = 0.5 * (g.depth[0] + g.depth[1]);
  const Point hip{-0.2 * depth * sit, 0.1 + 0.22 * depth * sit};
  const double swing[2] = {0.25 * sit, 0.25 * sit};
  upper_body(p, hip, st, g.lean + 0.5 * depth * sit, swing, g.arm_raise);

  const double half = 0.08 * st.shoulder;
  const std::size_t hips[2] = {kRHip, kLHip};
  const std::size_t knees[2] = {kRKnee, kLKnee};
  const std::size_t ankles[2] = {kRAnkle, kLAnkle};
  const std::size_t wrists[2] = {kRWrist, kLWrist};
  const double lateral[2] = {-half, half};
  for (int s = 0; s < 2; ++s) {
    const Point ankle{lateral[s] * 1.1, 0.58};
    const double shin = 0.6 * g.depth[s] * sit;
    p[ankles[s]] = ankle;
    p[knees[s]] = {ankle.x + 0.24 * st.limb * std::sin(shin), ankle.y - 0.24 * st.limb * std::cos(shin)};
    p[hips[s]] = {hip.x + lateral[s], hip.y + g.hip_drop[s] * sit};
    p[wrists[s]] = lerp(p[wrists[s]], p[knees[s]], g.wrist_to_knee * sit);
  }
  return p;
}

Pose pose_at(MotionFamily family, const SubjectStyle& st, const Gait& g, double t) {
  Pose p = family == MotionFamily::walk ? walk_pose(st, g, t) : sit_stand_pose(st, g, t);
  for (auto& q : p) q = {st.scale * q.x + st.offset.x, st.scale * q.y + st.offset.y};
  return p;
}

}  // namespace

MotionFamily parse_motion_family(const std::string& text) {
  if (text == "walk") return MotionFamily::walk;
  if (text == "sit-stand") return MotionFamily::sit_stand;
  throw ConfigError("unknown motion family '" + text + "' (expected walk or sit-stand)");
}

std::string to_string(MotionFamily family) { return family == MotionFamily::walk ? "walk" : "sit-stand"; }

SubjectStyle SubjectStyle::draw(MotionFamily family, std::uint64_t seed) {
  Rng rng(seed);
  SubjectStyle s;
  s.scale = rng.uniform(0.85, 1.1);
  s.limb = rng.uniform(0.92, 1.08);
  s.shoulder = rng.uniform(0.9, 1.1);
  s.period = family == MotionFamily::walk ? rng.uniform(24.0, 40.0) : rng.uniform(40.0, 64.0);
  s.phase = rng.uniform(0.0, 2.0 * kPi);
  s.offset = {rng.uniform(-0.08, 0.08), rng.uniform(-0.06, 0.06)};
  return s;
}

CanonicalMotion generate_canonical_motion(MotionFamily family, int score, int max_score, std::uint64_t seed,
                                          std::size_t frames) {
  if (max_score < 1) throw ContractViolation("canonical motion: max score must be at least 1");
  if (score < 0 || score > max_score) {
    throw ContractViolation("canonical motion: score " + std::to_string(score) + " outside 0.." +
                            std::to_string(max_score));
  }
  if (frames == 0) throw ContractViolation("canonical motion: need at least one frame");
  const SubjectStyle style = SubjectStyle::draw(family, Rng::derive(seed, 1));
  const Degradation deg = draw_degradation(Rng::derive(seed, 2));
  const Gait nominal;
  const Gait worst = degraded_gait(deg);
  const double m = static_cast<double>(score) / static_cast<double>(max_score);
  Rng tremor(Rng::derive(seed, 3));

  CanonicalMotion motion;
  motion.family = family;
  motion.score = score;
  motion.max_score = max_score;
  motion.frames = frames;
  motion.seed = seed;
  motion.points.resize(frames * kJointCount);
  for (std::size_t t = 0; t < frames; ++t) {
    const Pose a = pose_at(family, style, nominal, static_cast<double>(t));
    const Pose b = pose_at(family, style, worst, static_cast<double>(t));
    for (std::size_t j = 0; j < kJointCount; ++j) {
      // Tremor is drawn for every score so the stream stays aligned across q.
      const double nx = tremor.normal(0.0, deg.tremor);
      const double ny = tremor.normal(0.0, deg.tremor);
      const Point target{b[j].x + nx, b[j].y + ny};
      motion.points[t * kJointCount + j] = {a[j].x + m * (target.x - a[j].x), a[j].y + m * (target.y - a[j].y)};
    }
  }
  return motion;
}

double deviation(const CanonicalMotion& motion, const CanonicalMotion& nominal) {
  if (motion.points.size() != nominal.points.size() || motion.points.empty()) {
    throw ContractViolation("deviation: motions differ in length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < motion.points.size(); ++i) {
    total += std::hypot(motion.points[i].x - nominal.points[i].x, motion.points[i].y - nominal.points[i].y);
  }
  return total / static_cast<double>(motion.points.size());
}

}  // namespace vinet::synth
