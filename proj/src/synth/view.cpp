#include <cmath>
#include <numbers>

#include "vinet/errors.hpp"
#include "vinet/synth.hpp"

namespace vinet::synth {

namespace {

ViewTransform make_view(int id, double rotate_deg, double sx, double sy, double shear, double tx, double ty) {
  // A = R * [[sx, shear * sx], [0, sy]]
  const double r = rotate_deg * std::numbers::pi / 180.0;
  const double c = std::cos(r), s = std::sin(r);
  const double m[4] = {sx, shear * sx, 0.0, sy};
  ViewTransform v;
  v.view_id = id;
  v.a = {c * m[0] - s * m[2], c * m[1] - s * m[3], s * m[0] + c * m[2], s * m[1] + c * m[3]};
  v.t = {tx, ty};
  return v;
}

}  // namespace

void ViewTransform::validate() const {
  for (double v : a)
    if (!std::isfinite(v)) throw ContractViolation("view transform: non-finite matrix entry");
  if (!std::isfinite(t[0]) || !std::isfinite(t[1])) throw ContractViolation("view transform: non-finite translation");
  if (det() <= kMinViewDeterminant) {
    throw ContractViolation("view transform " + std::to_string(view_id) + ": degenerate matrix, det " +
                            std::to_string(det()) + " <= " + std::to_string(kMinViewDeterminant));
  }
}

ViewTransform ViewTransform::inverse() const {
  validate();
  const double d = det();
  ViewTransform inv;
  inv.view_id = view_id;
  inv.a = {a[3] / d, -a[1] / d, -a[2] / d, a[0] / d};
  inv.t = {-(inv.a[0] * t[0] + inv.a[1] * t[1]), -(inv.a[2] * t[0] + inv.a[3] * t[1])};
  return inv;
}

ViewTransform default_view(int view_id) {
  switch (view_id) {
    case 1: return make_view(1, -10.0, 0.92, 0.95, 0.0, -0.06, 0.02);
    case 2: return make_view(2, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0);
    case 3: return make_view(3, 8.0, 1.06, 1.02, 0.0, 0.05, -0.02);
    case 4: return make_view(4, 0.0, 0.55, 1.0, 0.18, -0.1, 0.0);
    case 5: return make_view(5, 0.0, 0.6, 0.97, 0.0, 0.04, 0.01);
    case 6: return make_view(6, -6.0, 0.5, 1.04, -0.12, 0.1, -0.03);
    default: throw ContractViolation("no camera defined for view " + std::to_string(view_id) + " (views are 1..6)");
  }
}

ViewTrajectories apply_view_transform(const CanonicalMotion& motion, const ViewTransform& view) {
  view.validate();
  ViewTrajectories out;
  out.frames = motion.frames;
  out.points.reserve(motion.points.size());
  for (const Point& p : motion.points) out.points.push_back(view.apply(p));
  return out;
}

std::vector<float> render_frames(const ViewTrajectories& traj, std::size_t start, std::size_t count,
                                 std::size_t height, std::size_t width, double sigma) {
  if (!(sigma > 0.0)) throw ContractViolation("render: sigma must be positive");
  if (height == 0 || width == 0) throw ContractViolation("render: empty raster");
  if (start + count > traj.frames) throw ContractViolation("render: frame range outside the trajectories");
  const std::size_t plane = height * width;
  std::vector<float> out(kJointCount * count * plane, 0.0f);
  std::vector<double> gx(width), gy(height);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t j = 0; j < kJointCount; ++j) {
    for (std::size_t f = 0; f < count; ++f) {
      const Point& p = traj.at(start + f, j);
      const double px = to_pixel(p.x, width), py = to_pixel(p.y, height);
      for (std::size_t x = 0; x < width; ++x) gx[x] = std::exp(-(static_cast<double>(x) - px) * (static_cast<double>(x) - px) * inv);
      for (std::size_t y = 0; y < height; ++y) gy[y] = std::exp(-(static_cast<double>(y) - py) * (static_cast<double>(y) - py) * inv);
      float* dst = out.data() + (j * count + f) * plane;
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) dst[y * width + x] = static_cast<float>(gy[y] * gx[x]);
    }
  }
  return out;
}

std::vector<float> render_heatmaps(const ViewTrajectories& traj, std::size_t height, std::size_t width, double sigma) {
  return render_frames(traj, 0, traj.frames, height, width, sigma);
}

}  // namespace vinet::synth
