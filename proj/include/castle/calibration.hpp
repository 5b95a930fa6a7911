#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "castle/errors.hpp"

namespace castle {

struct Point2 {
  double x = 0;
  double y = 0;
};

struct ProbePair {
  Point2 screen;  // where the sender clicked
  Point2 game;    // what the game logged
};

/// x' = a x + b y + c ;  y' = d x + e y + f
struct AffineTransform {
  double a = 1, b = 0, c = 0;
  double d = 0, e = 1, f = 0;

  Point2 apply(Point2 p) const { return {a * p.x + b * p.y + c, d * p.x + e * p.y + f}; }

  AffineTransform inverse() const {
    const double det = a * e - b * d;
    if (std::abs(det) < 1e-12) throw DegenerateFit("affine transform is singular");
    AffineTransform inv;
    inv.a = e / det;
    inv.b = -b / det;
    inv.d = -d / det;
    inv.e = a / det;
    inv.c = -(inv.a * c + inv.b * f);
    inv.f = -(inv.d * c + inv.e * f);
    return inv;
  }
};

struct Calibration {
  AffineTransform screen_to_game;
  double rms_residual = 0;  // in game cells

  Point2 to_game(Point2 screen) const { return screen_to_game.apply(screen); }
  Point2 to_screen(Point2 game) const { return screen_to_game.inverse().apply(game); }
};

/// Least-squares affine fit from probe clicks to logged game coordinates.
inline Calibration calibrate(const std::vector<ProbePair>& probes) {
  if (probes.size() < 3) throw DegenerateFit("calibration needs at least three probes");
  const auto rows = static_cast<Eigen::Index>(probes.size());
  Eigen::MatrixXd design(rows, 3);
  Eigen::VectorXd gx(rows), gy(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& p = probes[static_cast<std::size_t>(i)];
    design(i, 0) = p.screen.x;
    design(i, 1) = p.screen.y;
    design(i, 2) = 1.0;
    gx(i) = p.game.x;
    gy(i) = p.game.y;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw DegenerateFit("calibration probes are collinear");
  const Eigen::Vector3d px = qr.solve(gx);
  const Eigen::Vector3d py = qr.solve(gy);

  Calibration cal;
  cal.screen_to_game = {px(0), px(1), px(2), py(0), py(1), py(2)};
  double ss = 0;
  for (const auto& p : probes) {
    const auto g = cal.to_game(p.screen);
    ss += (g.x - p.game.x) * (g.x - p.game.x) + (g.y - p.game.y) * (g.y - p.game.y);
  }
  cal.rms_residual = std::sqrt(ss / static_cast<double>(probes.size()));
  return cal;
}

}  // namespace castle
