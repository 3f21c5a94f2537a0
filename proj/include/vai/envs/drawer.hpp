#pragma once

#include <array>

namespace vai::envs {

using Vec3 = std::array<double, 3>;

// Drawer manipulation geometry: effector (gripper), object, and goal positions.
struct DrawerGeometry {
  Vec3 effector{0.0, 0.0, 0.0};
  Vec3 object{0.0, 0.0, 0.0};
  Vec3 goal{0.0, 0.0, 0.0};
};

struct DrawerRewardParams {
  double eps_reach = 0.08;    // reach gate on |effector - object|
  double c1 = 1000.0;
  double c2 = 0.01;
  double eps_success = 0.08;  // 8 cm
};

double distance(const Vec3& a, const Vec3& b);

// Reach + gated push reward:
//   R = -|h-p| + 1{|h-p| < eps_reach} * c1 * exp(sign * |p-g|^2 / c2)
// The bounded form uses exponent_sign = -1 (default); +1 reproduces the
// unbounded variant.
double drawer_reward(const DrawerGeometry& geom, const DrawerRewardParams& params,
                     int exponent_sign = -1);

// Success indicator 1{|p-g| < eps}; strict inequality.
bool drawer_success(const Vec3& object, const Vec3& goal, double eps_success);

}  // namespace vai::envs
