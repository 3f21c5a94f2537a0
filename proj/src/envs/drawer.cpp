#include "vai/envs/drawer.hpp"

#include <cmath>
#include <stdexcept>

namespace vai::envs {

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double drawer_reward(const DrawerGeometry& geom, const DrawerRewardParams& params,
                     int exponent_sign) {
  if (exponent_sign != 1 && exponent_sign != -1)
    throw std::invalid_argument("drawer_reward: exponent_sign must be +1 or -1");
  const double reach_dist = distance(geom.effector, geom.object);
  double r = -reach_dist;
  if (reach_dist < params.eps_reach) {
    const double push_dist = distance(geom.object, geom.goal);
    r += params.c1 * std::exp(exponent_sign * push_dist * push_dist / params.c2);
  }
  return r;
}

bool drawer_success(const Vec3& object, const Vec3& goal, double eps_success) {
  return distance(object, goal) < eps_success;
}

}  // namespace vai::envs
