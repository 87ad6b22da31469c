#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace trt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;

// Bad configuration, bad file, dimension mismatch, infeasible setup.
// CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A plan could not be produced for the given world state.
struct PlanningError : std::runtime_error {
  explicit PlanningError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace trt
