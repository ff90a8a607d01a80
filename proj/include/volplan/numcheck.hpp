#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace volplan {

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;

// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps). Throws
// std::domain_error naming the coordinate when an evaluation is not finite.
Eigen::VectorXd finite_diff_grad(const ScalarFn& f, const Eigen::VectorXd& x, double eps);
Eigen::VectorXd finite_diff_grad(const ScalarFn& f, const Eigen::VectorXd& x, const Eigen::VectorXd& eps);

struct GradCheckReport {
    std::string op;
    double max_rel = 0.0;
    double max_abs = 0.0;
    std::size_t worst_index = 0;
    std::size_t coordinates = 0;
    double tol_rel = 0.0;
    double tol_abs = 0.0;
    bool pass = false;
};

// A scalar probe of one operation: f is the op contracted with a fixed random
// direction, `analytic` its gradient from the hand-written backward pass.
struct GradCase {
    ScalarFn f;
    Eigen::VectorXd x;
    Eigen::VectorXd analytic;
    Eigen::VectorXd eps;  // per coordinate
};

inline constexpr double kRelFloor = 1e-8;
inline constexpr double kDefaultTolAbs = 1e-8;

// Coordinate i passes when |a - n| / max(|a|, |n|, 1e-8) <= tol_rel or
// |a - n| <= tol_abs.
GradCheckReport compare_gradients(const std::string& op, const Eigen::VectorXd& analytic,
                                  const Eigen::VectorXd& numeric, double tol_rel, double tol_abs = kDefaultTolAbs);

const std::vector<std::string>& registered_ops();
bool is_registered(const std::string& op);

// Deterministic probe of a registered op; throws std::out_of_range otherwise.
GradCase make_grad_case(const std::string& op, std::uint64_t seed);

GradCheckReport check_grad(const std::string& op, const GradCase& c, double tol_rel,
                           double tol_abs = kDefaultTolAbs);
GradCheckReport check_grad(const std::string& op, std::uint64_t seed, double tol_rel,
                           double tol_abs = kDefaultTolAbs);

std::string reports_to_json(std::span<const GradCheckReport> reports);

}  // namespace volplan
