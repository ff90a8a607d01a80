#include "volplan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace volplan {

void Linear::init_uniform(std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(1, in_features())));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = dist(rng);
    for (Eigen::Index i = 0; i < bias.size(); ++i) bias[i] = dist(rng);
}

void Linear::zero() {
    weight.setZero();
    bias.setZero();
}

Linear::Grad Linear::backward(const Eigen::VectorXd& x, const Eigen::VectorXd& grad_out) const {
    return {grad_out * x.transpose(), grad_out, weight.transpose() * grad_out};
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
    return output.forward(hidden.forward(x).cwiseMax(0.0));
}

Mlp::Grad Mlp::backward(const Eigen::VectorXd& x, const Eigen::VectorXd& grad_out) const {
    const Eigen::VectorXd pre = hidden.forward(x);
    const Eigen::VectorXd act = pre.cwiseMax(0.0);
    Grad g;
    g.output = output.backward(act, grad_out);
    Eigen::VectorXd grad_pre = g.output.input;
    for (Eigen::Index i = 0; i < pre.size(); ++i) {
        if (pre[i] <= 0.0) grad_pre[i] = 0.0;
    }
    g.hidden = hidden.backward(x, grad_pre);
    g.input = g.hidden.input;
    return g;
}

double sigmoid(double x) {
    // Double precision saturates to exactly 0 or 1 far from the origin.
    constexpr double lo = std::numeric_limits<double>::min();
    const double hi = std::nextafter(1.0, 0.0);
    double s;
    if (x >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        s = e / (1.0 + e);
    }
    return std::clamp(s, lo, hi);
}

}  // namespace volplan
