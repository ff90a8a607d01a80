#pragma once

#include <random>

#include <Eigen/Core>

namespace volplan {

// y = W x + b
struct Linear {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out

    Linear() = default;
    Linear(Eigen::Index in, Eigen::Index out)
        : weight(Eigen::MatrixXd::Zero(out, in)), bias(Eigen::VectorXd::Zero(out)) {}

    Eigen::Index in_features() const { return weight.cols(); }
    Eigen::Index out_features() const { return weight.rows(); }

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const { return weight * x + bias; }

    // Uniform(-1/sqrt(in), 1/sqrt(in)) for weight and bias.
    void init_uniform(std::mt19937_64& rng);
    void zero();

    struct Grad {
        Eigen::MatrixXd weight;
        Eigen::VectorXd bias;
        Eigen::VectorXd input;
    };
    Grad backward(const Eigen::VectorXd& x, const Eigen::VectorXd& grad_out) const;
};

// Two-layer perceptron with a rectified-linear hidden layer.
struct Mlp {
    Linear hidden;
    Linear output;

    Mlp() = default;
    Mlp(Eigen::Index in, Eigen::Index width, Eigen::Index out) : hidden(in, width), output(width, out) {}

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
    // Hidden pre-activations, exposed for kink detection in gradient checks.
    Eigen::VectorXd hidden_preactivation(const Eigen::VectorXd& x) const { return hidden.forward(x); }

    struct Grad {
        Linear::Grad hidden;
        Linear::Grad output;
        Eigen::VectorXd input;
    };
    Grad backward(const Eigen::VectorXd& x, const Eigen::VectorXd& grad_out) const;
};

// Logistic function clamped to the open interval (0, 1).
double sigmoid(double x);

}  // namespace volplan
