#pragma once

#include <array>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "volplan/nn.hpp"

namespace volplan {

// Signed relative-distance binning shared by every axis table.
//
// Bins are numbered left to right over the real line:
//   0..7    log-scale, (-128, -8) in magnitude-halving steps, anything below -128 lands in 0
//   8..23   unit-width linear bins [k, k+1) for k = -8..7, the last one closed at +8
//   24..31  log-scale, (8, 128], anything above 128 lands in 31
// Log edges are 8 * 2^(j/2), j = 0..8.
inline constexpr int kBiasBins = 32;
inline constexpr int kLogBinsPerSide = 8;
inline constexpr int kLinearBins = 16;
inline constexpr double kLinearRange = 8.0;
inline constexpr double kLogRange = 128.0;

int bin_index(double delta);
// Magnitude edges of the log bins, 8 * 2^(j/2) for j = 0..8.
const std::array<double, kLogBinsPerSide + 1>& log_bin_edges();

using BinTable = std::array<double, kBiasBins>;

struct HeadBias {
    BinTable x{};
    BinTable y{};
    BinTable z{};
    BinTable p{};  // text positions
    double text_to_visual = 0.0;  // text query attending to a visual key
    double visual_to_text = 0.0;  // visual query attending to a text key
};

class BiasTables {
public:
    BiasTables() = default;
    BiasTables(int layers, int heads) : layers_(layers), heads_(heads), entries_(layers * heads) {}

    int layers() const { return layers_; }
    int heads() const { return heads_; }
    HeadBias& at(int layer, int head) { return entries_.at(slot(layer, head)); }
    const HeadBias& at(int layer, int head) const { return entries_.at(slot(layer, head)); }

    void randomize(std::mt19937_64& rng, double scale = 1.0);

private:
    std::size_t slot(int layer, int head) const;

    int layers_ = 0;
    int heads_ = 0;
    std::vector<HeadBias> entries_;
};

// Visual tokens first, text tokens after.
struct TokenSequence {
    Eigen::MatrixXd visual;                     // M x d
    std::vector<Eigen::Vector3d> visual_coords;
    Eigen::MatrixXd text;                       // N x d
    std::vector<double> text_positions;

    Eigen::Index visual_count() const { return static_cast<Eigen::Index>(visual_coords.size()); }
    Eigen::Index text_count() const { return static_cast<Eigen::Index>(text_positions.size()); }
    Eigen::Index size() const { return visual_count() + text_count(); }
    Eigen::MatrixXd stacked() const;
    void validate() const;
};

// (M+N) x (M+N) bias for one head of one layer. Entry (i, j) is the bias of
// query i attending to key j, with deltas taken as coord_j - coord_i.
Eigen::MatrixXd relative_bias_matrix(const TokenSequence& seq, const BiasTables& tables, int layer, int head);

// Softmax(Q K^T / sqrt(d) - bias) V.
Eigen::MatrixXd biased_attention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k, const Eigen::MatrixXd& v,
                                 const Eigen::MatrixXd& bias);
// Softmax(Q K^T / sqrt(d)) V.
Eigen::MatrixXd attention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k, const Eigen::MatrixXd& v);
// Row-stochastic attention weights of the biased form.
Eigen::MatrixXd attention_weights(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k, const Eigen::MatrixXd& bias);

struct AttentionGrad {
    Eigen::MatrixXd q;
    Eigen::MatrixXd k;
    Eigen::MatrixXd v;
    Eigen::MatrixXd bias;
};
AttentionGrad biased_attention_backward(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                                        const Eigen::MatrixXd& v, const Eigen::MatrixXd& bias,
                                        const Eigen::MatrixXd& grad_out);

// Scatters a gradient with respect to the bias matrix onto the bins that produced it.
HeadBias bias_table_grad(const TokenSequence& seq, const Eigen::MatrixXd& grad_bias);

struct EncoderConfig {
    int layers = 2;
    int heads = 4;
    int d_model = 64;
    int mlp_ratio = 4;
};

// Pre-norm transformer encoder whose self-attention carries the binned
// relative bias, sized to exercise the bias path.
class BiasedEncoder {
public:
    BiasedEncoder(const EncoderConfig& config, std::mt19937_64& rng);

    const EncoderConfig& config() const { return config_; }
    BiasTables& tables() { return tables_; }
    const BiasTables& tables() const { return tables_; }

    // Returns (M+N) x d hidden states. With use_bias = false the attention is
    // computed without any bias term.
    Eigen::MatrixXd forward(const TokenSequence& seq, bool use_bias = true) const;

private:
    struct Layer {
        Eigen::VectorXd ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
        Eigen::MatrixXd wq, wk, wv, wo;  // d x d
        Linear mlp_in, mlp_out;
    };

    EncoderConfig config_;
    std::vector<Layer> layers_;
    BiasTables tables_;
};

}  // namespace volplan
