#include "volplan/attention_bias.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace volplan {

const std::array<double, kLogBinsPerSide + 1>& log_bin_edges() {
    static const std::array<double, kLogBinsPerSide + 1> edges = [] {
        std::array<double, kLogBinsPerSide + 1> e{};
        for (int j = 0; j <= kLogBinsPerSide; ++j) {
            // Even j are exact powers of two; odd j carry the sqrt(2) factor.
            e[j] = std::ldexp(kLinearRange, j / 2) * (j % 2 == 1 ? std::sqrt(2.0) : 1.0);
        }
        return e;
    }();
    return edges;
}

int bin_index(double delta) {
    const double mag = std::abs(delta);
    if (mag <= kLinearRange) {
        int k = static_cast<int>(std::floor(delta));
        if (k >= static_cast<int>(kLinearRange)) k = static_cast<int>(kLinearRange) - 1;
        return kLogBinsPerSide + k + static_cast<int>(kLinearRange);
    }
    const auto& edges = log_bin_edges();
    int j = kLogBinsPerSide - 1;
    for (int i = 0; i < kLogBinsPerSide; ++i) {
        if (mag <= edges[i + 1]) {
            j = i;
            break;
        }
    }
    return delta > 0.0 ? kLogBinsPerSide + kLinearBins + j : kLogBinsPerSide - 1 - j;
}

void BiasTables::randomize(std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> dist(0.0, scale);
    for (auto& e : entries_) {
        for (auto* table : {&e.x, &e.y, &e.z, &e.p}) {
            for (double& b : *table) b = dist(rng);
        }
        e.text_to_visual = dist(rng);
        e.visual_to_text = dist(rng);
    }
}

std::size_t BiasTables::slot(int layer, int head) const {
    if (layer < 0 || layer >= layers_ || head < 0 || head >= heads_) {
        throw std::out_of_range("bias table index (" + std::to_string(layer) + ", " + std::to_string(head) +
                                ") out of range");
    }
    return static_cast<std::size_t>(layer) * heads_ + head;
}

Eigen::MatrixXd TokenSequence::stacked() const {
    const Eigen::Index d = visual_count() > 0 ? visual.cols() : text.cols();
    Eigen::MatrixXd out(size(), d);
    if (visual_count() > 0) out.topRows(visual_count()) = visual;
    if (text_count() > 0) out.bottomRows(text_count()) = text;
    return out;
}

void TokenSequence::validate() const {
    if (visual.rows() != visual_count()) throw std::invalid_argument("every visual token needs a coordinate");
    if (text.rows() != text_count()) throw std::invalid_argument("every text token needs a position");
    if (visual_count() > 0 && text_count() > 0 && visual.cols() != text.cols()) {
        throw std::invalid_argument("visual and text token widths differ");
    }
}

namespace {

// Bin of every token pair, computed once per sequence and shared by all heads.
struct PairBins {
    Eigen::Index visual = 0;
    Eigen::Index total = 0;
    std::vector<std::array<std::uint8_t, 3>> spatial;  // visual x visual, row-major
    std::vector<std::uint8_t> text;                     // text x text, row-major

    explicit PairBins(const TokenSequence& seq) : visual(seq.visual_count()), total(seq.size()) {
        spatial.resize(static_cast<std::size_t>(visual * visual));
        for (Eigen::Index i = 0; i < visual; ++i) {
            for (Eigen::Index j = 0; j < visual; ++j) {
                const Eigen::Vector3d d = seq.visual_coords[j] - seq.visual_coords[i];
                spatial[static_cast<std::size_t>(i * visual + j)] = {static_cast<std::uint8_t>(bin_index(d.x())),
                                                                      static_cast<std::uint8_t>(bin_index(d.y())),
                                                                      static_cast<std::uint8_t>(bin_index(d.z()))};
            }
        }
        const Eigen::Index n = total - visual;
        text.resize(static_cast<std::size_t>(n * n));
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                text[static_cast<std::size_t>(i * n + j)] =
                    static_cast<std::uint8_t>(bin_index(seq.text_positions[j] - seq.text_positions[i]));
            }
        }
    }

    Eigen::MatrixXd bias(const HeadBias& hb) const {
        const Eigen::Index m = visual;
        const Eigen::Index n = total - visual;
        Eigen::MatrixXd out(total, total);
        for (Eigen::Index i = 0; i < total; ++i) {
            for (Eigen::Index j = 0; j < total; ++j) {
                const bool qv = i < m;
                const bool kv = j < m;
                if (qv && kv) {
                    const auto& b = spatial[static_cast<std::size_t>(i * m + j)];
                    out(i, j) = hb.x[b[0]] + hb.y[b[1]] + hb.z[b[2]];
                } else if (!qv && !kv) {
                    out(i, j) = hb.p[text[static_cast<std::size_t>((i - m) * n + (j - m))]];
                } else {
                    out(i, j) = qv ? hb.visual_to_text : hb.text_to_visual;
                }
            }
        }
        return out;
    }
};

}  // namespace

Eigen::MatrixXd relative_bias_matrix(const TokenSequence& seq, const BiasTables& tables, int layer, int head) {
    return PairBins(seq).bias(tables.at(layer, head));
}

namespace {

void check_qkv(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k, const Eigen::MatrixXd& v) {
    if (q.cols() == 0) throw std::invalid_argument("attention head width must be positive");
    if (q.cols() != k.cols() || k.rows() != v.rows()) throw std::invalid_argument("attention shape mismatch");
}

void softmax_rows(Eigen::MatrixXd& s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        auto row = s.row(i);
        const double mx = row.maxCoeff();
        row = (row.array() - mx).exp();
        row /= row.sum();
    }
}

Eigen::MatrixXd scores(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k) {
    return (q * k.transpose()) / std::sqrt(static_cast<double>(q.cols()));
}

}  // namespace

Eigen::MatrixXd attention_weights(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k, const Eigen::MatrixXd& bias) {
    if (bias.rows() != q.rows() || bias.cols() != k.rows()) throw std::invalid_argument("bias shape mismatch");
    Eigen::MatrixXd s = scores(q, k) - bias;
    softmax_rows(s);
    return s;
}

Eigen::MatrixXd biased_attention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k, const Eigen::MatrixXd& v,
                                 const Eigen::MatrixXd& bias) {
    check_qkv(q, k, v);
    return attention_weights(q, k, bias) * v;
}

Eigen::MatrixXd attention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k, const Eigen::MatrixXd& v) {
    check_qkv(q, k, v);
    Eigen::MatrixXd s = scores(q, k);
    softmax_rows(s);
    return s * v;
}

AttentionGrad biased_attention_backward(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                                        const Eigen::MatrixXd& v, const Eigen::MatrixXd& bias,
                                        const Eigen::MatrixXd& grad_out) {
    check_qkv(q, k, v);
    const Eigen::MatrixXd p = attention_weights(q, k, bias);
    if (grad_out.rows() != p.rows() || grad_out.cols() != v.cols()) {
        throw std::invalid_argument("attention output gradient shape mismatch");
    }
    const Eigen::MatrixXd dp = grad_out * v.transpose();
    const Eigen::VectorXd row_dot = (dp.array() * p.array()).rowwise().sum();
    const Eigen::MatrixXd ds = (p.array() * (dp.colwise() - row_dot).array()).matrix();
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    return {ds * k * scale, ds.transpose() * q * scale, p.transpose() * grad_out, -ds};
}

HeadBias bias_table_grad(const TokenSequence& seq, const Eigen::MatrixXd& grad_bias) {
    const Eigen::Index m = seq.visual_count();
    const Eigen::Index n = seq.size();
    if (grad_bias.rows() != n || grad_bias.cols() != n) throw std::invalid_argument("bias gradient shape mismatch");
    HeadBias g;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d = grad_bias(i, j);
            const bool qv = i < m;
            const bool kv = j < m;
            if (qv && kv) {
                const Eigen::Vector3d delta = seq.visual_coords[j] - seq.visual_coords[i];
                g.x[bin_index(delta.x())] += d;
                g.y[bin_index(delta.y())] += d;
                g.z[bin_index(delta.z())] += d;
            } else if (!qv && !kv) {
                g.p[bin_index(seq.text_positions[j - m] - seq.text_positions[i - m])] += d;
            } else if (qv) {
                g.visual_to_text += d;
            } else {
                g.text_to_visual += d;
            }
        }
    }
    return g;
}

namespace {

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gamma, const Eigen::VectorXd& beta) {
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double mean = x.row(i).mean();
        const double var = (x.row(i).array() - mean).square().mean();
        const double inv = 1.0 / std::sqrt(var + 1e-6);
        out.row(i) = ((x.row(i).array() - mean) * inv * gamma.transpose().array() + beta.transpose().array()).matrix();
    }
    return out;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

}  // namespace

BiasedEncoder::BiasedEncoder(const EncoderConfig& config, std::mt19937_64& rng)
    : config_(config), tables_(config.layers, config.heads) {
    if (config.layers < 1 || config.heads < 1 || config.d_model < 1 || config.d_model % config.heads != 0) {
        throw std::invalid_argument("encoder needs d_model divisible by a positive head count");
    }
    const Eigen::Index d = config.d_model;
    for (int l = 0; l < config.layers; ++l) {
        Layer layer;
        layer.ln1_gamma = layer.ln2_gamma = Eigen::VectorXd::Ones(d);
        layer.ln1_beta = layer.ln2_beta = Eigen::VectorXd::Zero(d);
        layer.wq = random_matrix(d, d, rng);
        layer.wk = random_matrix(d, d, rng);
        layer.wv = random_matrix(d, d, rng);
        layer.wo = random_matrix(d, d, rng);
        layer.mlp_in = Linear(d, d * config.mlp_ratio);
        layer.mlp_in.init_uniform(rng);
        layer.mlp_out = Linear(d * config.mlp_ratio, d);
        layer.mlp_out.init_uniform(rng);
        layers_.push_back(std::move(layer));
    }
}

Eigen::MatrixXd BiasedEncoder::forward(const TokenSequence& seq, bool use_bias) const {
    seq.validate();
    Eigen::MatrixXd x = seq.stacked();
    if (x.cols() != config_.d_model) throw std::invalid_argument("token width does not match d_model");
    const Eigen::Index dh = config_.d_model / config_.heads;
    const std::optional<PairBins> bins = use_bias ? std::optional<PairBins>(seq) : std::nullopt;
    for (int l = 0; l < config_.layers; ++l) {
        const Layer& layer = layers_[static_cast<std::size_t>(l)];
        const Eigen::MatrixXd h = layer_norm(x, layer.ln1_gamma, layer.ln1_beta);
        const Eigen::MatrixXd q = h * layer.wq.transpose();
        const Eigen::MatrixXd k = h * layer.wk.transpose();
        const Eigen::MatrixXd v = h * layer.wv.transpose();
        Eigen::MatrixXd heads(x.rows(), config_.d_model);
        for (int hd = 0; hd < config_.heads; ++hd) {
            const auto cols = Eigen::seqN(hd * dh, dh);
            const Eigen::MatrixXd qh = q(Eigen::all, cols);
            const Eigen::MatrixXd kh = k(Eigen::all, cols);
            const Eigen::MatrixXd vh = v(Eigen::all, cols);
            heads(Eigen::all, cols) = use_bias ? biased_attention(qh, kh, vh, bins->bias(tables_.at(l, hd)))
                                               : attention(qh, kh, vh);
        }
        x += heads * layer.wo.transpose();
        const Eigen::MatrixXd h2 = layer_norm(x, layer.ln2_gamma, layer.ln2_beta);
        Eigen::MatrixXd mid = (h2 * layer.mlp_in.weight.transpose()).rowwise() + layer.mlp_in.bias.transpose();
        mid = mid.cwiseMax(0.0);
        x += (mid * layer.mlp_out.weight.transpose()).rowwise() + layer.mlp_out.bias.transpose();
    }
    return x;
}

}  // namespace volplan
