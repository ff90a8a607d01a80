#include "volplan/numcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "json.hpp"

#include "volplan/attention_bias.hpp"
#include "volplan/geometry.hpp"
#include "volplan/nn.hpp"
#include "volplan/volume_lift.hpp"

namespace volplan {

namespace {

constexpr double kFeatureEps = 1e-4;
constexpr double kParamEps = 1e-5;

// Packs vectors and parameter blocks into one flat coordinate vector and
// remembers where each block starts.
class Packer {
public:
    // Column-major, matching Eigen's storage order.
    std::size_t add(const Eigen::Ref<const Eigen::MatrixXd>& m, double eps) {
        const std::size_t at = values_.size();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                values_.push_back(m(i, j));
                eps_.push_back(eps);
            }
        }
        return at;
    }
    std::size_t add(const Linear& l, double eps) {
        const std::size_t at = add(l.weight, eps);
        add(l.bias, eps);
        return at;
    }

    Eigen::VectorXd values() const { return Eigen::Map<const Eigen::VectorXd>(values_.data(), values_.size()); }
    Eigen::VectorXd eps() const { return Eigen::Map<const Eigen::VectorXd>(eps_.data(), eps_.size()); }

private:
    std::vector<double> values_;
    std::vector<double> eps_;
};

Eigen::VectorXd take(const Eigen::VectorXd& x, std::size_t at, Eigen::Index n) {
    return x.segment(static_cast<Eigen::Index>(at), n);
}

Eigen::MatrixXd take(const Eigen::VectorXd& x, std::size_t at, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<const Eigen::MatrixXd>(x.data() + at, rows, cols);
}

Linear take_linear(const Eigen::VectorXd& x, std::size_t at, const Linear& shape) {
    Linear l;
    l.weight = take(x, at, shape.out_features(), shape.in_features());
    l.bias = take(x, at + static_cast<std::size_t>(shape.weight.size()), shape.out_features());
    return l;
}

void append(Eigen::VectorXd& out, Eigen::Index& k, const Eigen::MatrixXd& m) {
    out.segment(k, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    k += m.size();
}

void append(Eigen::VectorXd& out, Eigen::Index& k, const Linear::Grad& g) {
    append(out, k, g.weight);
    append(out, k, g.bias);
}

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j) {
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = d(rng);
    }
    return m;
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
    return random_matrix(rng, n, 1, scale);
}

bool clear_of_kinks(const Eigen::VectorXd& preact) { return preact.cwiseAbs().minCoeff() > 1e-3; }

// --- bilinear_sample: 50 interior sampling positions on one map.
GradCase bilinear_case(std::mt19937_64& rng) {
    constexpr int kPoints = 50;
    FeatureMap fm(7, 9, 4);
    for (double& v : fm.data()) v = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    const Eigen::MatrixXd r = random_matrix(rng, fm.channels(), kPoints);

    std::uniform_real_distribution<double> du(0.0, fm.width() - 1.0);
    std::uniform_real_distribution<double> dv(0.0, fm.height() - 1.0);
    const auto off_grid = [](double a) {
        const double f = a - std::floor(a);
        return f > 0.01 && f < 0.99;
    };
    Eigen::VectorXd x(2 * kPoints);
    for (int p = 0; p < kPoints; ++p) {
        double u;
        double v;
        do {
            u = du(rng);
        } while (!off_grid(u));
        do {
            v = dv(rng);
        } while (!off_grid(v));
        x[2 * p] = u;
        x[2 * p + 1] = v;
    }

    GradCase c;
    c.x = x;
    c.eps = Eigen::VectorXd::Constant(x.size(), kFeatureEps);
    c.f = [fm, r](const Eigen::VectorXd& z) {
        double s = 0.0;
        for (int p = 0; p < kPoints; ++p) s += r.col(p).dot(bilinear_sample(fm, {z[2 * p], z[2 * p + 1]}));
        return s;
    };
    c.analytic.resize(x.size());
    for (int p = 0; p < kPoints; ++p) {
        const auto g = bilinear_sample_with_grad(fm, {x[2 * p], x[2 * p + 1]});
        c.analytic[2 * p] = r.col(p).dot(g.d_du);
        c.analytic[2 * p + 1] = r.col(p).dot(g.d_dv);
    }
    return c;
}

// --- blend_vacant: inputs (f_sem, g, f_vac).
GradCase blend_case(std::mt19937_64& rng) {
    constexpr Eigen::Index kC = 8;
    const Eigen::VectorXd f_sem = random_vector(rng, kC);
    const Eigen::VectorXd f_vac = random_vector(rng, kC);
    const double g = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    const Eigen::VectorXd r = random_vector(rng, kC);

    Packer pk;
    pk.add(f_sem, kFeatureEps);
    pk.add(Eigen::VectorXd::Constant(1, g), kParamEps);
    pk.add(f_vac, kParamEps);

    GradCase c;
    c.x = pk.values();
    c.eps = pk.eps();
    c.f = [r](const Eigen::VectorXd& z) {
        return r.dot(blend_vacant(z.segment(0, kC), z[kC], z.segment(kC + 1, kC)));
    };
    const BlendGrad bg = blend_vacant_grad(f_sem, g, f_vac);
    c.analytic.resize(c.x.size());
    c.analytic.segment(0, kC) = bg.d_sem * r;
    c.analytic[kC] = r.dot(bg.d_gate);
    c.analytic.segment(kC + 1, kC) = bg.d_vac * r;
    return c;
}

// --- gate_mlp: sigmoid(MLP(concat)) with respect to the input and every parameter.
GradCase gate_case(std::mt19937_64& rng) {
    LiftConfig cfg;
    cfg.channels = 6;
    cfg.reduced_channels = 4;
    cfg.gate_hidden = 16;
    cfg.posemb_hidden = 8;
    const LiftParams params = LiftParams::random(cfg, rng);
    const Mlp& mlp = params.gate_mlp;
    const Eigen::Index in = mlp.hidden.in_features();

    Eigen::VectorXd input;
    do {
        input = random_vector(rng, in);
    } while (!clear_of_kinks(mlp.hidden_preactivation(input)));

    Packer pk;
    pk.add(input, kFeatureEps);
    const std::size_t h_at = pk.add(mlp.hidden, kParamEps);
    const std::size_t o_at = pk.add(mlp.output, kParamEps);

    GradCase c;
    c.x = pk.values();
    c.eps = pk.eps();
    const Linear hidden_shape = mlp.hidden;
    const Linear output_shape = mlp.output;
    c.f = [=](const Eigen::VectorXd& z) {
        Mlp m;
        m.hidden = take_linear(z, h_at, hidden_shape);
        m.output = take_linear(z, o_at, output_shape);
        return sigmoid(m.forward(z.segment(0, in))[0]);
    };
    const double s = gate_value(params, input);
    const Mlp::Grad g = mlp.backward(input, Eigen::VectorXd::Constant(1, s * (1.0 - s)));
    c.analytic.resize(c.x.size());
    Eigen::Index k = 0;
    append(c.analytic, k, g.input);
    append(c.analytic, k, g.hidden);
    append(c.analytic, k, g.output);
    return c;
}

// --- pos_embed: MLP(Fourier(normalize(coord))) with respect to the coordinate and MLP parameters.
GradCase posemb_case(std::mt19937_64& rng) {
    LiftConfig cfg;
    cfg.channels = 6;
    cfg.reduced_channels = 2;
    cfg.posemb_hidden = 16;
    cfg.gate_hidden = 4;
    const LiftParams params = LiftParams::random(cfg, rng);
    const VolumeGrid grid = VolumeGrid::desk();
    const Mlp& mlp = params.posemb;
    const int levels = cfg.fourier_levels;
    const Eigen::VectorXd r = random_vector(rng, cfg.channels);

    Eigen::Vector3d coord;
    do {
        for (int a = 0; a < 3; ++a) {
            coord[a] = std::uniform_real_distribution<double>(grid.min_corner[a] + 0.5, grid.max_corner[a] - 0.5)(rng);
        }
    } while (!clear_of_kinks(mlp.hidden_preactivation(fourier_features(normalize_coord(coord, grid), levels))));

    Packer pk;
    pk.add(coord, kFeatureEps);
    const std::size_t h_at = pk.add(mlp.hidden, kParamEps);
    const std::size_t o_at = pk.add(mlp.output, kParamEps);

    GradCase c;
    c.x = pk.values();
    c.eps = pk.eps();
    const Linear hidden_shape = mlp.hidden;
    const Linear output_shape = mlp.output;
    c.f = [=](const Eigen::VectorXd& z) {
        LiftParams p = params;
        p.posemb.hidden = take_linear(z, h_at, hidden_shape);
        p.posemb.output = take_linear(z, o_at, output_shape);
        return r.dot(pos_embed(z.segment<3>(0), grid, p));
    };
    const Eigen::Vector3d n = normalize_coord(coord, grid);
    const Mlp::Grad g = mlp.backward(fourier_features(n, levels), r);
    const Eigen::Vector3d dn_dc = (2.0 / (grid.max_corner - grid.min_corner).array()).matrix();
    const Eigen::Vector3d d_coord = (fourier_jacobian(n, levels).transpose() * g.input).cwiseProduct(dn_dc);
    c.analytic.resize(c.x.size());
    Eigen::Index k = 0;
    append(c.analytic, k, d_coord);
    append(c.analytic, k, g.hidden);
    append(c.analytic, k, g.output);
    return c;
}

// Flat layout of a HeadBias: x, y, z, p tables then the two cross-modal scalars.
Eigen::VectorXd flatten(const HeadBias& h) {
    Eigen::VectorXd v(4 * kBiasBins + 2);
    for (int i = 0; i < kBiasBins; ++i) {
        v[i] = h.x[i];
        v[kBiasBins + i] = h.y[i];
        v[2 * kBiasBins + i] = h.z[i];
        v[3 * kBiasBins + i] = h.p[i];
    }
    v[4 * kBiasBins] = h.text_to_visual;
    v[4 * kBiasBins + 1] = h.visual_to_text;
    return v;
}

HeadBias unflatten(const Eigen::VectorXd& v) {
    HeadBias h;
    for (int i = 0; i < kBiasBins; ++i) {
        h.x[i] = v[i];
        h.y[i] = v[kBiasBins + i];
        h.z[i] = v[2 * kBiasBins + i];
        h.p[i] = v[3 * kBiasBins + i];
    }
    h.text_to_visual = v[4 * kBiasBins];
    h.visual_to_text = v[4 * kBiasBins + 1];
    return h;
}

// --- biased_attention: gradient with respect to the bin tables.
GradCase bins_case(std::mt19937_64& rng) {
    constexpr Eigen::Index kVisual = 8;
    constexpr Eigen::Index kText = 4;
    constexpr Eigen::Index kD = 8;
    TokenSequence seq;
    seq.visual = random_matrix(rng, kVisual, kD);
    seq.text = random_matrix(rng, kText, kD);
    std::uniform_real_distribution<double> spread(-150.0, 150.0);
    std::uniform_real_distribution<double> near(-6.0, 6.0);
    for (Eigen::Index i = 0; i < kVisual; ++i) {
        // Half the tokens cluster so the linear bins see traffic too.
        auto& d = i % 2 == 0 ? spread : near;
        seq.visual_coords.emplace_back(d(rng), d(rng), d(rng));
    }
    for (Eigen::Index i = 0; i < kText; ++i) seq.text_positions.push_back(static_cast<double>(i));

    const Eigen::Index n = seq.size();
    const Eigen::MatrixXd q = random_matrix(rng, n, kD);
    const Eigen::MatrixXd k = random_matrix(rng, n, kD);
    const Eigen::MatrixXd v = random_matrix(rng, n, kD);
    const Eigen::MatrixXd r = random_matrix(rng, n, kD);
    BiasTables tables(1, 1);
    tables.randomize(rng, 0.5);

    GradCase c;
    c.x = flatten(tables.at(0, 0));
    c.eps = Eigen::VectorXd::Constant(c.x.size(), kParamEps);
    c.f = [=](const Eigen::VectorXd& z) {
        BiasTables t(1, 1);
        t.at(0, 0) = unflatten(z);
        return (r.array() * biased_attention(q, k, v, relative_bias_matrix(seq, t, 0, 0)).array()).sum();
    };
    const Eigen::MatrixXd bias = relative_bias_matrix(seq, tables, 0, 0);
    const AttentionGrad g = biased_attention_backward(q, k, v, bias, r);
    c.analytic = flatten(bias_table_grad(seq, g.bias));
    return c;
}

// --- attention_qkv: gradient with respect to queries, keys and values.
GradCase qkv_case(std::mt19937_64& rng) {
    constexpr Eigen::Index kN = 10;
    constexpr Eigen::Index kD = 6;
    const Eigen::MatrixXd q = random_matrix(rng, kN, kD);
    const Eigen::MatrixXd k = random_matrix(rng, kN, kD);
    const Eigen::MatrixXd v = random_matrix(rng, kN, kD);
    const Eigen::MatrixXd bias = random_matrix(rng, kN, kN, 0.5);
    const Eigen::MatrixXd r = random_matrix(rng, kN, kD);

    Packer pk;
    pk.add(q, kFeatureEps);
    pk.add(k, kFeatureEps);
    pk.add(v, kFeatureEps);
    GradCase c;
    c.x = pk.values();
    c.eps = pk.eps();
    c.f = [=](const Eigen::VectorXd& z) {
        return (r.array() * biased_attention(take(z, 0, kN, kD), take(z, kN * kD, kN, kD),
                                             take(z, 2 * kN * kD, kN, kD), bias)
                                .array())
            .sum();
    };
    const AttentionGrad g = biased_attention_backward(q, k, v, bias, r);
    c.analytic.resize(c.x.size());
    Eigen::Index at = 0;
    append(c.analytic, at, g.q);
    append(c.analytic, at, g.k);
    append(c.analytic, at, g.v);
    return c;
}

// --- temporal_fc: linear fusion of concatenated per-frame features.
GradCase temporal_case(std::mt19937_64& rng) {
    constexpr Eigen::Index kC = 6;
    constexpr Eigen::Index kFrames = 2;
    Linear fc(kFrames * kC, kC);
    fc.init_uniform(rng);
    const Eigen::VectorXd input = random_vector(rng, kFrames * kC);
    const Eigen::VectorXd r = random_vector(rng, kC);

    Packer pk;
    pk.add(input, kFeatureEps);
    const std::size_t at = pk.add(fc, kParamEps);
    GradCase c;
    c.x = pk.values();
    c.eps = pk.eps();
    c.f = [=](const Eigen::VectorXd& z) { return r.dot(take_linear(z, at, fc).forward(z.segment(0, kFrames * kC))); };
    const Linear::Grad g = fc.backward(input, r);
    c.analytic.resize(c.x.size());
    Eigen::Index k = 0;
    append(c.analytic, k, g.input);
    append(c.analytic, k, g);
    return c;
}

using CaseFactory = GradCase (*)(std::mt19937_64&);

struct Entry {
    const char* name;
    CaseFactory make;
};

constexpr Entry kRegistry[] = {
    {"bilinear_sample", bilinear_case}, {"blend_vacant", blend_case},     {"gate_mlp", gate_case},
    {"pos_embed", posemb_case},         {"biased_attention", bins_case}, {"attention_qkv", qkv_case},
    {"temporal_fc", temporal_case},
};

}  // namespace

Eigen::VectorXd finite_diff_grad(const ScalarFn& f, const Eigen::VectorXd& x, double eps) {
    return finite_diff_grad(f, x, Eigen::VectorXd::Constant(x.size(), eps));
}

Eigen::VectorXd finite_diff_grad(const ScalarFn& f, const Eigen::VectorXd& x, const Eigen::VectorXd& eps) {
    if (eps.size() != x.size()) throw std::invalid_argument("need one step size per coordinate");
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd z = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!(eps[i] > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
        z[i] = x[i] + eps[i];
        const double up = f(z);
        z[i] = x[i] - eps[i];
        const double down = f(z);
        z[i] = x[i];
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw std::domain_error("non-finite evaluation at coordinate " + std::to_string(i));
        }
        g[i] = (up - down) / (2.0 * eps[i]);
    }
    return g;
}

GradCheckReport compare_gradients(const std::string& op, const Eigen::VectorXd& analytic,
                                  const Eigen::VectorXd& numeric, double tol_rel, double tol_abs) {
    if (analytic.size() != numeric.size()) throw std::invalid_argument("gradient sizes differ");
    GradCheckReport r;
    r.op = op;
    r.coordinates = static_cast<std::size_t>(analytic.size());
    r.tol_rel = tol_rel;
    r.tol_abs = tol_abs;
    r.pass = true;
    double worst_score = -1.0;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        const double abs_err = std::abs(analytic[i] - numeric[i]);
        const double rel_err = abs_err / std::max({std::abs(analytic[i]), std::abs(numeric[i]), kRelFloor});
        const bool ok = rel_err <= tol_rel || abs_err <= tol_abs;
        r.max_abs = std::max(r.max_abs, abs_err);
        r.max_rel = std::max(r.max_rel, rel_err);
        // Worst coordinate: failing ones first, then by relative error.
        const double score = (ok ? 0.0 : 1.0) + rel_err / (1.0 + rel_err);
        if (score > worst_score) {
            worst_score = score;
            r.worst_index = static_cast<std::size_t>(i);
        }
        r.pass = r.pass && ok;
    }
    return r;
}

const std::vector<std::string>& registered_ops() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& e : kRegistry) v.emplace_back(e.name);
        return v;
    }();
    return names;
}

bool is_registered(const std::string& op) {
    const auto& ops = registered_ops();
    return std::find(ops.begin(), ops.end(), op) != ops.end();
}

GradCase make_grad_case(const std::string& op, std::uint64_t seed) {
    for (const auto& e : kRegistry) {
        if (op == e.name) {
            std::mt19937_64 rng(seed);
            return e.make(rng);
        }
    }
    throw std::out_of_range("no gradient check registered for op '" + op + "'");
}

GradCheckReport check_grad(const std::string& op, const GradCase& c, double tol_rel, double tol_abs) {
    if (!is_registered(op)) throw std::out_of_range("no gradient check registered for op '" + op + "'");
    if (c.analytic.size() != c.x.size()) throw std::invalid_argument("analytic gradient has the wrong size");
    return compare_gradients(op, c.analytic, finite_diff_grad(c.f, c.x, c.eps), tol_rel, tol_abs);
}

GradCheckReport check_grad(const std::string& op, std::uint64_t seed, double tol_rel, double tol_abs) {
    return check_grad(op, make_grad_case(op, seed), tol_rel, tol_abs);
}

std::string reports_to_json(std::span<const GradCheckReport> reports) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    bool all = true;
    for (const auto& r : reports) {
        arr.push_back({{"op", r.op},
                       {"pass", r.pass},
                       {"max_rel", r.max_rel},
                       {"max_abs", r.max_abs},
                       {"worst_index", r.worst_index},
                       {"coordinates", r.coordinates},
                       {"tol_rel", r.tol_rel},
                       {"tol_abs", r.tol_abs}});
        all = all && r.pass;
    }
    nlohmann::ordered_json j;
    j["pass"] = all;
    j["checks"] = arr;
    return j.dump(2) + "\n";
}

}  // namespace volplan
