#include "volplan/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace volplan {

namespace {

Tensor from_matrix(const Eigen::MatrixXd& m) {
    Tensor t;
    t.shape = {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
    t.data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(m(r, c));
    }
    return t;
}

Tensor from_vector(const Eigen::VectorXd& v) {
    return {{static_cast<std::size_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size())};
}

const Tensor& lookup(const Checkpoint& ckpt, const std::string& name, const std::vector<std::size_t>& shape) {
    const auto it = ckpt.find(name);
    if (it == ckpt.end()) throw std::invalid_argument("checkpoint lacks tensor '" + name + "'");
    if (it->second.shape != shape) throw std::invalid_argument("tensor '" + name + "' has the wrong shape");
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    if (it->second.data.size() != n) throw std::invalid_argument("tensor '" + name + "' data does not match shape");
    return it->second;
}

void load_matrix(const Checkpoint& ckpt, const std::string& name, Eigen::MatrixXd& m) {
    const Tensor& t = lookup(ckpt, name, {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.data[static_cast<std::size_t>(r * m.cols() + c)];
    }
}

void load_vector(const Checkpoint& ckpt, const std::string& name, Eigen::VectorXd& v) {
    const Tensor& t = lookup(ckpt, name, {static_cast<std::size_t>(v.size())});
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = t.data[static_cast<std::size_t>(i)];
}

void put_linear(const std::string& name, const Linear& l, Checkpoint& out) {
    out[name + ".weight"] = from_matrix(l.weight);
    out[name + ".bias"] = from_vector(l.bias);
}

void get_linear(const Checkpoint& ckpt, const std::string& name, Linear& l) {
    load_matrix(ckpt, name + ".weight", l.weight);
    load_vector(ckpt, name + ".bias", l.bias);
}

std::string head_prefix(int layer, int head) {
    return "attn.layer" + std::to_string(layer) + ".head" + std::to_string(head);
}

Tensor from_table(const BinTable& t) { return {{t.size()}, std::vector<double>(t.begin(), t.end())}; }

void load_table(const Checkpoint& ckpt, const std::string& name, BinTable& t) {
    const Tensor& src = lookup(ckpt, name, {t.size()});
    std::copy(src.data.begin(), src.data.end(), t.begin());
}

double load_scalar(const Checkpoint& ckpt, const std::string& name) { return lookup(ckpt, name, {1}).data[0]; }

}  // namespace

void export_lift(const LiftParams& p, Checkpoint& out) {
    put_linear("lift.gate_fc", p.gate_fc, out);
    put_linear("lift.gate_mlp.hidden", p.gate_mlp.hidden, out);
    put_linear("lift.gate_mlp.output", p.gate_mlp.output, out);
    out["lift.vacant"] = from_vector(p.vacant);
    put_linear("lift.posemb.hidden", p.posemb.hidden, out);
    put_linear("lift.posemb.output", p.posemb.output, out);
    put_linear("lift.temporal_fc", p.temporal_fc, out);
}

void import_lift(const Checkpoint& ckpt, LiftParams& p) {
    get_linear(ckpt, "lift.gate_fc", p.gate_fc);
    get_linear(ckpt, "lift.gate_mlp.hidden", p.gate_mlp.hidden);
    get_linear(ckpt, "lift.gate_mlp.output", p.gate_mlp.output);
    load_vector(ckpt, "lift.vacant", p.vacant);
    get_linear(ckpt, "lift.posemb.hidden", p.posemb.hidden);
    get_linear(ckpt, "lift.posemb.output", p.posemb.output);
    get_linear(ckpt, "lift.temporal_fc", p.temporal_fc);
}

void export_bias_tables(const BiasTables& tables, Checkpoint& out) {
    for (int l = 0; l < tables.layers(); ++l) {
        for (int h = 0; h < tables.heads(); ++h) {
            const HeadBias& hb = tables.at(l, h);
            const std::string pre = head_prefix(l, h);
            out[pre + ".bins_x"] = from_table(hb.x);
            out[pre + ".bins_y"] = from_table(hb.y);
            out[pre + ".bins_z"] = from_table(hb.z);
            out[pre + ".bins_p"] = from_table(hb.p);
            out[pre + ".text_to_visual"] = {{1}, {hb.text_to_visual}};
            out[pre + ".visual_to_text"] = {{1}, {hb.visual_to_text}};
        }
    }
}

void import_bias_tables(const Checkpoint& ckpt, BiasTables& tables) {
    for (int l = 0; l < tables.layers(); ++l) {
        for (int h = 0; h < tables.heads(); ++h) {
            HeadBias& hb = tables.at(l, h);
            const std::string pre = head_prefix(l, h);
            load_table(ckpt, pre + ".bins_x", hb.x);
            load_table(ckpt, pre + ".bins_y", hb.y);
            load_table(ckpt, pre + ".bins_z", hb.z);
            load_table(ckpt, pre + ".bins_p", hb.p);
            hb.text_to_visual = load_scalar(ckpt, pre + ".text_to_visual");
            hb.visual_to_text = load_scalar(ckpt, pre + ".visual_to_text");
        }
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    nlohmann::ordered_json tensors = nlohmann::ordered_json::object();
    for (const auto& [name, t] : ckpt) tensors[name] = {{"shape", t.shape}, {"data", t.data}};
    nlohmann::ordered_json j;
    j["format"] = kCheckpointFormat;
    j["tensors"] = tensors;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    const auto j = nlohmann::json::parse(in);
    if (j.value("format", std::string()) != kCheckpointFormat) {
        throw std::invalid_argument("unsupported checkpoint format in " + path.string());
    }
    Checkpoint ckpt;
    for (const auto& [name, tj] : j.at("tensors").items()) {
        ckpt[name] = {tj.at("shape").get<std::vector<std::size_t>>(), tj.at("data").get<std::vector<double>>()};
    }
    return ckpt;
}

}  // namespace volplan
