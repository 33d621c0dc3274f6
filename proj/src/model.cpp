#include "lrmpc/model.hpp"

#include <fstream>

#include "lrmpc/errors.hpp"
#include "lrmpc/prng.hpp"

namespace lrmpc {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
    case LayerKind::FullRankFC: return "fc";
    case LayerKind::LowRankFC: return "lowrank_fc";
    case LayerKind::FullRankConv: return "conv";
    case LayerKind::LowRankConv: return "lowrank_conv";
    case LayerKind::Square: return "square";
    case LayerKind::DebugReLU: return "debug_relu";
    case LayerKind::PublicMatmulLeft: return "public_matmul_left";
    }
    return "?";
}

static LayerKind layer_kind_from_name(const std::string& s) {
    if (s == "fc") return LayerKind::FullRankFC;
    if (s == "lowrank_fc") return LayerKind::LowRankFC;
    if (s == "conv") return LayerKind::FullRankConv;
    if (s == "lowrank_conv") return LayerKind::LowRankConv;
    if (s == "square") return LayerKind::Square;
    if (s == "debug_relu") return LayerKind::DebugReLU;
    if (s == "public_matmul_left") return LayerKind::PublicMatmulLeft;
    throw ValidationError("unknown layer kind " + s);
}

bool Model::has_weights() const {
    for (const auto& ly : layers) {
        switch (ly.kind) {
        case LayerKind::FullRankFC:
        case LayerKind::FullRankConv:
            if (!store.has(ly.weight_name)) return false;
            break;
        case LayerKind::LowRankFC:
        case LayerKind::LowRankConv:
            if (!store.has(ly.u_name) || !store.has(ly.v_name)) return false;
            break;
        case LayerKind::PublicMatmulLeft:
            if (!store.has(ly.public_name)) return false;
            break;
        default:
            break;
        }
    }
    return true;
}

void Model::validate() const {
    if (layers.empty()) throw ValidationError("model has no layers");
    std::size_t m = input_rows, cols = input_cols;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& ly = layers[i];
        std::string where = "layer " + std::to_string(i);
        switch (ly.kind) {
        case LayerKind::FullRankFC:
            if (cols != ly.n) throw ValidationError(where + ": fc expects width " +
                                                    std::to_string(ly.n) + ", got " +
                                                    std::to_string(cols));
            cols = ly.o;
            break;
        case LayerKind::LowRankFC:
            if (cols != ly.n) throw ValidationError(where + ": fc width mismatch");
            if (ly.rank < 1 || ly.rank > std::min(ly.n, ly.o))
                throw ValidationError(where + ": rank out of range");
            cols = ly.o;
            break;
        case LayerKind::FullRankConv:
        case LayerKind::LowRankConv: {
            ConvShape cs = ly.conv;
            cs.validate();
            if (m * cols != cs.batch * cs.height * cs.width * cs.in_ch)
                throw ValidationError(where + ": conv input element count mismatch");
            if (ly.kind == LayerKind::LowRankConv &&
                (ly.rank < 1 || ly.rank > std::min(cs.patch_cols(), cs.out_ch)))
                throw ValidationError(where + ": conv rank out of range");
            m = cs.batch * cs.out_h() * cs.out_w();
            cols = cs.out_ch;
            break;
        }
        case LayerKind::Square:
        case LayerKind::DebugReLU:
            break;
        case LayerKind::PublicMatmulLeft: {
            if (!store.has(ly.public_name))
                throw ValidationError(where + ": public tensor " + ly.public_name + " missing");
            const auto& a = store.real(ly.public_name);
            if (a.cols() != m)
                throw ValidationError(where + ": public matmul dims mismatch");
            m = a.rows();
            break;
        }
        }
        if (ly.skip_trunc && ly.kind != LayerKind::LowRankFC && ly.kind != LayerKind::LowRankConv)
            throw ValidationError(where + ": skip_trunc is only valid on low-rank layers");
    }
}

nlohmann::json Model::layers_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& ly : layers) {
        nlohmann::json j;
        j["kind"] = layer_kind_name(ly.kind);
        if (ly.n) j["n"] = ly.n;
        if (ly.o) j["o"] = ly.o;
        if (ly.rank) j["rank"] = ly.rank;
        if (ly.skip_trunc) j["skip_trunc"] = true;
        if (!ly.weight_name.empty()) j["weight"] = ly.weight_name;
        if (!ly.u_name.empty()) j["u"] = ly.u_name;
        if (!ly.v_name.empty()) j["v"] = ly.v_name;
        if (!ly.public_name.empty()) j["public"] = ly.public_name;
        if (ly.kind == LayerKind::FullRankConv || ly.kind == LayerKind::LowRankConv) {
            j["conv"] = {{"b", ly.conv.batch},   {"h", ly.conv.height}, {"w", ly.conv.width},
                         {"in", ly.conv.in_ch},  {"out", ly.conv.out_ch}, {"k", ly.conv.kernel},
                         {"stride", ly.conv.stride}, {"pad", ly.conv.pad}};
        }
        arr.push_back(std::move(j));
    }
    return arr;
}

Container Model::to_container() const {
    Container c = store;
    c.meta()["model"] = {{"input", {{"m", input_rows}, {"cols", input_cols}}},
                         {"layers", layers_json()}};
    return c;
}

Model Model::from_container(Container c) {
    Model m;
    const auto& j = c.meta().at("model");
    m.input_rows = j.at("input").at("m").get<std::size_t>();
    m.input_cols = j.at("input").at("cols").get<std::size_t>();
    for (const auto& lj : j.at("layers")) {
        LayerSpec ly;
        ly.kind = layer_kind_from_name(lj.at("kind").get<std::string>());
        ly.n = lj.value("n", 0);
        ly.o = lj.value("o", 0);
        ly.rank = lj.value("rank", 0);
        ly.skip_trunc = lj.value("skip_trunc", false);
        ly.weight_name = lj.value("weight", "");
        ly.u_name = lj.value("u", "");
        ly.v_name = lj.value("v", "");
        ly.public_name = lj.value("public", "");
        if (lj.contains("conv")) {
            const auto& cj = lj.at("conv");
            ly.conv.batch = cj.at("b");
            ly.conv.height = cj.at("h");
            ly.conv.width = cj.at("w");
            ly.conv.in_ch = cj.at("in");
            ly.conv.out_ch = cj.at("out");
            ly.conv.kernel = cj.at("k");
            ly.conv.stride = cj.at("stride");
            ly.conv.pad = cj.at("pad");
        }
        m.layers.push_back(std::move(ly));
    }
    m.store = std::move(c);
    return m;
}

void Model::save(const std::string& path) const { to_container().save(path); }

Model Model::load(const std::string& path) { return from_container(Container::load(path)); }

Policy Policy::from_json(const nlohmann::json& j) {
    Policy p;
    p.fc_ratio = j.value("fc_ratio", 0.25);
    p.conv_ratio = j.value("conv_ratio", 0.5);
    if (j.contains("low_rank_layers"))
        p.low_rank_layers = j.at("low_rank_layers").get<std::vector<u32>>();
    p.skip_trunc = j.value("skip_trunc", true);
    if (j.contains("skip_overrides"))
        for (auto it = j.at("skip_overrides").begin(); it != j.at("skip_overrides").end(); ++it)
            p.skip_overrides[static_cast<u32>(std::stoul(it.key()))] = it.value().get<bool>();
    return p;
}

nlohmann::json Policy::to_json() const {
    nlohmann::json j;
    j["fc_ratio"] = fc_ratio;
    j["conv_ratio"] = conv_ratio;
    j["low_rank_layers"] = low_rank_layers;
    j["skip_trunc"] = skip_trunc;
    nlohmann::json ov = nlohmann::json::object();
    for (auto& [k, v] : skip_overrides) ov[std::to_string(k)] = v;
    j["skip_overrides"] = ov;
    return j;
}

Policy Policy::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open policy file " + path);
    return from_json(nlohmann::json::parse(f));
}

nlohmann::json DecomposeReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows)
        arr.push_back({{"layer", r.layer},
                       {"rank", r.rank},
                       {"ratio", r.ratio},
                       {"frobenius_error", r.frobenius_error}});
    return {{"layers", arr}};
}

DecomposeReport decompose_model(Model& model, const Policy& policy) {
    DecomposeReport rep;
    for (u32 idx : policy.low_rank_layers) {
        if (idx >= model.layers.size())
            throw ValidationError("policy layer index " + std::to_string(idx) + " out of range");
        auto& ly = model.layers[idx];
        bool skip = policy.skip_trunc;
        if (auto it = policy.skip_overrides.find(idx); it != policy.skip_overrides.end())
            skip = it->second;
        std::string base = "layer" + std::to_string(idx);
        if (ly.kind == LayerKind::FullRankFC) {
            const auto& w = model.store.real(ly.weight_name);
            std::size_t r = choose_rank(LayerClass::FC, ly.n, ly.o, policy.fc_ratio);
            LowRankFactors f = svd_factorize(w, r);
            ly.kind = LayerKind::LowRankFC;
            ly.rank = r;
            ly.skip_trunc = skip;
            ly.u_name = base + "/U";
            ly.v_name = base + "/V";
            model.store.put(ly.u_name, f.U);
            model.store.put(ly.v_name, f.V);
            rep.rows.push_back({idx, r, f.ratio, f.frobenius_error});
        } else if (ly.kind == LayerKind::FullRankConv) {
            const auto& w = model.store.real(ly.weight_name);
            std::size_t r = choose_rank(LayerClass::Conv, ly.conv.patch_cols(), ly.conv.out_ch,
                                        policy.conv_ratio);
            LowRankFactors f = conv_factorize(w, r);
            ly.kind = LayerKind::LowRankConv;
            ly.rank = r;
            ly.skip_trunc = skip;
            ly.u_name = base + "/U";
            ly.v_name = base + "/V";
            model.store.put(ly.u_name, f.U);
            model.store.put(ly.v_name, f.V);
            rep.rows.push_back({idx, r, f.ratio, f.frobenius_error});
        } else {
            throw ValidationError("policy layer " + std::to_string(idx) +
                                  " is not a full-rank linear layer");
        }
    }
    return rep;
}

Model make_fc_model(std::size_t layers, std::size_t m, std::size_t n, std::size_t o,
                    std::size_t rank, bool with_weights, u64 weight_seed) {
    if (layers == 0 || n != o)
        throw ValidationError("make_fc_model: need at least one layer and square weights");
    Model model;
    model.input_rows = m;
    model.input_cols = n;
    Prf prf(make_master_seed(weight_seed), domain::make(domain::kWeight, 0));
    for (std::size_t i = 0; i < layers; ++i) {
        LayerSpec ly;
        std::string base = "layer" + std::to_string(i);
        ly.n = n;
        ly.o = o;
        ly.weight_name = base + "/W";
        if (rank > 0) {
            ly.kind = LayerKind::LowRankFC;
            ly.rank = rank;
            ly.skip_trunc = true;
            ly.u_name = base + "/U";
            ly.v_name = base + "/V";
        } else {
            ly.kind = LayerKind::FullRankFC;
        }
        if (with_weights) {
            // grid-aligned small entries keep every mode within the range guard
            auto grid = [&](std::size_t count) {
                RealTensor t({count});
                for (auto& v : t.data)
                    v = (static_cast<double>(prf.next_bits(5)) - 15.5) / 32.0 / 16.0;
                return t.data;
            };
            if (rank > 0) {
                RealTensor U({n, rank}, grid(n * rank));
                RealTensor V({rank, o}, grid(rank * o));
                model.store.put(ly.u_name, U);
                model.store.put(ly.v_name, V);
                model.store.put(ly.weight_name, real_matmul(U, V));
            } else {
                model.store.put(ly.weight_name, RealTensor({n, o}, grid(n * o)));
            }
        }
        model.layers.push_back(std::move(ly));
    }
    return model;
}

GcnDemo make_gcn_demo() {
    GcnDemo demo;
    // 3-node graph; every value is a multiple of 2^-5 so inputs encode
    // exactly, and |column sums| <= 1 keep the accumulated truncation error
    // within 4 ulp across the four truncations.
    RealTensor A({3, 3}, {0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.5});
    RealTensor X({3, 3}, {0.5, -0.25, 0.75, 0.25, 0.5, -0.5, -0.75, 0.25, 0.25});
    RealTensor W({3, 3}, {0.5, -0.25, 0.0, 0.25, 0.5, -0.25, -0.25, 0.25, 0.5});
    RealTensor W2({3, 3}, {0.5, 0.25, 0.0, -0.25, 0.5, 0.25, 0.25, -0.25, 0.5});

    Model m;
    m.input_rows = 3;
    m.input_cols = 3;
    m.store.put("gcn/A", A);
    m.store.put("gcn/W", W);
    m.store.put("gcn/W2", W2);

    LayerSpec a1;
    a1.kind = LayerKind::PublicMatmulLeft;
    a1.public_name = "gcn/A";
    LayerSpec fc1;
    fc1.kind = LayerKind::FullRankFC;
    fc1.n = 3;
    fc1.o = 3;
    fc1.weight_name = "gcn/W";
    LayerSpec relu;
    relu.kind = LayerKind::DebugReLU;
    LayerSpec a2 = a1;
    LayerSpec fc2 = fc1;
    fc2.weight_name = "gcn/W2";
    m.layers = {a1, fc1, relu, a2, fc2};

    demo.model = std::move(m);
    demo.input = X;
    demo.expected = plaintext_linear_oracle(
        X, {{PlainLayer::Kind::PublicMatmulLeft, A, {}},
            {PlainLayer::Kind::Matmul, W, {}},
            {PlainLayer::Kind::Relu, {}, {}},
            {PlainLayer::Kind::PublicMatmulLeft, A, {}},
            {PlainLayer::Kind::Matmul, W2, {}}});
    return demo;
}

} // namespace lrmpc
