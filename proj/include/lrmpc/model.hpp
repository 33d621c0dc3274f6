#pragma once

#include <optional>

#include "lrmpc/container.hpp"
#include "lrmpc/lowrank.hpp"

namespace lrmpc {

enum class LayerKind : u8 {
    FullRankFC,
    LowRankFC,
    FullRankConv,
    LowRankConv,
    Square,
    DebugReLU,
    PublicMatmulLeft,
};

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
    LayerKind kind = LayerKind::FullRankFC;
    std::size_t n = 0, o = 0;  // FC weight dims
    std::size_t rank = 0;      // low-rank kinds
    ConvShape conv;            // conv kinds
    bool skip_trunc = false;   // honored in LR_TS modes, low-rank kinds only
    std::string weight_name;   // "layer{i}/W"
    std::string u_name, v_name;
    std::string public_name;   // PublicMatmulLeft
};

// A model is an LRMT container whose __meta__ carries the layer list; weight
// payloads may be absent for shape-only (simulation/bench) models.
struct Model {
    std::vector<LayerSpec> layers;
    std::size_t input_rows = 1;  // m
    std::size_t input_cols = 0;  // n of the first layer input (flattened for conv)
    Container store;

    bool has_weights() const;
    void validate() const;  // dims chain across layers

    nlohmann::json layers_json() const;
    static Model from_container(Container c);
    Container to_container() const;

    void save(const std::string& path) const;
    static Model load(const std::string& path);
};

// Per-model decomposition policy (§ layer indices are 0-based).
struct Policy {
    double fc_ratio = 0.25;
    double conv_ratio = 0.5;
    std::vector<u32> low_rank_layers;  // indices of layers to decompose
    bool skip_trunc = true;            // global default for low-rank layers
    std::map<u32, bool> skip_overrides;

    static Policy from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static Policy load(const std::string& path);
};

struct DecomposeReport {
    struct Row {
        u32 layer;
        std::size_t rank;
        double ratio;
        double frobenius_error;
    };
    std::vector<Row> rows;
    nlohmann::json to_json() const;
};

// Factorizes the policy's layers in place (adds U/V tensors, flips layer
// kinds to the low-rank variants; the original W stays for full-rank runs).
DecomposeReport decompose_model(Model& model, const Policy& policy);

// Synthetic square FC stack used by the bench and acceptance suites.
Model make_fc_model(std::size_t layers, std::size_t m, std::size_t n, std::size_t o,
                    std::size_t rank, bool with_weights, u64 weight_seed = 7);

// The 3-node GCN demo: A . ReLU(A . X . W) . W' with hand-picked,
// exactly representable values.
struct GcnDemo {
    Model model;
    RealTensor input;
    RealTensor expected;  // double-precision oracle output
};
GcnDemo make_gcn_demo();

} // namespace lrmpc
