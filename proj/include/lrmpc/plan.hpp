#pragma once

#include "lrmpc/model.hpp"
#include "lrmpc/net.hpp"
#include "lrmpc/offline.hpp"

namespace lrmpc {

enum class Protocol : u8 { Npc, Trio };
enum class Mode : u8 { FullRank, LR, LR_TS, LR_TS_Concat };

const char* protocol_name(Protocol p);
const char* mode_name(Mode m);
Mode mode_from_name(const std::string& s);
Protocol protocol_from_name(const std::string& s);

// Protocol-op granularity: one op consumes at most one offline-material slot.
enum class OpKind : u8 { Matmul, EltSquare, Trunc, PublicMatmulLeft, Im2col, DebugRelu };

struct PlanOp {
    OpKind kind = OpKind::Matmul;
    u32 layer = 0;
    u32 slot = 0;  // == index in plan.ops, keyed into the material store
    u32 x_wire = 0, y_wire = 0, z_wire = 0;
    std::size_t m = 0, n = 0, o = 0;  // matmul dims
    Shape shape;                      // elementwise / trunc / debug shapes
    u32 d = 0;                        // trunc bits
    ConvShape conv;                   // im2col
    u32 frac_out = 0;
    std::string public_name;  // PublicMatmulLeft operand (encoded at plan build)
};

struct WireInfo {
    Shape shape;
    u32 frac = 0;
    double bound = 0.0;  // decoded-magnitude bound used by the range guard
};

struct ExecutionPlan {
    Protocol protocol = Protocol::Npc;
    u32 n_parties = 2;
    Mode mode = Mode::FullRank;
    FixedPointConfig cfg;
    u32 session = 1;

    std::vector<PlanOp> ops;
    std::map<u32, WireInfo> wires;
    std::map<u32, WireLambdaRule> lambda_rules;  // trio mask derivation
    u32 input_wire = 0;
    u32 output_wire = 0;
    std::vector<u32> weight_wires;                   // wires fed from share files
    std::map<u32, std::string> weight_tensor_names;  // weight wire -> model tensor
    std::map<std::string, RingTensor> publics;       // encoded public operands

    std::vector<MaterialSpec> material;  // parallel to ops

    Topology topology() const {
        return protocol == Protocol::Trio ? Topology::TrioChain : Topology::FullMesh;
    }
    u32 parties() const { return protocol == Protocol::Trio ? 3 : n_parties; }
};

struct PlanOptions {
    double input_bound = 1.0;  // decoded-magnitude bound assumed for the input
};

// Lowers a model onto protocol ops, assigns wires and material slots, checks
// dim chaining, fraction-bit discipline and the truncation-skipping range
// guard. Mode FullRank uses W even on decomposed layers; the LR modes use
// U/V on low-rank layers.
ExecutionPlan build_plan(const Model& model, Protocol proto, u32 n_parties, Mode mode,
                         const FixedPointConfig& cfg, const PlanOptions& opts = {});

// Plaintext layer list mirroring what the plan computes (for oracles).
std::vector<PlainLayer> plan_reference_layers(const Model& model, Mode mode);

} // namespace lrmpc
