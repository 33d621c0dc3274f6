#pragma once

#include "lrmpc/plan.hpp"

namespace lrmpc {

// Register-machine instruction set executed by both the live party runtime
// and the discrete-event simulator. Every cross-party dependency is an
// explicit Send/Recv pair; sends never block.
enum class IOp : u8 {
    Input,     // dst = inputs[io_index]
    Offline,   // dst = material slot component
    LoadPub,   // dst = plan.publics[pub_name]
    PrfLam,    // dst = lambda(wire, side) from the pairwise seed stream
    Zero,      // dst = zeros(shape)
    Lin,       // dst = sum coef_k * reg_k (+ scalar), elementwise
    Matmul,    // dst = a . b
    EltMul,    // dst = a o b
    Im2col,    // dst = im2col(a, conv)
    MsbSplit,  // dst = msb(a); dst2 = floor((a mod 2^{l-1}) / 2^d)
    ReluPub,   // dst = signed relu(a) on an opened tensor
    Send,      // ship reg a to peer as (kind, slot)
    Recv,      // dst = frame (kind, slot) from peer
    Output,    // outputs[io_index] = a
};

// Material component ids for Offline
namespace comp {
constexpr u8 kTripleA = 0, kTripleB = 1, kTripleC = 2;
constexpr u8 kMaskR = 0, kMaskRp = 1, kMaskB = 2, kMaskLam2 = 3, kMaskLam3 = 4;
constexpr u8 kPrepMN = 0, kPrepLamZ2 = 1, kPrepLamZ3 = 2;
enum class Family : u8 { Triple, Mask, Prep };
} // namespace comp

struct Instr {
    IOp op;
    u32 dst = 0, dst2 = 0, a = 0, b = 0;
    std::vector<std::pair<u64, u32>> terms;  // Lin: (coefficient, reg)
    u64 const_scalar = 0;
    bool has_const = false;

    u32 peer = 0;
    MsgKind kind = MsgKind::E;
    u32 slot = 0;

    u32 mslot = 0;          // Offline slot
    comp::Family family = comp::Family::Triple;
    u8 component = 0;

    u32 io_index = 0;
    u32 wire = 0;
    u8 side = 0;
    u32 d = 0;
    ConvShape conv;
    std::string pub_name;

    u64 cost_mults = 0;  // simulator cost model input
    Shape shape;         // result shape (Recv allocation, validation)
    u64 elems = 0;       // Send/Recv payload elements
};

struct PartyProgram {
    u32 party = 1;
    std::vector<Instr> code;
    u32 num_regs = 0;
    // inputs[k] must hold the share of input_wires[k] (additive share for
    // n-PC; the m-component for trio P2/P3)
    std::vector<u32> input_wires;
    std::size_t output_count = 0;
};

struct EventProgram {
    std::vector<PartyProgram> parties;  // index party-1
};

// Compiles the plan into per-party programs. Sequential modes mirror the
// textbook flow; LR_TS_Concat hoists the static-weight Urev broadcasts to
// program start and overlaps each E opening (n-PC) / Wmsg wait (trio) with
// the independent half of the local multiply.
EventProgram schedule(const ExecutionPlan& plan);

} // namespace lrmpc
