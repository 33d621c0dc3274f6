#pragma once

#include <functional>

#include "lrmpc/net.hpp"
#include "lrmpc/offline.hpp"

namespace lrmpc {

// One party's protocol runtime state: transport handle, fixed-point config,
// round/byte accounting. Confined to that party's thread.
struct ProtocolCtx {
    Scheme scheme = Scheme::Additive;
    u32 n = 2;      // party count (3 under trio)
    u32 party = 1;  // 1-based
    Transport* tr = nullptr;
    FixedPointConfig cfg;
    bool allow_insecure = false;

    // longest blocking-recv chain observed by this party; message tags let
    // the in-process transport propagate the sender's chain position
    u64 round_chain = 0;
    u64 opens = 0;
    std::vector<std::string> insecure_ops;

    Ring ring() const { return cfg.ring(); }

    void send_tensor(u32 dst, MsgKind kind, u32 slot, const RingTensor& t);
    RingTensor recv_tensor(u32 src, MsgKind kind, u32 slot, const Shape& shape);
};

// Share of a wire value plus its pending fraction bits (f after every layer
// boundary, 2f or 3f mid-layer).
struct NpcVal {
    RingTensor share;
    u32 frac = 0;
};
struct TrioVal {
    TrioShare share;
    u32 frac = 0;
};

// ---------- openings ----------

// Broadcast-open an additively shared tensor: every party sends its share to
// every peer and sums what it receives. Exactly one round. `dealer_masked`
// must be true unless the caller is an explicitly insecure debug op.
RingTensor npc_open(const RingTensor& share, ProtocolCtx& ctx, MsgKind kind, u32 slot,
                    bool dealer_masked);

// Trio open between P2 and P3 (one parallel round): P2 -> P3 the m3
// component, P3 -> P2 the lam3 component; both form m3 - lam3. P1 receives
// nothing and gets an empty tensor.
RingTensor trio_open(const TrioShare& share, ProtocolCtx& ctx, MsgKind kind, u32 slot,
                     bool dealer_masked, const Shape& shape);

// ---------- multiplication ----------

// Beaver matrix multiplication. Opens E = X-A and Urev = Y-B back to back
// (one round) and combines locally:
//   [Z]_i = E.[B]_i + [A]_i.Urev + [C]_i   (+ E.Urev at party 1)
NpcVal npc_matmul(const NpcVal& x, const NpcVal& y, BeaverTripleShare& triple, ProtocolCtx& ctx,
                  u32 slot);
// Elementwise Beaver product of a value with itself.
NpcVal npc_square(const NpcVal& x, BeaverTripleShare& triple, ProtocolCtx& ctx, u32 slot);

// Trio multiplication: P2 sends Vmsg, P3 sends Wmsg (one parallel round,
// P1 silent online):
//   Vmsg = -mX3.lamY2 - lamX2.mY3 + N        (P2 -> P3)
//   Wmsg = -mX2.lamY3 - lamX3.mY2 + M        (P3 -> P2)
//   P2: mZ3 = mX3.mY3 + Wmsg;  P3: mZ2 = mX2.mY2 + Vmsg
TrioVal trio_matmul(const TrioVal& x, const TrioVal& y, TrioPrepShare& prep, ProtocolCtx& ctx,
                    u32 slot);
TrioVal trio_square(const TrioVal& x, TrioPrepShare& prep, ProtocolCtx& ctx, u32 slot);

// ---------- truncation ----------

// Probabilistic Trunc^d: bias by 2^{l-2}, open S = xhat + Bbit*2^{l-1} +
// R*2^d + R', then locally
//   [y] = floor(S'/2^d) - [R] + [w]*2^{l-1-d} - 2^{l-2-d},  w = s_msb xor Bbit
// The result equals floor(signed(z)/2^d) + e with e in {0,1}. One round.
NpcVal npc_trunc(const NpcVal& z, u32 d, TruncMaskShare& mask, ProtocolCtx& ctx, u32 slot);

// Trio truncation. The opening core runs on the free P2/P3 additive view
// (z = mZ3 - lamZ3); a second parallel exchange re-shares the result onto
// the fresh offline masks carried by the trunc material, so P1's components
// stay offline-derivable. Two rounds total.
TrioVal trio_trunc(const TrioVal& z, u32 d, TruncMaskShare& mask, ProtocolCtx& ctx, u32 slot);

// ---------- composite and activations ----------

struct LowrankStep {
    BeaverTripleShare* t_xu = nullptr;   // n-PC triples
    BeaverTripleShare* t_vo = nullptr;
    TrioPrepShare* p_xu = nullptr;       // trio preps
    TrioPrepShare* p_vo = nullptr;
    TruncMaskShare* mask_mid = nullptr;  // unused when skipping
    TruncMaskShare* mask_end = nullptr;
    bool skip_trunc = false;
};

// x.U.V with per-step truncation (4 rounds n-PC) or a single Trunc^{2f}
// (3 rounds n-PC) when skip_trunc is set.
NpcVal lowrank_linear(const NpcVal& x, const NpcVal& u, const NpcVal& v, LowrankStep& st,
                      ProtocolCtx& ctx, u32 slot_base);
TrioVal lowrank_linear(const TrioVal& x, const TrioVal& u, const TrioVal& v, LowrankStep& st,
                       ProtocolCtx& ctx, u32 slot_base);

// x^2 via one Beaver product plus Trunc^f.
NpcVal square_activation(const NpcVal& x, BeaverTripleShare& triple, TruncMaskShare& mask,
                         ProtocolCtx& ctx, u32 slot_base);
TrioVal square_activation(const TrioVal& x, TrioPrepShare& prep, TruncMaskShare& mask,
                          ProtocolCtx& ctx, u32 slot_base);

// INSECURE debug ReLU: opens the value, applies plaintext ReLU, re-shares
// canonically (party 1 / the m components hold the value, masks zero).
// Refused unless ctx.allow_insecure; flagged in ctx.insecure_ops.
NpcVal debug_relu(const NpcVal& x, ProtocolCtx& ctx, u32 slot);
TrioVal debug_relu(const TrioVal& x, ProtocolCtx& ctx, u32 slot, const Shape& shape);

// Signed ring ReLU on an opened (public) tensor.
RingTensor relu_public(const RingTensor& x, const Ring& rg);

// Runs one closure per party over an in-process hub; used by tests and the
// in-process engine driver.
void run_parties(u32 n, Topology topo, u32 session,
                 const std::function<void(u32 party, Transport&)>& body);

} // namespace lrmpc
