#include "lrmpc/protocols.hpp"

#include <stdexcept>
#include <thread>

#include "lrmpc/errors.hpp"

namespace lrmpc {

namespace {

void check_unused(bool& used, const char* what) {
    if (used) throw std::runtime_error(std::string(what) + " reused; offline material is single-use");
    used = true;
}

RingTensor one_minus_two_s(const Ring& rg, const RingTensor& s) {
    RingTensor out(s.shape);
    for (std::size_t i = 0; i < s.size(); ++i) out.data[i] = rg.sub(1, rg.mul(2, s.data[i]));
    return out;
}

// splits public S into (msb, floor(S mod 2^{l-1} / 2^d))
void msb_split(const Ring& rg, const RingTensor& s, u32 d, RingTensor& msb, RingTensor& low) {
    msb = RingTensor(s.shape);
    low = RingTensor(s.shape);
    u64 half = 1ULL << (rg.l - 1);
    for (std::size_t i = 0; i < s.size(); ++i) {
        u64 v = s.data[i] & rg.mask;
        msb.data[i] = (rg.l == 64) ? (v >> 63) : ((v & half) ? 1 : 0);
        low.data[i] = (v & (half - 1)) >> d;
    }
}

} // namespace

void ProtocolCtx::send_tensor(u32 dst, MsgKind kind, u32 slot, const RingTensor& t) {
    Message m;
    m.slot = slot;
    m.kind = kind;
    m.payload = t.data;
    m.round_tag = round_chain;
    m.tagged = true;
    tr->send(dst, std::move(m));
}

RingTensor ProtocolCtx::recv_tensor(u32 src, MsgKind kind, u32 slot, const Shape& shape) {
    Message m = tr->recv(src);
    if (m.kind != kind || m.slot != slot)
        throw std::runtime_error(std::string("unexpected message: wanted ") + msg_kind_name(kind) +
                                 "/" + std::to_string(slot) + ", got " + msg_kind_name(m.kind) +
                                 "/" + std::to_string(m.slot));
    if (m.payload.size() != shape_elems(shape))
        throw std::runtime_error("message element count mismatch");
    if (m.tagged) round_chain = std::max(round_chain, m.round_tag + 1);
    return RingTensor(shape, std::move(m.payload));
}

RingTensor npc_open(const RingTensor& share, ProtocolCtx& ctx, MsgKind kind, u32 slot,
                    bool dealer_masked) {
    if (!dealer_masked && !ctx.allow_insecure)
        throw InsecureOpError("refusing to open an unmasked tensor without allow_insecure");
    Ring rg = ctx.ring();
    for (u32 p = 1; p <= ctx.n; ++p)
        if (p != ctx.party) ctx.send_tensor(p, kind, slot, share);
    RingTensor acc = share;
    for (u32 p = 1; p <= ctx.n; ++p)
        if (p != ctx.party) acc = ring_add(rg, acc, ctx.recv_tensor(p, kind, slot, share.shape));
    ++ctx.opens;
    return acc;
}

RingTensor trio_open(const TrioShare& share, ProtocolCtx& ctx, MsgKind kind, u32 slot,
                     bool dealer_masked, const Shape& shape) {
    if (!dealer_masked && !ctx.allow_insecure)
        throw InsecureOpError("refusing to open an unmasked tensor without allow_insecure");
    Ring rg = ctx.ring();
    ++ctx.opens;
    if (ctx.party == 2) {
        // P2 holds (m3, lam2): ships m3, learns lam3, forms m3 - lam3
        ctx.send_tensor(3, kind, slot, share.a);
        RingTensor lam3 = ctx.recv_tensor(3, kind, slot, shape);
        return ring_sub(rg, share.a, lam3);
    }
    if (ctx.party == 3) {
        // P3 holds (m2, lam3): ships lam3, learns m3
        ctx.send_tensor(2, kind, slot, share.b);
        RingTensor m3 = ctx.recv_tensor(2, kind, slot, shape);
        return ring_sub(rg, m3, share.b);
    }
    return RingTensor{};  // P1 receives nothing
}

NpcVal npc_matmul(const NpcVal& x, const NpcVal& y, BeaverTripleShare& triple, ProtocolCtx& ctx,
                  u32 slot) {
    check_unused(triple.used, "beaver triple");
    if (triple.elementwise) throw std::invalid_argument("npc_matmul: need a matmul triple");
    if (x.share.shape != triple.A.shape || y.share.shape != triple.B.shape)
        throw std::invalid_argument("npc_matmul: triple dims do not match operands");
    Ring rg = ctx.ring();

    RingTensor e_i = ring_sub(rg, x.share, triple.A);
    RingTensor u_i = ring_sub(rg, y.share, triple.B);
    // E and Urev broadcast back to back: one round
    for (u32 p = 1; p <= ctx.n; ++p) {
        if (p == ctx.party) continue;
        ctx.send_tensor(p, MsgKind::E, slot, e_i);
        ctx.send_tensor(p, MsgKind::Urev, slot, u_i);
    }
    RingTensor E = e_i, U = u_i;
    for (u32 p = 1; p <= ctx.n; ++p) {
        if (p == ctx.party) continue;
        E = ring_add(rg, E, ctx.recv_tensor(p, MsgKind::E, slot, e_i.shape));
        U = ring_add(rg, U, ctx.recv_tensor(p, MsgKind::Urev, slot, u_i.shape));
    }
    ++ctx.opens;

    RingTensor z = ring_add(rg, ring_matmul(rg, E, triple.B), ring_matmul(rg, triple.A, U));
    z = ring_add(rg, z, triple.C);
    if (ctx.party == 1) z = ring_add(rg, z, ring_matmul(rg, E, U));
    return {std::move(z), x.frac + y.frac};
}

NpcVal npc_square(const NpcVal& x, BeaverTripleShare& triple, ProtocolCtx& ctx, u32 slot) {
    check_unused(triple.used, "beaver triple");
    if (!triple.elementwise) throw std::invalid_argument("npc_square: need an elementwise triple");
    Ring rg = ctx.ring();

    RingTensor e_i = ring_sub(rg, x.share, triple.A);
    RingTensor u_i = ring_sub(rg, x.share, triple.B);
    for (u32 p = 1; p <= ctx.n; ++p) {
        if (p == ctx.party) continue;
        ctx.send_tensor(p, MsgKind::E, slot, e_i);
        ctx.send_tensor(p, MsgKind::Urev, slot, u_i);
    }
    RingTensor E = e_i, U = u_i;
    for (u32 p = 1; p <= ctx.n; ++p) {
        if (p == ctx.party) continue;
        E = ring_add(rg, E, ctx.recv_tensor(p, MsgKind::E, slot, e_i.shape));
        U = ring_add(rg, U, ctx.recv_tensor(p, MsgKind::Urev, slot, u_i.shape));
    }
    ++ctx.opens;

    RingTensor z = ring_add(rg, ring_elt_mul(rg, E, triple.B), ring_elt_mul(rg, triple.A, U));
    z = ring_add(rg, z, triple.C);
    if (ctx.party == 1) z = ring_add(rg, z, ring_elt_mul(rg, E, U));
    return {std::move(z), 2 * x.frac};
}

TrioVal trio_matmul(const TrioVal& x, const TrioVal& y, TrioPrepShare& prep, ProtocolCtx& ctx,
                    u32 slot) {
    check_unused(prep.used, "trio prep");
    Ring rg = ctx.ring();
    auto prod = [&](const RingTensor& a, const RingTensor& b) {
        return prep.elementwise ? ring_elt_mul(rg, a, b) : ring_matmul(rg, a, b);
    };

    if (ctx.party == 1) {
        // everything P1 contributes happened offline
        return {TrioShare{PartyId{1}, *prep.lamZ2, *prep.lamZ3}, x.frac + y.frac};
    }
    if (ctx.party == 2) {
        const RingTensor &mX3 = x.share.a, &lamX2 = x.share.b;
        const RingTensor &mY3 = y.share.a, &lamY2 = y.share.b;
        RingTensor V = ring_sub(rg, prep.MN, ring_add(rg, prod(mX3, lamY2), prod(lamX2, mY3)));
        ctx.send_tensor(3, MsgKind::Vmsg, slot, V);
        RingTensor local = prod(mX3, mY3);
        Shape zshape = local.shape;
        RingTensor W = ctx.recv_tensor(3, MsgKind::Wmsg, slot, zshape);
        RingTensor mZ3 = ring_add(rg, local, W);
        RingTensor lamZ2 = *prep.lamZ2;
        return {TrioShare{PartyId{2}, std::move(mZ3), std::move(lamZ2)}, x.frac + y.frac};
    }
    // party 3
    const RingTensor &mX2 = x.share.a, &lamX3 = x.share.b;
    const RingTensor &mY2 = y.share.a, &lamY3 = y.share.b;
    RingTensor W = ring_sub(rg, prep.MN, ring_add(rg, prod(mX2, lamY3), prod(lamX3, mY2)));
    ctx.send_tensor(2, MsgKind::Wmsg, slot, W);
    RingTensor local = prod(mX2, mY2);
    RingTensor V = ctx.recv_tensor(2, MsgKind::Vmsg, slot, local.shape);
    RingTensor mZ2 = ring_add(rg, local, V);
    RingTensor lamZ3 = *prep.lamZ3;
    return {TrioShare{PartyId{3}, std::move(mZ2), std::move(lamZ3)}, x.frac + y.frac};
}

TrioVal trio_square(const TrioVal& x, TrioPrepShare& prep, ProtocolCtx& ctx, u32 slot) {
    if (!prep.elementwise) throw std::invalid_argument("trio_square: need elementwise prep");
    return trio_matmul(x, x, prep, ctx, slot);
}

NpcVal npc_trunc(const NpcVal& z, u32 d, TruncMaskShare& mask, ProtocolCtx& ctx, u32 slot) {
    check_unused(mask.used, "trunc mask");
    if (mask.d != d) throw std::invalid_argument("npc_trunc: mask was generated for different d");
    if (z.frac < d || z.frac - d != ctx.cfg.f)
        throw std::invalid_argument("npc_trunc: d must equal pending fraction minus f");
    Ring rg = ctx.ring();

    // [S] = [z] + 2^{l-2} + [B]*2^{l-1} + [R]*2^d + [R']
    RingTensor s = ring_add(rg, z.share, ring_scale(rg, rg.pow2(rg.l - 1), mask.Bbit));
    s = ring_add(rg, s, ring_scale(rg, rg.pow2(d), mask.R));
    s = ring_add(rg, s, mask.Rp);
    if (ctx.party == 1) {
        RingTensor bias(s.shape);
        for (auto& v : bias.data) v = rg.pow2(rg.l - 2);
        s = ring_add(rg, s, bias);
    }

    RingTensor S = npc_open(s, ctx, MsgKind::SOpen, slot, /*dealer_masked=*/true);

    RingTensor msb, low;
    msb_split(rg, S, d, msb, low);
    // [y] = pub(low + msb*2^{l-1-d} - 2^{l-2-d}) - [R] + (1-2s).[B]*2^{l-1-d}
    RingTensor wpart = ring_scale(rg, rg.pow2(rg.l - 1 - d),
                                  ring_elt_mul(rg, one_minus_two_s(rg, msb), mask.Bbit));
    RingTensor y = ring_sub(rg, wpart, mask.R);
    if (ctx.party == 1) {
        RingTensor pub = ring_add(rg, low, ring_scale(rg, rg.pow2(rg.l - 1 - d), msb));
        RingTensor bias(pub.shape);
        for (auto& v : bias.data) v = rg.pow2(rg.l - 2 - d);
        pub = ring_sub(rg, pub, bias);
        y = ring_add(rg, y, pub);
    }
    return {std::move(y), z.frac - d};
}

TrioVal trio_trunc(const TrioVal& z, u32 d, TruncMaskShare& mask, ProtocolCtx& ctx, u32 slot) {
    check_unused(mask.used, "trunc mask");
    if (mask.d != d) throw std::invalid_argument("trio_trunc: mask was generated for different d");
    if (z.frac < d || z.frac - d != ctx.cfg.f)
        throw std::invalid_argument("trio_trunc: d must equal pending fraction minus f");
    Ring rg = ctx.ring();
    u32 out_frac = z.frac - d;

    if (ctx.party == 1) {
        // output masks are offline material
        return {TrioShare{PartyId{1}, *mask.lam_out2, *mask.lam_out3}, out_frac};
    }

    // free conversion to a P2/P3 additive sharing: z = mZ3 + (-lamZ3)
    RingTensor a = ctx.party == 2 ? z.share.a : ring_neg(rg, z.share.b);
    Shape shape = a.shape;
    u32 peer = ctx.party == 2 ? 3 : 2;

    RingTensor s = ring_add(rg, a, ring_scale(rg, rg.pow2(rg.l - 1), mask.Bbit));
    s = ring_add(rg, s, ring_scale(rg, rg.pow2(d), mask.R));
    s = ring_add(rg, s, mask.Rp);
    if (ctx.party == 2) {
        RingTensor bias(s.shape);
        for (auto& v : bias.data) v = rg.pow2(rg.l - 2);
        s = ring_add(rg, s, bias);
    }

    // round 1: exchange additive S shares
    ctx.send_tensor(peer, MsgKind::SOpen, slot, s);
    RingTensor S = ring_add(rg, s, ctx.recv_tensor(peer, MsgKind::SOpen, slot, shape));
    ++ctx.opens;

    RingTensor msb, low;
    msb_split(rg, S, d, msb, low);
    RingTensor wpart = ring_scale(rg, rg.pow2(rg.l - 1 - d),
                                  ring_elt_mul(rg, one_minus_two_s(rg, msb), mask.Bbit));
    RingTensor y = ring_sub(rg, wpart, mask.R);
    if (ctx.party == 2) {
        RingTensor pub = ring_add(rg, low, ring_scale(rg, rg.pow2(rg.l - 1 - d), msb));
        RingTensor bias(pub.shape);
        for (auto& v : bias.data) v = rg.pow2(rg.l - 2 - d);
        pub = ring_sub(rg, pub, bias);
        y = ring_add(rg, y, pub);
    }

    // round 2: re-share onto the fresh offline masks so P1 stays offline-only
    const RingTensor& lam_mine = ctx.party == 2 ? *mask.lam_out2 : *mask.lam_out3;
    RingTensor t_mine = ring_add(rg, y, lam_mine);
    ctx.send_tensor(peer, MsgKind::Remask, slot, t_mine);
    RingTensor t_peer = ctx.recv_tensor(peer, MsgKind::Remask, slot, shape);
    RingTensor m_out = ring_add(rg, y, t_peer);
    if (ctx.party == 2) {
        // m_out = y2 + (y3 + lam3) = y + lamY3 = mY3
        return {TrioShare{PartyId{2}, std::move(m_out), *mask.lam_out2}, out_frac};
    }
    return {TrioShare{PartyId{3}, std::move(m_out), *mask.lam_out3}, out_frac};
}

NpcVal lowrank_linear(const NpcVal& x, const NpcVal& u, const NpcVal& v, LowrankStep& st,
                      ProtocolCtx& ctx, u32 slot_base) {
    if (st.skip_trunc) {
        if (3 * ctx.cfg.f + 2 > ctx.cfg.l)
            throw std::invalid_argument("truncation skipping needs 3f+2 <= l");
        NpcVal xu = npc_matmul(x, u, *st.t_xu, ctx, slot_base);
        NpcVal xuv = npc_matmul(xu, v, *st.t_vo, ctx, slot_base + 1);
        return npc_trunc(xuv, 2 * ctx.cfg.f, *st.mask_end, ctx, slot_base + 2);
    }
    NpcVal xu = npc_matmul(x, u, *st.t_xu, ctx, slot_base);
    NpcVal xut = npc_trunc(xu, ctx.cfg.f, *st.mask_mid, ctx, slot_base + 1);
    NpcVal xuv = npc_matmul(xut, v, *st.t_vo, ctx, slot_base + 2);
    return npc_trunc(xuv, ctx.cfg.f, *st.mask_end, ctx, slot_base + 3);
}

TrioVal lowrank_linear(const TrioVal& x, const TrioVal& u, const TrioVal& v, LowrankStep& st,
                       ProtocolCtx& ctx, u32 slot_base) {
    if (st.skip_trunc) {
        if (3 * ctx.cfg.f + 2 > ctx.cfg.l)
            throw std::invalid_argument("truncation skipping needs 3f+2 <= l");
        TrioVal xu = trio_matmul(x, u, *st.p_xu, ctx, slot_base);
        TrioVal xuv = trio_matmul(xu, v, *st.p_vo, ctx, slot_base + 1);
        return trio_trunc(xuv, 2 * ctx.cfg.f, *st.mask_end, ctx, slot_base + 2);
    }
    TrioVal xu = trio_matmul(x, u, *st.p_xu, ctx, slot_base);
    TrioVal xut = trio_trunc(xu, ctx.cfg.f, *st.mask_mid, ctx, slot_base + 1);
    TrioVal xuv = trio_matmul(xut, v, *st.p_vo, ctx, slot_base + 2);
    return trio_trunc(xuv, ctx.cfg.f, *st.mask_end, ctx, slot_base + 3);
}

NpcVal square_activation(const NpcVal& x, BeaverTripleShare& triple, TruncMaskShare& mask,
                         ProtocolCtx& ctx, u32 slot_base) {
    NpcVal sq = npc_square(x, triple, ctx, slot_base);
    return npc_trunc(sq, ctx.cfg.f, mask, ctx, slot_base + 1);
}

TrioVal square_activation(const TrioVal& x, TrioPrepShare& prep, TruncMaskShare& mask,
                          ProtocolCtx& ctx, u32 slot_base) {
    TrioVal sq = trio_square(x, prep, ctx, slot_base);
    return trio_trunc(sq, ctx.cfg.f, mask, ctx, slot_base + 1);
}

RingTensor relu_public(const RingTensor& x, const Ring& rg) {
    RingTensor out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i)
        out.data[i] = rg.to_signed(x.data[i]) > 0 ? rg.reduce(x.data[i]) : 0;
    return out;
}

NpcVal debug_relu(const NpcVal& x, ProtocolCtx& ctx, u32 slot) {
    if (!ctx.allow_insecure)
        throw InsecureOpError("debug_relu refused: allow_insecure is not set");
    ctx.insecure_ops.push_back("debug_relu");
    Ring rg = ctx.ring();
    RingTensor opened = npc_open(x.share, ctx, MsgKind::Debug, slot, /*dealer_masked=*/false);
    RingTensor r = relu_public(opened, rg);
    // canonical re-share of a public value: party 1 carries it, others zero
    if (ctx.party != 1) r = RingTensor::zeros(r.shape);
    return {std::move(r), x.frac};
}

TrioVal debug_relu(const TrioVal& x, ProtocolCtx& ctx, u32 slot, const Shape& shape) {
    if (!ctx.allow_insecure)
        throw InsecureOpError("debug_relu refused: allow_insecure is not set");
    ctx.insecure_ops.push_back("debug_relu");
    Ring rg = ctx.ring();
    RingTensor opened = trio_open(x.share, ctx, MsgKind::Debug, slot, /*dealer_masked=*/false, shape);
    if (ctx.party == 1)
        return {TrioShare{PartyId{1}, RingTensor::zeros(shape), RingTensor::zeros(shape)}, x.frac};
    RingTensor r = relu_public(opened, rg);
    if (ctx.party == 2)
        return {TrioShare{PartyId{2}, std::move(r), RingTensor::zeros(shape)}, x.frac};
    return {TrioShare{PartyId{3}, std::move(r), RingTensor::zeros(shape)}, x.frac};
}

void run_parties(u32 n, Topology topo, u32 session,
                 const std::function<void(u32 party, Transport&)>& body) {
    LocalHub hub(n, topo, session);
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(n);
    for (u32 p = 1; p <= n; ++p) {
        threads.emplace_back([&, p] {
            try {
                auto tr = hub.transport(p);
                body(p, *tr);
            } catch (...) {
                errors[p - 1] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace lrmpc
