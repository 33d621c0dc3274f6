#include "lrmpc/program.hpp"

#include "lrmpc/errors.hpp"

namespace lrmpc {

namespace {

constexpr u64 kNegOne = ~0ULL;  // -1 mod 2^l after masking

struct Emit {
    const ExecutionPlan& plan;
    u32 party;
    Ring rg;
    PartyProgram prog;
    std::map<u32, u32> wire_reg;                    // wire -> share / m-component reg
    std::map<std::pair<u32, int>, u32> lam_reg;     // trio lambda registers
    std::map<std::pair<u32, u8>, u32> triple_reg;   // (slot, comp) -> reg
    std::map<std::pair<u32, u8>, u32> mask_reg;
    std::map<std::pair<u32, u8>, u32> prep_reg;
    std::map<std::string, u32> pub_reg;
    std::map<u32, Shape> reg_shape;

    u32 alloc(const Shape& s) {
        u32 r = prog.num_regs++;
        reg_shape[r] = s;
        return r;
    }

    Instr& push(Instr in) {
        prog.code.push_back(std::move(in));
        return prog.code.back();
    }

    u32 input(u32 wire) {
        auto it = wire_reg.find(wire);
        if (it != wire_reg.end()) return it->second;
        const Shape& s = plan.wires.at(wire).shape;
        u32 r = alloc(s);
        Instr in;
        in.op = IOp::Input;
        in.dst = r;
        in.io_index = static_cast<u32>(prog.input_wires.size());
        in.shape = s;
        prog.input_wires.push_back(wire);
        push(std::move(in));
        wire_reg[wire] = r;
        return r;
    }

    u32 offline(u32 slot, comp::Family fam, u8 component, const Shape& s) {
        auto& memo = fam == comp::Family::Triple ? triple_reg
                     : fam == comp::Family::Mask ? mask_reg
                                                 : prep_reg;
        auto key = std::make_pair(slot, component);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        u32 r = alloc(s);
        Instr in;
        in.op = IOp::Offline;
        in.dst = r;
        in.mslot = slot;
        in.family = fam;
        in.component = component;
        in.shape = s;
        push(std::move(in));
        memo[key] = r;
        return r;
    }

    u32 load_pub(const std::string& name) {
        auto it = pub_reg.find(name);
        if (it != pub_reg.end()) return it->second;
        const Shape& s = plan.publics.at(name).shape;
        u32 r = alloc(s);
        Instr in;
        in.op = IOp::LoadPub;
        in.dst = r;
        in.pub_name = name;
        in.shape = s;
        push(std::move(in));
        pub_reg[name] = r;
        return r;
    }

    u32 lin(const std::vector<std::pair<u64, u32>>& terms, u64 cst, bool has_cst) {
        const Shape& s = reg_shape.at(terms.at(0).second);
        u32 r = alloc(s);
        Instr in;
        in.op = IOp::Lin;
        in.dst = r;
        in.terms = terms;
        in.const_scalar = cst;
        in.has_const = has_cst;
        in.shape = s;
        in.cost_mults = shape_elems(s);
        push(std::move(in));
        return r;
    }
    u32 lin(const std::vector<std::pair<u64, u32>>& terms) { return lin(terms, 0, false); }

    u32 matmul(u32 a, u32 b) {
        const Shape& sa = reg_shape.at(a);
        const Shape& sb = reg_shape.at(b);
        Shape out{sa[0], sb[1]};
        u32 r = alloc(out);
        Instr in;
        in.op = IOp::Matmul;
        in.dst = r;
        in.a = a;
        in.b = b;
        in.shape = out;
        in.cost_mults = static_cast<u64>(sa[0]) * sa[1] * sb[1];
        push(std::move(in));
        return r;
    }

    u32 elt_mul(u32 a, u32 b) {
        const Shape& s = reg_shape.at(a);
        u32 r = alloc(s);
        Instr in;
        in.op = IOp::EltMul;
        in.dst = r;
        in.a = a;
        in.b = b;
        in.shape = s;
        in.cost_mults = shape_elems(s);
        push(std::move(in));
        return r;
    }

    u32 zero(const Shape& s) {
        u32 r = alloc(s);
        Instr in;
        in.op = IOp::Zero;
        in.dst = r;
        in.shape = s;
        push(std::move(in));
        return r;
    }

    void send(u32 reg, u32 peer, MsgKind kind, u32 slot) {
        Instr in;
        in.op = IOp::Send;
        in.a = reg;
        in.peer = peer;
        in.kind = kind;
        in.slot = slot;
        in.elems = shape_elems(reg_shape.at(reg));
        push(std::move(in));
    }

    u32 recv(u32 peer, MsgKind kind, u32 slot, const Shape& s) {
        u32 r = alloc(s);
        Instr in;
        in.op = IOp::Recv;
        in.dst = r;
        in.peer = peer;
        in.kind = kind;
        in.slot = slot;
        in.shape = s;
        in.elems = shape_elems(s);
        push(std::move(in));
        return r;
    }

    // ---- trio lambda resolver: emits the instructions deriving a mask ----
    u32 lam(u32 wire, int side) {
        if (party == 2 && side == 3) throw ValidationError("P2 cannot derive 3-side masks");
        if (party == 3 && side == 2) throw ValidationError("P3 cannot derive 2-side masks");
        auto key = std::make_pair(wire, side);
        auto it = lam_reg.find(key);
        if (it != lam_reg.end()) return it->second;
        const WireLambdaRule& rule = plan.lambda_rules.at(wire);
        u32 r;
        switch (rule.kind) {
        case WireLambdaRule::Kind::Prf: {
            r = alloc(rule.shape);
            Instr in;
            in.op = IOp::PrfLam;
            in.dst = r;
            in.wire = wire;
            in.side = static_cast<u8>(side);
            in.shape = rule.shape;
            in.cost_mults = shape_elems(rule.shape);
            push(std::move(in));
            break;
        }
        case WireLambdaRule::Kind::Zero:
            r = zero(rule.shape);
            break;
        case WireLambdaRule::Kind::Im2col: {
            u32 src = lam(rule.src_wire, side);
            r = alloc(rule.shape);
            Instr in;
            in.op = IOp::Im2col;
            in.dst = r;
            in.a = src;
            in.conv = rule.conv;
            in.shape = rule.shape;
            in.cost_mults = shape_elems(rule.shape);
            push(std::move(in));
            break;
        }
        case WireLambdaRule::Kind::PublicMatmulLeft: {
            u32 src = lam(rule.src_wire, side);
            u32 p = load_pub(rule.pub_name);
            r = matmul(p, src);
            break;
        }
        case WireLambdaRule::Kind::TruncMaskOut: {
            const Shape& s = rule.shape;
            r = offline(rule.src_slot, comp::Family::Mask,
                        side == 2 ? comp::kMaskLam2 : comp::kMaskLam3, s);
            break;
        }
        default:
            throw ValidationError("unhandled lambda rule");
        }
        lam_reg[key] = r;
        return r;
    }
};

// ---------------- n-PC compilation ----------------

struct NpcCompiler {
    Emit& e;
    const ExecutionPlan& plan;
    bool pipelined;
    // per matmul slot: the public-U accumulation register once opened
    std::map<u32, u32> hoisted_u;  // slot -> own Urev contribution reg

    void hoist_static_urev() {
        for (const auto& op : plan.ops) {
            if (op.kind != OpKind::Matmul) continue;
            if (!plan.weight_tensor_names.count(op.y_wire)) continue;
            u32 y = e.input(op.y_wire);
            u32 B = e.offline(op.slot, comp::Family::Triple, comp::kTripleB, {op.n, op.o});
            u32 u_i = e.lin({{1, y}, {kNegOne, B}});
            for (u32 p = 1; p <= plan.parties(); ++p)
                if (p != e.party) e.send(u_i, p, MsgKind::Urev, op.slot);
            hoisted_u[op.slot] = u_i;
        }
    }

    u32 open_sum(u32 own, MsgKind kind, u32 slot, const Shape& s) {
        std::vector<std::pair<u64, u32>> terms{{1, own}};
        for (u32 p = 1; p <= plan.parties(); ++p)
            if (p != e.party) terms.emplace_back(1, e.recv(p, kind, slot, s));
        return e.lin(terms);
    }

    void matmul_op(const PlanOp& op) {
        u32 x = e.wire_reg.at(op.x_wire);
        u32 A = e.offline(op.slot, comp::Family::Triple, comp::kTripleA, {op.m, op.n});
        u32 B = e.offline(op.slot, comp::Family::Triple, comp::kTripleB, {op.n, op.o});
        u32 C = e.offline(op.slot, comp::Family::Triple, comp::kTripleC, {op.m, op.o});

        u32 e_i = e.lin({{1, x}, {kNegOne, A}});
        for (u32 p = 1; p <= plan.parties(); ++p)
            if (p != e.party) e.send(e_i, p, MsgKind::E, op.slot);

        u32 u_i;
        if (pipelined && hoisted_u.count(op.slot)) {
            u_i = hoisted_u.at(op.slot);
        } else {
            u32 y = e.input(op.y_wire);
            u_i = e.lin({{1, y}, {kNegOne, B}});
            for (u32 p = 1; p <= plan.parties(); ++p)
                if (p != e.party) e.send(u_i, p, MsgKind::Urev, op.slot);
        }

        if (pipelined) {
            // A.U first: its inputs are local, so the E flight time hides
            // underneath this multiply
            u32 U = open_sum(u_i, MsgKind::Urev, op.slot, {op.n, op.o});
            u32 au = e.matmul(A, U);
            u32 E = open_sum(e_i, MsgKind::E, op.slot, {op.m, op.n});
            u32 eb = e.matmul(E, B);
            std::vector<std::pair<u64, u32>> terms{{1, eb}, {1, au}, {1, C}};
            if (e.party == 1) terms.emplace_back(1, e.matmul(E, U));
            e.wire_reg[op.z_wire] = e.lin(terms);
        } else {
            u32 E = open_sum(e_i, MsgKind::E, op.slot, {op.m, op.n});
            u32 U = open_sum(u_i, MsgKind::Urev, op.slot, {op.n, op.o});
            u32 eb = e.matmul(E, B);
            u32 au = e.matmul(A, U);
            std::vector<std::pair<u64, u32>> terms{{1, eb}, {1, au}, {1, C}};
            if (e.party == 1) terms.emplace_back(1, e.matmul(E, U));
            e.wire_reg[op.z_wire] = e.lin(terms);
        }
    }

    void square_op(const PlanOp& op) {
        u32 x = e.wire_reg.at(op.x_wire);
        u32 A = e.offline(op.slot, comp::Family::Triple, comp::kTripleA, op.shape);
        u32 B = e.offline(op.slot, comp::Family::Triple, comp::kTripleB, op.shape);
        u32 C = e.offline(op.slot, comp::Family::Triple, comp::kTripleC, op.shape);
        u32 e_i = e.lin({{1, x}, {kNegOne, A}});
        u32 u_i = e.lin({{1, x}, {kNegOne, B}});
        for (u32 p = 1; p <= plan.parties(); ++p) {
            if (p == e.party) continue;
            e.send(e_i, p, MsgKind::E, op.slot);
            e.send(u_i, p, MsgKind::Urev, op.slot);
        }
        u32 E = open_sum(e_i, MsgKind::E, op.slot, op.shape);
        u32 U = open_sum(u_i, MsgKind::Urev, op.slot, op.shape);
        u32 eb = e.elt_mul(E, B);
        u32 au = e.elt_mul(A, U);
        std::vector<std::pair<u64, u32>> terms{{1, eb}, {1, au}, {1, C}};
        if (e.party == 1) terms.emplace_back(1, e.elt_mul(E, U));
        e.wire_reg[op.z_wire] = e.lin(terms);
    }

    void trunc_op(const PlanOp& op) {
        Ring rg = e.rg;
        u32 z = e.wire_reg.at(op.x_wire);
        u32 R = e.offline(op.slot, comp::Family::Mask, comp::kMaskR, op.shape);
        u32 Rp = e.offline(op.slot, comp::Family::Mask, comp::kMaskRp, op.shape);
        u32 Bb = e.offline(op.slot, comp::Family::Mask, comp::kMaskB, op.shape);

        std::vector<std::pair<u64, u32>> sterms{
            {1, z}, {rg.pow2(rg.l - 1), Bb}, {rg.pow2(op.d), R}, {1, Rp}};
        u32 s_i = e.party == 1 ? e.lin(sterms, rg.pow2(rg.l - 2), true) : e.lin(sterms);
        for (u32 p = 1; p <= plan.parties(); ++p)
            if (p != e.party) e.send(s_i, p, MsgKind::SOpen, op.slot);
        u32 S = open_sum(s_i, MsgKind::SOpen, op.slot, op.shape);

        u32 msb = e.alloc(op.shape);
        u32 low = e.alloc(op.shape);
        {
            Instr in;
            in.op = IOp::MsbSplit;
            in.dst = msb;
            in.dst2 = low;
            in.a = S;
            in.d = op.d;
            in.shape = op.shape;
            in.cost_mults = shape_elems(op.shape);
            e.push(std::move(in));
        }
        u32 one_m2s = e.lin({{rg.sub(0, 2), msb}}, 1, true);
        u32 wb = e.elt_mul(one_m2s, Bb);
        if (e.party == 1) {
            e.wire_reg[op.z_wire] =
                e.lin({{1, low},
                       {rg.pow2(rg.l - 1 - op.d), msb},
                       {rg.pow2(rg.l - 1 - op.d), wb},
                       {kNegOne, R}},
                      rg.neg(rg.pow2(rg.l - 2 - op.d)), true);
        } else {
            e.wire_reg[op.z_wire] = e.lin({{rg.pow2(rg.l - 1 - op.d), wb}, {kNegOne, R}});
        }
    }

    void debug_relu_op(const PlanOp& op) {
        u32 x = e.wire_reg.at(op.x_wire);
        for (u32 p = 1; p <= plan.parties(); ++p)
            if (p != e.party) e.send(x, p, MsgKind::Debug, op.slot);
        u32 opened = open_sum(x, MsgKind::Debug, op.slot, op.shape);
        if (e.party == 1) {
            u32 r = e.alloc(op.shape);
            Instr in;
            in.op = IOp::ReluPub;
            in.dst = r;
            in.a = opened;
            in.shape = op.shape;
            in.cost_mults = shape_elems(op.shape);
            e.push(std::move(in));
            e.wire_reg[op.z_wire] = r;
        } else {
            e.wire_reg[op.z_wire] = e.zero(op.shape);
        }
    }

    void compile() {
        e.input(plan.input_wire);
        if (pipelined) hoist_static_urev();
        for (const auto& op : plan.ops) {
            switch (op.kind) {
            case OpKind::Matmul:
                matmul_op(op);
                break;
            case OpKind::EltSquare:
                square_op(op);
                break;
            case OpKind::Trunc:
                trunc_op(op);
                break;
            case OpKind::Im2col: {
                u32 x = e.wire_reg.at(op.x_wire);
                u32 r = e.alloc(plan.wires.at(op.z_wire).shape);
                Instr in;
                in.op = IOp::Im2col;
                in.dst = r;
                in.a = x;
                in.conv = op.conv;
                in.shape = plan.wires.at(op.z_wire).shape;
                in.cost_mults = shape_elems(in.shape);
                e.push(std::move(in));
                e.wire_reg[op.z_wire] = r;
                break;
            }
            case OpKind::PublicMatmulLeft: {
                u32 x = e.wire_reg.at(op.x_wire);
                u32 p = e.load_pub(op.public_name);
                e.wire_reg[op.z_wire] = e.matmul(p, x);
                break;
            }
            case OpKind::DebugRelu:
                debug_relu_op(op);
                break;
            }
        }
        Instr out;
        out.op = IOp::Output;
        out.a = e.wire_reg.at(plan.output_wire);
        out.io_index = 0;
        e.push(std::move(out));
        e.prog.output_count = 1;
    }
};

// ---------------- trio compilation ----------------

struct TrioCompiler {
    Emit& e;
    const ExecutionPlan& plan;
    bool pipelined;

    int my_side() const { return e.party == 2 ? 2 : 3; }
    u32 peer() const { return e.party == 2 ? 3 : 2; }

    void matmul_like(const PlanOp& op, bool elementwise) {
        Shape zshape = plan.wires.at(op.z_wire).shape;
        if (e.party == 1) return;  // P1 is offline-only

        int side = my_side();
        u32 mX = e.wire_reg.count(op.x_wire) ? e.wire_reg.at(op.x_wire) : e.input(op.x_wire);
        u32 mY = e.wire_reg.count(op.y_wire) ? e.wire_reg.at(op.y_wire) : e.input(op.y_wire);
        u32 lamX = e.lam(op.x_wire, side);
        u32 lamY = e.lam(op.y_wire, side);
        u32 MN = e.offline(op.slot, comp::Family::Prep, comp::kPrepMN, zshape);

        auto prod = [&](u32 a, u32 b) { return elementwise ? e.elt_mul(a, b) : e.matmul(a, b); };

        // P2: V = N - mX3.lamY2 - lamX2.mY3 ; P3: W = M - mX2.lamY3 - lamX3.mY2
        u32 t1 = prod(mX, lamY);
        u32 t2 = prod(lamX, mY);
        u32 msg = e.lin({{1, MN}, {kNegOne, t1}, {kNegOne, t2}});
        MsgKind out_kind = e.party == 2 ? MsgKind::Vmsg : MsgKind::Wmsg;
        MsgKind in_kind = e.party == 2 ? MsgKind::Wmsg : MsgKind::Vmsg;
        e.send(msg, peer(), out_kind, op.slot);

        if (pipelined) {
            // local m.m multiply runs while the peer message is in flight
            u32 local = prod(mX, mY);
            u32 rcv = e.recv(peer(), in_kind, op.slot, zshape);
            e.wire_reg[op.z_wire] = e.lin({{1, local}, {1, rcv}});
        } else {
            u32 rcv = e.recv(peer(), in_kind, op.slot, zshape);
            u32 local = prod(mX, mY);
            e.wire_reg[op.z_wire] = e.lin({{1, local}, {1, rcv}});
        }
    }

    void trunc_op(const PlanOp& op) {
        if (e.party == 1) return;
        Ring rg = e.rg;
        int side = my_side();
        // free additive view between P2/P3: z = mZ3 + (-lamZ3)
        u32 a;
        if (e.party == 2) {
            a = e.wire_reg.at(op.x_wire);
        } else {
            u32 lam3 = e.lam(op.x_wire, 3);
            a = e.lin({{kNegOne, lam3}});
        }
        u32 R = e.offline(op.slot, comp::Family::Mask, comp::kMaskR, op.shape);
        u32 Rp = e.offline(op.slot, comp::Family::Mask, comp::kMaskRp, op.shape);
        u32 Bb = e.offline(op.slot, comp::Family::Mask, comp::kMaskB, op.shape);

        std::vector<std::pair<u64, u32>> sterms{
            {1, a}, {rg.pow2(rg.l - 1), Bb}, {rg.pow2(op.d), R}, {1, Rp}};
        u32 s_i = e.party == 2 ? e.lin(sterms, rg.pow2(rg.l - 2), true) : e.lin(sterms);
        e.send(s_i, peer(), MsgKind::SOpen, op.slot);
        u32 s_peer = e.recv(peer(), MsgKind::SOpen, op.slot, op.shape);
        u32 S = e.lin({{1, s_i}, {1, s_peer}});

        u32 msb = e.alloc(op.shape);
        u32 low = e.alloc(op.shape);
        {
            Instr in;
            in.op = IOp::MsbSplit;
            in.dst = msb;
            in.dst2 = low;
            in.a = S;
            in.d = op.d;
            in.shape = op.shape;
            in.cost_mults = shape_elems(op.shape);
            e.push(std::move(in));
        }
        u32 one_m2s = e.lin({{rg.sub(0, 2), msb}}, 1, true);
        u32 wb = e.elt_mul(one_m2s, Bb);
        u32 y;
        if (e.party == 2) {
            y = e.lin({{1, low},
                       {rg.pow2(rg.l - 1 - op.d), msb},
                       {rg.pow2(rg.l - 1 - op.d), wb},
                       {kNegOne, R}},
                      rg.neg(rg.pow2(rg.l - 2 - op.d)), true);
        } else {
            y = e.lin({{rg.pow2(rg.l - 1 - op.d), wb}, {kNegOne, R}});
        }

        // re-share onto the fresh offline masks: exchange t = y_own + lam_own
        u32 lam_mine = e.offline(op.slot, comp::Family::Mask,
                                 side == 2 ? comp::kMaskLam2 : comp::kMaskLam3, op.shape);
        u32 t_mine = e.lin({{1, y}, {1, lam_mine}});
        e.send(t_mine, peer(), MsgKind::Remask, op.slot);
        u32 t_peer = e.recv(peer(), MsgKind::Remask, op.slot, op.shape);
        e.wire_reg[op.z_wire] = e.lin({{1, y}, {1, t_peer}});
    }

    void debug_relu_op(const PlanOp& op) {
        if (e.party == 1) return;
        u32 opened;
        if (e.party == 2) {
            u32 m3 = e.wire_reg.at(op.x_wire);
            e.send(m3, 3, MsgKind::Debug, op.slot);
            u32 lam3 = e.recv(3, MsgKind::Debug, op.slot, op.shape);
            opened = e.lin({{1, m3}, {kNegOne, lam3}});
        } else {
            u32 lam3 = e.lam(op.x_wire, 3);
            e.send(lam3, 2, MsgKind::Debug, op.slot);
            u32 m3 = e.recv(2, MsgKind::Debug, op.slot, op.shape);
            opened = e.lin({{1, m3}, {kNegOne, lam3}});
        }
        u32 r = e.alloc(op.shape);
        Instr in;
        in.op = IOp::ReluPub;
        in.dst = r;
        in.a = opened;
        in.shape = op.shape;
        in.cost_mults = shape_elems(op.shape);
        e.push(std::move(in));
        // zero output masks, so the m components equal the public value
        e.wire_reg[op.z_wire] = r;
    }

    void compile() {
        if (e.party != 1) e.input(plan.input_wire);
        for (const auto& op : plan.ops) {
            switch (op.kind) {
            case OpKind::Matmul:
                matmul_like(op, false);
                break;
            case OpKind::EltSquare:
                matmul_like(op, true);
                break;
            case OpKind::Trunc:
                trunc_op(op);
                break;
            case OpKind::Im2col: {
                if (e.party == 1) break;
                u32 x = e.wire_reg.at(op.x_wire);
                u32 r = e.alloc(plan.wires.at(op.z_wire).shape);
                Instr in;
                in.op = IOp::Im2col;
                in.dst = r;
                in.a = x;
                in.conv = op.conv;
                in.shape = plan.wires.at(op.z_wire).shape;
                in.cost_mults = shape_elems(in.shape);
                e.push(std::move(in));
                e.wire_reg[op.z_wire] = r;
                break;
            }
            case OpKind::PublicMatmulLeft: {
                if (e.party == 1) break;
                u32 x = e.wire_reg.at(op.x_wire);
                u32 p = e.load_pub(op.public_name);
                e.wire_reg[op.z_wire] = e.matmul(p, x);
                break;
            }
            case OpKind::DebugRelu:
                debug_relu_op(op);
                break;
            }
        }
        if (e.party == 1) {
            // P1's share of the output is the lambda pair, all offline-derivable
            u32 l2 = e.lam(plan.output_wire, 2);
            u32 l3 = e.lam(plan.output_wire, 3);
            Instr o1;
            o1.op = IOp::Output;
            o1.a = l2;
            o1.io_index = 0;
            e.push(std::move(o1));
            Instr o2;
            o2.op = IOp::Output;
            o2.a = l3;
            o2.io_index = 1;
            e.push(std::move(o2));
            e.prog.output_count = 2;
        } else {
            Instr out;
            out.op = IOp::Output;
            out.a = e.wire_reg.at(plan.output_wire);
            out.io_index = 0;
            e.push(std::move(out));
            e.prog.output_count = 1;
        }
    }
};

} // namespace

EventProgram schedule(const ExecutionPlan& plan) {
    EventProgram prog;
    bool pipelined = plan.mode == Mode::LR_TS_Concat;
    for (u32 p = 1; p <= plan.parties(); ++p) {
        Emit e{plan, p, plan.cfg.ring(), {}, {}, {}, {}, {}, {}, {}, {}};
        e.prog.party = p;
        if (plan.protocol == Protocol::Npc) {
            NpcCompiler{e, plan, pipelined, {}}.compile();
        } else {
            TrioCompiler{e, plan, pipelined}.compile();
        }
        prog.parties.push_back(std::move(e.prog));
    }
    return prog;
}

} // namespace lrmpc
