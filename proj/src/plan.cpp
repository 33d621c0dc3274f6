#include "lrmpc/plan.hpp"

#include <cmath>

#include "lrmpc/errors.hpp"

namespace lrmpc {

const char* protocol_name(Protocol p) { return p == Protocol::Npc ? "npc" : "trio"; }

const char* mode_name(Mode m) {
    switch (m) {
    case Mode::FullRank: return "full";
    case Mode::LR: return "lr";
    case Mode::LR_TS: return "lr_ts";
    case Mode::LR_TS_Concat: return "lr_ts_concat";
    }
    return "?";
}

Mode mode_from_name(const std::string& s) {
    if (s == "full") return Mode::FullRank;
    if (s == "lr") return Mode::LR;
    if (s == "lr_ts") return Mode::LR_TS;
    if (s == "lr_ts_concat" || s == "combined") return Mode::LR_TS_Concat;
    throw ValidationError("unknown mode " + s);
}

Protocol protocol_from_name(const std::string& s) {
    if (s == "npc") return Protocol::Npc;
    if (s == "trio") return Protocol::Trio;
    throw ValidationError("unknown protocol " + s);
}

namespace {

struct Builder {
    const Model& model;
    ExecutionPlan plan;
    PlanOptions opts;
    u32 next_wire = 0;
    double weight_default_bound = 1.0;

    u32 new_wire(Shape shape, u32 frac, double bound, WireLambdaRule rule) {
        u32 id = next_wire++;
        rule.shape = shape;
        plan.wires[id] = {std::move(shape), frac, bound};
        plan.lambda_rules[id] = std::move(rule);
        return id;
    }

    void check_range(u32 wire, const std::string& where) {
        const auto& w = plan.wires.at(wire);
        double limit = std::ldexp(1.0, static_cast<int>(plan.cfg.l - 2 - w.frac));
        if (!(w.bound < limit))
            throw ValidationError(where + ": range guard violated, |value| bound " +
                                  std::to_string(w.bound) + " with " + std::to_string(w.frac) +
                                  " pending fraction bits exceeds 2^" +
                                  std::to_string(plan.cfg.l - 2 - w.frac));
    }

    double tensor_bound(const std::string& name, double fallback) const {
        if (name.empty() || !model.store.has(name)) return fallback;
        const auto& t = model.store.real(name);
        double b = 0;
        for (double v : t.data) b = std::max(b, std::fabs(v));
        return b == 0 ? fallback : b;
    }

    u32 weight_wire(const std::string& name, Shape shape, const std::string& where) {
        if (name.empty()) throw ValidationError(where + ": layer has no tensor name");
        double b = tensor_bound(name, weight_default_bound);
        u32 w = new_wire(std::move(shape), plan.cfg.f, b, WireLambdaRule{});
        plan.weight_wires.push_back(w);
        plan.weight_tensor_names[w] = name;
        return w;
    }

    PlanOp& push(PlanOp op, MaterialSpec spec) {
        op.slot = static_cast<u32>(plan.ops.size());
        spec.layer = op.layer;
        plan.ops.push_back(std::move(op));
        plan.material.push_back(std::move(spec));
        return plan.ops.back();
    }

    // secret x secret matmul; returns the product wire (frac 2f or 3f)
    u32 matmul(u32 layer, u32 x, u32 y, const std::string& where) {
        const auto& xi = plan.wires.at(x);
        const auto& yi = plan.wires.at(y);
        if (xi.shape.size() != 2 || yi.shape.size() != 2 || xi.shape[1] != yi.shape[0])
            throw ValidationError(where + ": matmul dim break " + shape_str(xi.shape) + " x " +
                                  shape_str(yi.shape));
        std::size_t m = xi.shape[0], n = xi.shape[1], o = yi.shape[1];
        double bound = static_cast<double>(n) * xi.bound * yi.bound;
        u32 z = new_wire({m, o}, xi.frac + yi.frac, bound,
                         WireLambdaRule{});
        check_range(z, where);
        PlanOp op;
        op.kind = OpKind::Matmul;
        op.layer = layer;
        op.x_wire = x;
        op.y_wire = y;
        op.z_wire = z;
        op.m = m;
        op.n = n;
        op.o = o;
        op.frac_out = plan.wires.at(z).frac;
        MaterialSpec ms;
        ms.kind = plan.protocol == Protocol::Npc ? MaterialKind::BeaverMatmul
                                                 : MaterialKind::TrioMatmul;
        ms.m = m;
        ms.n = n;
        ms.o = o;
        ms.x_wire = x;
        ms.y_wire = y;
        ms.z_wire = z;
        push(std::move(op), std::move(ms));
        return z;
    }

    u32 trunc(u32 layer, u32 x, const std::string& where) {
        const auto& xi = plan.wires.at(x);
        if (xi.frac <= plan.cfg.f)
            throw ValidationError(where + ": nothing to truncate");
        u32 d = xi.frac - plan.cfg.f;
        if (d != plan.cfg.f && d != 2 * plan.cfg.f)
            throw ValidationError(where + ": unsupported truncation width");
        check_range(x, where);
        u32 slot = static_cast<u32>(plan.ops.size());
        WireLambdaRule trule;
        trule.kind = WireLambdaRule::Kind::TruncMaskOut;
        trule.src_slot = slot;
        u32 z = new_wire(xi.shape, plan.cfg.f, xi.bound + 2 * plan.cfg.ulp(), std::move(trule));
        PlanOp op;
        op.kind = OpKind::Trunc;
        op.layer = layer;
        op.x_wire = x;
        op.z_wire = z;
        op.shape = xi.shape;
        op.d = d;
        op.frac_out = plan.cfg.f;
        MaterialSpec ms;
        ms.kind = MaterialKind::TruncMask;
        ms.shape = xi.shape;
        ms.d = d;
        push(std::move(op), std::move(ms));
        return z;
    }

    u32 elt_square(u32 layer, u32 x) {
        const auto& xi = plan.wires.at(x);
        double bound = xi.bound * xi.bound;
        u32 z = new_wire(xi.shape, 2 * xi.frac, bound, WireLambdaRule{});
        check_range(z, "layer " + std::to_string(layer) + " square");
        PlanOp op;
        op.kind = OpKind::EltSquare;
        op.layer = layer;
        op.x_wire = x;
        op.y_wire = x;
        op.z_wire = z;
        op.shape = xi.shape;
        op.frac_out = plan.wires.at(z).frac;
        MaterialSpec ms;
        ms.kind = plan.protocol == Protocol::Npc ? MaterialKind::BeaverElt : MaterialKind::TrioElt;
        ms.shape = xi.shape;
        ms.x_wire = x;
        ms.y_wire = x;
        ms.z_wire = z;
        push(std::move(op), std::move(ms));
        return z;
    }

    u32 im2col_op(u32 layer, u32 x, const ConvShape& cs, const std::string& where) {
        const auto& xi = plan.wires.at(x);
        if (shape_elems(xi.shape) != cs.batch * cs.height * cs.width * cs.in_ch)
            throw ValidationError(where + ": conv input element count mismatch");
        WireLambdaRule rule;
        rule.kind = WireLambdaRule::Kind::Im2col;
        rule.src_wire = x;
        rule.conv = cs;
        u32 z = new_wire({cs.patch_rows(), cs.patch_cols()}, xi.frac, xi.bound, std::move(rule));
        PlanOp op;
        op.kind = OpKind::Im2col;
        op.layer = layer;
        op.x_wire = x;
        op.z_wire = z;
        op.conv = cs;
        op.frac_out = xi.frac;
        push(std::move(op), MaterialSpec{});
        return z;
    }

    u32 public_matmul_left(u32 layer, u32 x, const std::string& name, const std::string& where) {
        const auto& a = model.store.real(name);
        const auto& xi = plan.wires.at(x);
        if (xi.shape.size() != 2 || a.cols() != xi.shape[0])
            throw ValidationError(where + ": public matmul dims mismatch");
        RingTensor enc = encode_fixed(a, plan.cfg);
        plan.publics.emplace(name, std::move(enc));
        double abound = 0;
        for (double v : a.data) abound = std::max(abound, std::fabs(v));
        double bound = static_cast<double>(a.cols()) * abound * xi.bound;
        WireLambdaRule rule;
        rule.kind = WireLambdaRule::Kind::PublicMatmulLeft;
        rule.src_wire = x;
        rule.pub = plan.publics.at(name);
        rule.pub_name = name;
        u32 z = new_wire({a.rows(), xi.shape[1]}, xi.frac + plan.cfg.f, bound, std::move(rule));
        check_range(z, where);
        PlanOp op;
        op.kind = OpKind::PublicMatmulLeft;
        op.layer = layer;
        op.x_wire = x;
        op.z_wire = z;
        op.m = a.rows();
        op.n = a.cols();
        op.o = xi.shape[1];
        op.frac_out = plan.wires.at(z).frac;
        op.public_name = name;
        push(std::move(op), MaterialSpec{});
        return z;
    }

    u32 debug_relu_op(u32 layer, u32 x) {
        const auto& xi = plan.wires.at(x);
        WireLambdaRule rule;
        rule.kind = WireLambdaRule::Kind::Zero;
        u32 z = new_wire(xi.shape, xi.frac, xi.bound, std::move(rule));
        PlanOp op;
        op.kind = OpKind::DebugRelu;
        op.layer = layer;
        op.x_wire = x;
        op.z_wire = z;
        op.shape = xi.shape;
        op.frac_out = xi.frac;
        push(std::move(op), MaterialSpec{});
        return z;
    }
};

} // namespace

ExecutionPlan build_plan(const Model& model, Protocol proto, u32 n_parties, Mode mode,
                         const FixedPointConfig& cfg, const PlanOptions& opts) {
    model.validate();
    if (proto == Protocol::Trio) n_parties = 3;
    if (n_parties < 2) throw ValidationError("need at least two parties");

    Builder b{model, {}, opts, 0, 1.0};
    b.plan.protocol = proto;
    b.plan.n_parties = n_parties;
    b.plan.mode = mode;
    b.plan.cfg = cfg;

    b.plan.input_wire = b.new_wire({model.input_rows, model.input_cols}, cfg.f, opts.input_bound,
                                   WireLambdaRule{});
    u32 cur = b.plan.input_wire;
    bool low_rank_modes = mode != Mode::FullRank;

    for (u32 li = 0; li < model.layers.size(); ++li) {
        const auto& ly = model.layers[li];
        std::string where = "layer " + std::to_string(li);
        switch (ly.kind) {
        case LayerKind::FullRankFC: {
            u32 w = b.weight_wire(ly.weight_name, {ly.n, ly.o}, where);
            cur = b.trunc(li, b.matmul(li, cur, w, where), where);
            break;
        }
        case LayerKind::LowRankFC: {
            if (!low_rank_modes) {
                u32 w = b.weight_wire(ly.weight_name, {ly.n, ly.o}, where);
                cur = b.trunc(li, b.matmul(li, cur, w, where), where);
                break;
            }
            u32 u = b.weight_wire(ly.u_name, {ly.n, ly.rank}, where);
            u32 v = b.weight_wire(ly.v_name, {ly.rank, ly.o}, where);
            bool skip = (mode == Mode::LR_TS || mode == Mode::LR_TS_Concat) && ly.skip_trunc;
            if (skip) {
                u32 xu = b.matmul(li, cur, u, where);
                u32 xuv = b.matmul(li, xu, v, where);
                cur = b.trunc(li, xuv, where);
            } else {
                u32 xu = b.trunc(li, b.matmul(li, cur, u, where), where);
                cur = b.trunc(li, b.matmul(li, xu, v, where), where);
            }
            break;
        }
        case LayerKind::FullRankConv: {
            u32 patches = b.im2col_op(li, cur, ly.conv, where);
            u32 w = b.weight_wire(ly.weight_name, {ly.conv.patch_cols(), ly.conv.out_ch}, where);
            cur = b.trunc(li, b.matmul(li, patches, w, where), where);
            break;
        }
        case LayerKind::LowRankConv: {
            u32 patches = b.im2col_op(li, cur, ly.conv, where);
            if (!low_rank_modes) {
                u32 w = b.weight_wire(ly.weight_name, {ly.conv.patch_cols(), ly.conv.out_ch}, where);
                cur = b.trunc(li, b.matmul(li, patches, w, where), where);
                break;
            }
            u32 u = b.weight_wire(ly.u_name, {ly.conv.patch_cols(), ly.rank}, where);
            u32 v = b.weight_wire(ly.v_name, {ly.rank, ly.conv.out_ch}, where);
            bool skip = (mode == Mode::LR_TS || mode == Mode::LR_TS_Concat) && ly.skip_trunc;
            if (skip) {
                cur = b.trunc(li, b.matmul(li, b.matmul(li, patches, u, where), v, where), where);
            } else {
                u32 xu = b.trunc(li, b.matmul(li, patches, u, where), where);
                cur = b.trunc(li, b.matmul(li, xu, v, where), where);
            }
            break;
        }
        case LayerKind::Square:
            cur = b.trunc(li, b.elt_square(li, cur), where);
            break;
        case LayerKind::DebugReLU:
            cur = b.debug_relu_op(li, cur);
            break;
        case LayerKind::PublicMatmulLeft:
            cur = b.trunc(li, b.public_matmul_left(li, cur, ly.public_name, where), where);
            break;
        }
        // fraction discipline: every layer boundary carries exactly f bits
        if (b.plan.wires.at(cur).frac != cfg.f)
            throw ValidationError(where + ": layer boundary carries " +
                                  std::to_string(b.plan.wires.at(cur).frac) +
                                  " fraction bits, expected " + std::to_string(cfg.f));
    }

    b.plan.output_wire = cur;
    return std::move(b.plan);
}

std::vector<PlainLayer> plan_reference_layers(const Model& model, Mode mode) {
    std::vector<PlainLayer> out;
    bool low_rank_modes = mode != Mode::FullRank;
    for (const auto& ly : model.layers) {
        switch (ly.kind) {
        case LayerKind::FullRankFC:
            out.push_back({PlainLayer::Kind::Matmul, model.store.real(ly.weight_name), {}});
            break;
        case LayerKind::LowRankFC:
            if (low_rank_modes) {
                out.push_back({PlainLayer::Kind::Matmul, model.store.real(ly.u_name), {}});
                out.push_back({PlainLayer::Kind::Matmul, model.store.real(ly.v_name), {}});
            } else {
                out.push_back({PlainLayer::Kind::Matmul, model.store.real(ly.weight_name), {}});
            }
            break;
        case LayerKind::FullRankConv:
            out.push_back({PlainLayer::Kind::Conv, model.store.real(ly.weight_name), ly.conv});
            break;
        case LayerKind::LowRankConv:
            if (low_rank_modes) {
                const auto& u = model.store.real(ly.u_name);
                ConvShape ucs = ly.conv;
                ucs.out_ch = ly.rank;
                out.push_back({PlainLayer::Kind::Conv,
                               RealTensor({ly.conv.kernel, ly.conv.kernel, ly.conv.in_ch, ly.rank},
                                          u.data),
                               ucs});
                // the 1x1 follow-up conv is a plain matmul on (b*oh*ow) x r
                const auto& v = model.store.real(ly.v_name);
                out.push_back(
                    {PlainLayer::Kind::Matmul, RealTensor({ly.rank, ly.conv.out_ch}, v.data), {}});
            } else {
                out.push_back({PlainLayer::Kind::Conv, model.store.real(ly.weight_name), ly.conv});
            }
            break;
        case LayerKind::Square:
            out.push_back({PlainLayer::Kind::Square, {}, {}});
            break;
        case LayerKind::DebugReLU:
            out.push_back({PlainLayer::Kind::Relu, {}, {}});
            break;
        case LayerKind::PublicMatmulLeft:
            out.push_back(
                {PlainLayer::Kind::PublicMatmulLeft, model.store.real(ly.public_name), {}});
            break;
        }
    }
    return out;
}

} // namespace lrmpc
