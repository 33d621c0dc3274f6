#include "lrmpc/vm.hpp"

#include <algorithm>
#include <set>
#include <thread>

#include "lrmpc/errors.hpp"

namespace lrmpc {

nlohmann::json Metrics::to_json() const {
    nlohmann::json j;
    j["rounds"] = rounds;
    j["bytes"] = bytes;
    j["triples_consumed"] = triples_consumed;
    j["masks_consumed"] = masks_consumed;
    j["preps_consumed"] = preps_consumed;
    j["insecure_ops"] = insecure_ops;
    return j;
}

namespace {

struct Inbox {
    std::map<std::tuple<u32, u8, u32>, std::deque<Message>> buf;

    Message fetch(Transport& tr, u32 peer, MsgKind kind, u32 slot) {
        auto key = std::make_tuple(peer, static_cast<u8>(kind), slot);
        auto it = buf.find(key);
        if (it != buf.end() && !it->second.empty()) {
            Message m = std::move(it->second.front());
            it->second.pop_front();
            return m;
        }
        for (;;) {
            Message m = tr.recv(peer);
            if (m.kind == kind && m.slot == slot) return m;
            buf[std::make_tuple(peer, static_cast<u8>(m.kind), m.slot)].push_back(std::move(m));
        }
    }
};

} // namespace

VmResult execute_program(const PartyProgram& prog, VmEnv env) {
    Ring rg = env.plan->cfg.ring();
    std::vector<RingTensor> regs(prog.num_regs);
    VmResult res;
    res.outputs.resize(prog.output_count);
    Inbox inbox;
    std::set<u32> insecure_slots;

    for (const auto& in : prog.code) {
        switch (in.op) {
        case IOp::Input:
            regs[in.dst] = env.inputs->at(in.io_index);
            if (regs[in.dst].shape != in.shape)
                throw ValidationError("input tensor shape mismatch at io " +
                                      std::to_string(in.io_index));
            break;
        case IOp::Offline: {
            switch (in.family) {
            case comp::Family::Triple: {
                auto& t = env.store->triple(in.mslot);
                res.triples.insert(in.mslot);
                regs[in.dst] = in.component == comp::kTripleA   ? t.A
                               : in.component == comp::kTripleB ? t.B
                                                                : t.C;
                break;
            }
            case comp::Family::Mask: {
                auto& mk = env.store->mask(in.mslot);
                res.masks.insert(in.mslot);
                switch (in.component) {
                case comp::kMaskR: regs[in.dst] = mk.R; break;
                case comp::kMaskRp: regs[in.dst] = mk.Rp; break;
                case comp::kMaskB: regs[in.dst] = mk.Bbit; break;
                case comp::kMaskLam2: regs[in.dst] = *mk.lam_out2; break;
                case comp::kMaskLam3: regs[in.dst] = *mk.lam_out3; break;
                default: throw ValidationError("bad mask component");
                }
                break;
            }
            case comp::Family::Prep: {
                auto& pp = env.store->prep(in.mslot);
                res.preps.insert(in.mslot);
                switch (in.component) {
                case comp::kPrepMN: regs[in.dst] = pp.MN; break;
                case comp::kPrepLamZ2: regs[in.dst] = *pp.lamZ2; break;
                case comp::kPrepLamZ3: regs[in.dst] = *pp.lamZ3; break;
                default: throw ValidationError("bad prep component");
                }
                break;
            }
            }
            break;
        }
        case IOp::LoadPub:
            regs[in.dst] = env.plan->publics.at(in.pub_name);
            break;
        case IOp::PrfLam:
            regs[in.dst] = prf_wire_lambda(*env.seeds, in.wire, in.side, in.shape, rg);
            break;
        case IOp::Zero:
            regs[in.dst] = RingTensor::zeros(in.shape);
            break;
        case IOp::Lin: {
            RingTensor acc(regs[in.terms[0].second].shape);
            for (const auto& [coef, r] : in.terms) {
                const RingTensor& t = regs[r];
                if (t.size() != acc.size()) throw ValidationError("lin shape mismatch");
                for (std::size_t i = 0; i < acc.size(); ++i)
                    acc.data[i] += coef * t.data[i];
            }
            if (in.has_const)
                for (auto& v : acc.data) v += in.const_scalar;
            for (auto& v : acc.data) v &= rg.mask;
            regs[in.dst] = std::move(acc);
            break;
        }
        case IOp::Matmul:
            regs[in.dst] = ring_matmul(rg, regs[in.a], regs[in.b]);
            break;
        case IOp::EltMul:
            regs[in.dst] = ring_elt_mul(rg, regs[in.a], regs[in.b]);
            break;
        case IOp::Im2col:
            regs[in.dst] = im2col(regs[in.a], in.conv);
            break;
        case IOp::MsbSplit: {
            const RingTensor& s = regs[in.a];
            RingTensor msb(s.shape), low(s.shape);
            u64 half = 1ULL << (rg.l - 1);
            for (std::size_t i = 0; i < s.size(); ++i) {
                u64 v = s.data[i] & rg.mask;
                msb.data[i] = (v & half) ? 1 : 0;
                low.data[i] = (v & (half - 1)) >> in.d;
            }
            regs[in.dst] = std::move(msb);
            regs[in.dst2] = std::move(low);
            break;
        }
        case IOp::ReluPub:
            regs[in.dst] = relu_public(regs[in.a], rg);
            break;
        case IOp::Send: {
            if (in.kind == MsgKind::Debug) {
                if (!env.allow_insecure)
                    throw InsecureOpError("debug reveal refused: allow_insecure is not set");
                if (insecure_slots.insert(in.slot).second)
                    res.insecure_ops.push_back("debug_relu@slot" + std::to_string(in.slot));
            }
            Message m;
            m.kind = in.kind;
            m.slot = in.slot;
            m.payload = regs[in.a].data;
            m.round_tag = res.round_chain;
            m.tagged = true;
            env.tr->send(in.peer, std::move(m));
            break;
        }
        case IOp::Recv: {
            Message m = inbox.fetch(*env.tr, in.peer, in.kind, in.slot);
            if (m.payload.size() != shape_elems(in.shape))
                throw TransportError("frame element count mismatch on " +
                                     std::string(msg_kind_name(in.kind)));
            if (m.tagged) res.round_chain = std::max(res.round_chain, m.round_tag + 1);
            regs[in.dst] = RingTensor(in.shape, std::move(m.payload));
            break;
        }
        case IOp::Output:
            res.outputs.at(in.io_index) = regs[in.a];
            break;
        }
    }
    return res;
}

RunResult run_inprocess(const ExecutionPlan& plan, const EventProgram& prog,
                        const std::vector<std::vector<RingTensor>>& inputs,
                        std::vector<MaterialStore>& stores, const SeedSet& seeds,
                        bool allow_insecure) {
    u32 n = plan.parties();
    LocalHub hub(n, plan.topology(), plan.session);
    std::vector<VmResult> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::unique_ptr<Transport>> transports;
    for (u32 p = 1; p <= n; ++p) transports.push_back(hub.transport(p));

    std::vector<std::thread> threads;
    for (u32 p = 1; p <= n; ++p) {
        threads.emplace_back([&, p] {
            try {
                VmEnv env;
                env.tr = transports[p - 1].get();
                env.store = &stores[p - 1];
                env.seeds = &seeds;
                env.plan = &plan;
                env.inputs = &inputs[p - 1];
                env.allow_insecure = allow_insecure;
                results[p - 1] = execute_program(prog.parties[p - 1], env);
            } catch (...) {
                errors[p - 1] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    RunResult out;
    for (u32 p = 1; p <= n; ++p) {
        out.party_outputs.push_back(results[p - 1].outputs);
        out.metrics.rounds = std::max(out.metrics.rounds, results[p - 1].round_chain);
        out.metrics.triples_consumed += results[p - 1].triples.size();
        out.metrics.masks_consumed += results[p - 1].masks.size();
        out.metrics.preps_consumed += results[p - 1].preps.size();
        for (const auto& s : results[p - 1].insecure_ops) {
            if (std::find(out.metrics.insecure_ops.begin(), out.metrics.insecure_ops.end(), s) ==
                out.metrics.insecure_ops.end())
                out.metrics.insecure_ops.push_back(s);
        }
        for (const auto& [dst, bytes] : transports[p - 1]->bytes_by_peer())
            out.metrics.bytes[std::to_string(p) + "->" + std::to_string(dst)] += bytes;
    }
    return out;
}

std::vector<std::vector<RingTensor>> make_party_inputs(const ExecutionPlan& plan,
                                                       const EventProgram& prog,
                                                       const Model& model,
                                                       const RealTensor& input,
                                                       const SeedSet& seeds) {
    Ring rg = plan.cfg.ring();
    // encode every shared wire value once
    std::map<u32, RingTensor> encoded;
    {
        RingTensor enc = encode_fixed(input, plan.cfg);
        const Shape& want = plan.wires.at(plan.input_wire).shape;
        if (shape_elems(enc.shape) != shape_elems(want))
            throw ValidationError("input tensor does not match the model input shape");
        enc.shape = want;
        encoded[plan.input_wire] = std::move(enc);
    }
    for (u32 w : plan.weight_wires) {
        RealTensor t = model.store.real(plan.weight_tensor_names.at(w));
        RingTensor enc = encode_fixed(t, plan.cfg);
        enc.shape = plan.wires.at(w).shape;  // conv kernels flatten to matrices
        encoded[w] = std::move(enc);
    }

    std::vector<std::vector<RingTensor>> inputs(plan.parties());
    for (u32 p = 1; p <= plan.parties(); ++p) {
        const auto& layout = prog.parties[p - 1].input_wires;
        for (u32 w : layout) {
            const RingTensor& x = encoded.at(w);
            if (plan.protocol == Protocol::Npc) {
                auto shares = share_additive(x, plan.parties(), rg, seeds.dealer.derive(0x5A), w);
                inputs[p - 1].push_back(shares[p - 1].value);
            } else {
                auto shares = share_trio_wire(x, w, seeds, rg);
                inputs[p - 1].push_back(shares[p - 1].a);  // P2: m3, P3: m2
            }
        }
    }
    return inputs;
}

RingTensor reconstruct_output(const ExecutionPlan& plan,
                              const std::vector<std::vector<RingTensor>>& party_outputs) {
    Ring rg = plan.cfg.ring();
    if (plan.protocol == Protocol::Npc) {
        RingTensor acc = party_outputs.at(0).at(0);
        for (std::size_t p = 1; p < party_outputs.size(); ++p)
            acc = ring_add(rg, acc, party_outputs[p].at(0));
        return acc;
    }
    // trio: m3 held by P2, lam3 held by P1 (second output)
    return ring_sub(rg, party_outputs.at(1).at(0), party_outputs.at(0).at(1));
}

} // namespace lrmpc
