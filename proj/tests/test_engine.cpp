#include <doctest.h>

#include <cmath>

#include "lrmpc/bench.hpp"
#include "lrmpc/errors.hpp"
#include "lrmpc/simulate.hpp"
#include "lrmpc/vm.hpp"

using namespace lrmpc;

namespace {

SeedSet test_seeds(u64 v = 4242) { return SeedSet::from_master(make_master_seed(v)); }

Model two_fc_identity(std::size_t n) {
    Model m;
    m.input_rows = 2;
    m.input_cols = n;
    for (int i = 0; i < 2; ++i) {
        LayerSpec ly;
        ly.kind = LayerKind::FullRankFC;
        ly.n = n;
        ly.o = n;
        ly.weight_name = "layer" + std::to_string(i) + "/W";
        RealTensor id({n, n});
        for (std::size_t k = 0; k < n; ++k) id.data[k * n + k] = 1.0;
        m.store.put(ly.weight_name, id);
        m.layers.push_back(ly);
    }
    return m;
}

Model lowrank_fc_model(std::size_t layers, std::size_t m_rows, std::size_t dim, std::size_t rank,
                       bool with_weights) {
    return make_fc_model(layers, m_rows, dim, dim, rank, with_weights);
}

struct E2E {
    RealTensor decoded;
    Metrics metrics;
};

E2E run_model(const Model& model, Protocol proto, u32 n, Mode mode, const RealTensor& input,
              bool allow_insecure = false, u64 seed = 4242) {
    FixedPointConfig cfg(64, 5);
    auto seeds = SeedSet::from_master(make_master_seed(seed));
    ExecutionPlan plan = build_plan(model, proto, n, mode, cfg);
    EventProgram prog = schedule(plan);
    auto inputs = make_party_inputs(plan, prog, model, input, seeds);
    DealerOutput dealt = deal_material(plan.material,
                                       proto == Protocol::Trio ? Scheme::Trio : Scheme::Additive,
                                       plan.parties(), cfg, seeds, plan.lambda_rules);
    RunResult rr = run_inprocess(plan, prog, inputs, dealt.stores, seeds, allow_insecure);
    RingTensor out = reconstruct_output(plan, rr.party_outputs);
    return {decode_fixed(out, cfg), rr.metrics};
}

// Independent longest-path recursion over the event graph (program-order
// edges plus message edges). Valid when serialization time is zero, i.e.
// effectively infinite bandwidth.
double longest_path_finish(const EventProgram& prog, double latency_ms, double ns_per_mult) {
    struct Node {
        double end = -1.0;
    };
    std::vector<std::vector<Node>> nodes(prog.parties.size());
    for (std::size_t p = 0; p < prog.parties.size(); ++p)
        nodes[p].resize(prog.parties[p].code.size());
    // map message key -> (party, idx) of the send
    std::map<std::tuple<u32, u32, u8, u32>, std::pair<std::size_t, std::size_t>> send_at;
    for (std::size_t p = 0; p < prog.parties.size(); ++p)
        for (std::size_t i = 0; i < prog.parties[p].code.size(); ++i) {
            const auto& in = prog.parties[p].code[i];
            if (in.op == IOp::Send)
                send_at[{static_cast<u32>(p + 1), in.peer, static_cast<u8>(in.kind), in.slot}] = {p,
                                                                                                  i};
        }
    std::function<double(std::size_t, std::size_t)> end_of = [&](std::size_t p,
                                                                 std::size_t i) -> double {
        if (nodes[p][i].end >= 0) return nodes[p][i].end;
        nodes[p][i].end = 0;  // cycle guard; programs are acyclic by construction
        const auto& in = prog.parties[p].code[i];
        double start = i == 0 ? 0.0 : end_of(p, i - 1);
        double end = start;
        if (in.op == IOp::Recv) {
            auto key = std::make_tuple(in.peer, static_cast<u32>(p + 1), static_cast<u8>(in.kind),
                                       in.slot);
            auto it = send_at.find(key);
            REQUIRE(it != send_at.end());
            double arrival = end_of(it->second.first, it->second.second) + latency_ms;
            end = std::max(start, arrival);
        } else if (in.op != IOp::Send) {
            end = start + static_cast<double>(in.cost_mults) * ns_per_mult * 1e-6;
        }
        nodes[p][i].end = end;
        return end;
    };
    double finish = 0;
    for (std::size_t p = 0; p < prog.parties.size(); ++p)
        if (!prog.parties[p].code.empty())
            finish = std::max(finish, end_of(p, prog.parties[p].code.size() - 1));
    return finish;
}

} // namespace

TEST_CASE("build_plan lowers modes to the expected op sequences") {
    FixedPointConfig cfg(64, 5);
    Model m = lowrank_fc_model(1, 2, 8, 2, true);

    auto kinds = [](const ExecutionPlan& p) {
        std::vector<OpKind> ks;
        for (const auto& op : p.ops) ks.push_back(op.kind);
        return ks;
    };

    ExecutionPlan full = build_plan(m, Protocol::Npc, 3, Mode::FullRank, cfg);
    CHECK(kinds(full) == std::vector<OpKind>{OpKind::Matmul, OpKind::Trunc});
    CHECK(full.material[0].kind == MaterialKind::BeaverMatmul);
    CHECK(full.material[0].n == 8);

    ExecutionPlan lr = build_plan(m, Protocol::Npc, 3, Mode::LR, cfg);
    CHECK(kinds(lr) ==
          std::vector<OpKind>{OpKind::Matmul, OpKind::Trunc, OpKind::Matmul, OpKind::Trunc});
    CHECK(lr.ops[0].o == 2);  // rank

    ExecutionPlan ts = build_plan(m, Protocol::Npc, 3, Mode::LR_TS, cfg);
    CHECK(kinds(ts) == std::vector<OpKind>{OpKind::Matmul, OpKind::Matmul, OpKind::Trunc});
    CHECK(ts.ops[2].d == 10);  // Trunc^{2f}

    // trio material kinds
    ExecutionPlan trio = build_plan(m, Protocol::Trio, 3, Mode::LR_TS, cfg);
    CHECK(trio.material[0].kind == MaterialKind::TrioMatmul);
}

TEST_CASE("build_plan on the GCN demo matches the published structure") {
    FixedPointConfig cfg(64, 5);
    GcnDemo demo = make_gcn_demo();
    ExecutionPlan plan = build_plan(demo.model, Protocol::Npc, 3, Mode::FullRank, cfg);
    std::vector<OpKind> want{OpKind::PublicMatmulLeft, OpKind::Trunc, OpKind::Matmul, OpKind::Trunc,
                             OpKind::DebugRelu,        OpKind::PublicMatmulLeft, OpKind::Trunc,
                             OpKind::Matmul,           OpKind::Trunc};
    std::vector<OpKind> got;
    for (const auto& op : plan.ops) got.push_back(op.kind);
    CHECK(got == want);
}

TEST_CASE("plan validation rejects broken models") {
    FixedPointConfig cfg(64, 5);
    Model m = two_fc_identity(4);
    m.layers[1].n = 5;  // dim break
    CHECK_THROWS_AS(build_plan(m, Protocol::Npc, 2, Mode::FullRank, cfg), ValidationError);

    Model m2 = two_fc_identity(4);
    m2.layers[0].skip_trunc = true;  // only valid on low-rank layers
    CHECK_THROWS_AS(build_plan(m2, Protocol::Npc, 2, Mode::FullRank, cfg), ValidationError);

    // range guard: a huge-magnitude chain at small l cannot skip truncation
    FixedPointConfig small(17, 5);
    Model big = lowrank_fc_model(4, 4, 64, 16, false);
    CHECK_THROWS_AS(build_plan(big, Protocol::Npc, 2, Mode::LR_TS, small), ValidationError);
}

TEST_CASE("per-layer online round structure (n-PC): full=2, LR=4, LR+TS=3") {
    FixedPointConfig cfg(64, 5);
    Model m = lowrank_fc_model(1, 2, 8, 2, true);
    for (auto [mode, want] : std::initializer_list<std::pair<Mode, u64>>{
             {Mode::FullRank, 2}, {Mode::LR, 4}, {Mode::LR_TS, 3}}) {
        ExecutionPlan plan = build_plan(m, Protocol::Npc, 3, mode, cfg);
        EventProgram prog = schedule(plan);
        CHECK(structural_rounds(plan, prog) == want);
    }
}

TEST_CASE("round accounting is invariant across network profiles") {
    FixedPointConfig cfg(64, 5);
    Model m = lowrank_fc_model(2, 2, 8, 2, true);
    ExecutionPlan plan = build_plan(m, Protocol::Npc, 3, Mode::LR_TS, cfg);
    EventProgram prog = schedule(plan);
    SimOptions a, b;
    a.profile = NetworkProfile::lan();
    b.profile = NetworkProfile::wan();
    CHECK(simulate(plan, prog, a).metrics.rounds == simulate(plan, prog, b).metrics.rounds);
}

TEST_CASE("two-layer FC with identity weights returns the input") {
    Model m = two_fc_identity(3);
    RealTensor x({2, 3}, {0.5, -1.25, 2.0, 0.25, 1.5, -0.75});
    for (Protocol proto : {Protocol::Npc, Protocol::Trio}) {
        E2E r = run_model(m, proto, 3, Mode::FullRank, x);
        double tol = 2 * (1.0 / 32) + 1e-12;  // one carry per layer
        for (std::size_t i = 0; i < x.size(); ++i)
            CHECK(std::fabs(r.decoded.data[i] - x.data[i]) <= tol);
    }
}

TEST_CASE("n-PC run at n=2 and n=5 parties") {
    Model m = two_fc_identity(3);
    RealTensor x({2, 3}, {0.5, -1.25, 2.0, 0.25, 1.5, -0.75});
    for (u32 n : {2u, 5u}) {
        E2E r = run_model(m, Protocol::Npc, n, Mode::FullRank, x);
        for (std::size_t i = 0; i < x.size(); ++i)
            CHECK(std::fabs(r.decoded.data[i] - x.data[i]) <= 2.0 / 32 + 1e-12);
    }
}

TEST_CASE("live metrics match the schedule prediction and the simulator") {
    FixedPointConfig cfg(64, 5);
    auto seeds = test_seeds();
    Model m = lowrank_fc_model(2, 2, 6, 2, true);
    RealTensor x({2, 6});
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = (static_cast<double>(i % 5) - 2) / 4.0;

    for (Protocol proto : {Protocol::Npc, Protocol::Trio}) {
        for (Mode mode : {Mode::FullRank, Mode::LR, Mode::LR_TS, Mode::LR_TS_Concat}) {
            ExecutionPlan plan = build_plan(m, proto, 3, mode, cfg);
            EventProgram prog = schedule(plan);
            auto inputs = make_party_inputs(plan, prog, m, x, seeds);
            DealerOutput dealt = deal_material(
                plan.material, proto == Protocol::Trio ? Scheme::Trio : Scheme::Additive,
                plan.parties(), cfg, seeds, plan.lambda_rules);
            RunResult rr = run_inprocess(plan, prog, inputs, dealt.stores, seeds, false);

            SimOptions sopts;
            sopts.profile = NetworkProfile::lan();
            sopts.record_events = false;
            Timeline tl = simulate(plan, prog, sopts);
            CHECK(rr.metrics.rounds == tl.metrics.rounds);
            CHECK(rr.metrics.bytes == tl.metrics.bytes);

            // trio: P1 never sends online
            if (proto == Protocol::Trio) {
                for (const auto& [ch, b] : rr.metrics.bytes) {
                    CHECK(ch.rfind("1->", 0) == std::string::npos);
                }
            }
        }
    }
}

TEST_CASE("pipelined and sequential schedules produce byte-identical outputs") {
    FixedPointConfig cfg(64, 5);
    auto seeds = test_seeds(777);
    Model m = lowrank_fc_model(3, 2, 6, 2, true);
    RealTensor x({2, 6});
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = (static_cast<double>(i % 7) - 3) / 8.0;

    for (Protocol proto : {Protocol::Npc, Protocol::Trio}) {
        std::array<RingTensor, 2> outs;
        int k = 0;
        for (Mode mode : {Mode::LR_TS, Mode::LR_TS_Concat}) {
            ExecutionPlan plan = build_plan(m, proto, 3, mode, cfg);
            EventProgram prog = schedule(plan);
            auto inputs = make_party_inputs(plan, prog, m, x, seeds);
            DealerOutput dealt = deal_material(
                plan.material, proto == Protocol::Trio ? Scheme::Trio : Scheme::Additive,
                plan.parties(), cfg, seeds, plan.lambda_rules);
            RunResult rr = run_inprocess(plan, prog, inputs, dealt.stores, seeds, false);
            outs[k++] = reconstruct_output(plan, rr.party_outputs);
        }
        CHECK(outs[0].data == outs[1].data);
    }
}

TEST_CASE("gcn demo end to end, both protocols") {
    GcnDemo demo = make_gcn_demo();
    double tol = 4.0 / 32 + 1e-12;
    for (Protocol proto : {Protocol::Npc, Protocol::Trio}) {
        E2E r = run_model(demo.model, proto, 3, Mode::FullRank, demo.input, /*allow_insecure=*/true);
        REQUIRE(r.decoded.size() == demo.expected.size());
        for (std::size_t i = 0; i < demo.expected.size(); ++i)
            CHECK(std::fabs(r.decoded.data[i] - demo.expected.data[i]) <= tol);
        CHECK(r.metrics.insecure_ops.size() == 1);
    }
    // refused without the flag
    CHECK_THROWS_AS(run_model(demo.model, Protocol::Npc, 3, Mode::FullRank, demo.input, false),
                    InsecureOpError);
}

TEST_CASE("conv layers run end to end against the plaintext oracle") {
    FixedPointConfig cfg(64, 5);
    Model m;
    m.input_rows = 16;  // 1x4x4x1 flattened as 16x1
    m.input_cols = 1;
    LayerSpec conv;
    conv.kind = LayerKind::FullRankConv;
    conv.conv.batch = 1;
    conv.conv.height = 4;
    conv.conv.width = 4;
    conv.conv.in_ch = 1;
    conv.conv.out_ch = 2;
    conv.conv.kernel = 3;
    conv.conv.pad = 1;
    conv.weight_name = "layer0/W";
    RealTensor w({3, 3, 1, 2});
    for (std::size_t i = 0; i < w.size(); ++i)
        w.data[i] = ((static_cast<double>(i % 5)) - 2.0) / 16.0;
    m.store.put(conv.weight_name, w);
    m.layers.push_back(conv);

    RealTensor x({1, 4, 4, 1});
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = (static_cast<double>(i % 9) - 4.0) / 8.0;

    RealTensor want = plaintext_linear_oracle(x, plan_reference_layers(m, Mode::FullRank));
    for (Protocol proto : {Protocol::Npc, Protocol::Trio}) {
        E2E r = run_model(m, proto, 2, Mode::FullRank, x);
        REQUIRE(r.decoded.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i)
            CHECK(std::fabs(r.decoded.data[i] - want.data[i]) <= 2.0 / 32);
    }
}

TEST_CASE("low-rank conv with truncation skipping runs end to end") {
    FixedPointConfig cfg(64, 5);
    Model m;
    m.input_rows = 16;
    m.input_cols = 1;
    LayerSpec conv;
    conv.kind = LayerKind::LowRankConv;
    conv.conv.batch = 1;
    conv.conv.height = 4;
    conv.conv.width = 4;
    conv.conv.in_ch = 1;
    conv.conv.out_ch = 2;
    conv.conv.kernel = 3;
    conv.conv.pad = 1;
    conv.rank = 2;
    conv.skip_trunc = true;
    conv.u_name = "layer0/U";
    conv.v_name = "layer0/V";
    RealTensor u({3, 3, 1, 2});
    for (std::size_t i = 0; i < u.size(); ++i) u.data[i] = ((static_cast<double>(i % 4)) - 1.5) / 8.0;
    RealTensor v({1, 1, 2, 2}, {0.25, -0.5, 0.5, 0.25});
    m.store.put(conv.u_name, u);
    m.store.put(conv.v_name, v);
    m.layers.push_back(conv);

    RealTensor x({1, 4, 4, 1});
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = (static_cast<double>(i % 6) - 2.5) / 4.0;
    RealTensor want = plaintext_linear_oracle(x, plan_reference_layers(m, Mode::LR_TS));

    for (Protocol proto : {Protocol::Npc, Protocol::Trio}) {
        E2E r = run_model(m, proto, 2, Mode::LR_TS, x);
        for (std::size_t i = 0; i < want.size(); ++i)
            CHECK(std::fabs(r.decoded.data[i] - want.data[i]) <= 3.0 / 32);
    }
}

TEST_CASE("square activation layer end to end") {
    Model m = two_fc_identity(3);
    LayerSpec sq;
    sq.kind = LayerKind::Square;
    m.layers.insert(m.layers.begin() + 1, sq);
    RealTensor x({2, 3}, {0.5, -1.0, 1.5, 0.25, -0.5, 2.0});
    RealTensor want = plaintext_linear_oracle(x, plan_reference_layers(m, Mode::FullRank));
    for (Protocol proto : {Protocol::Npc, Protocol::Trio}) {
        E2E r = run_model(m, proto, 3, Mode::FullRank, x);
        for (std::size_t i = 0; i < want.size(); ++i)
            CHECK(std::fabs(r.decoded.data[i] - want.data[i]) <= 4.0 / 32);
    }
}

TEST_CASE("simulator agrees with an independent longest-path computation") {
    FixedPointConfig cfg(64, 5);
    Model m = lowrank_fc_model(3, 4, 8, 2, false);
    for (Protocol proto : {Protocol::Npc, Protocol::Trio}) {
        for (Mode mode : {Mode::FullRank, Mode::LR_TS, Mode::LR_TS_Concat}) {
            ExecutionPlan plan = build_plan(m, proto, 3, mode, cfg);
            EventProgram prog = schedule(plan);
            SimOptions opts;
            opts.profile = {"inf", 3.5, 1e9};  // effectively zero serialization
            opts.ns_per_mult = 50.0;
            opts.record_events = false;
            Timeline tl = simulate(plan, prog, opts);
            double want = longest_path_finish(prog, 3.5, 50.0);
            CHECK(tl.critical_path_ms == doctest::Approx(want).epsilon(1e-9));
        }
    }
}

TEST_CASE("zero profile finish time equals the pure compute critical path") {
    FixedPointConfig cfg(64, 5);
    Model m = lowrank_fc_model(2, 4, 8, 2, false);
    ExecutionPlan plan = build_plan(m, Protocol::Npc, 3, Mode::LR_TS, cfg);
    EventProgram prog = schedule(plan);
    SimOptions opts;
    opts.profile = NetworkProfile::zero();
    opts.ns_per_mult = 100.0;
    Timeline tl = simulate(plan, prog, opts);
    CHECK(tl.critical_path_ms ==
          doctest::Approx(longest_path_finish(prog, 0.0, 100.0)).epsilon(1e-9));
    CHECK(tl.metrics.rounds == 6);  // 2 layers x 3 rounds, structure unaffected by timing
}

TEST_CASE("concatenation hides one one-way latency per junction under WAN") {
    FixedPointConfig cfg(64, 5);
    // the bench-scale model: halves of each low-rank multiply cost more than
    // the 17.5 ms one-way latency at 1 ns/mult
    Model m = lowrank_fc_model(4, 1024, 512, 32, true);
    SimOptions opts;
    opts.profile = NetworkProfile::wan();
    opts.ns_per_mult = 1.0;
    opts.record_events = false;

    ExecutionPlan p_ts = build_plan(m, Protocol::Npc, 3, Mode::LR_TS, cfg);
    ExecutionPlan p_cc = build_plan(m, Protocol::Npc, 3, Mode::LR_TS_Concat, cfg);
    double t_ts = simulate(p_ts, schedule(p_ts), opts).critical_path_ms;
    double t_cc = simulate(p_cc, schedule(p_cc), opts).critical_path_ms;
    CHECK(t_cc <= t_ts - 3 * 17.5);

    // trio: P2 never blocks on its send; the pipelined form is strictly faster
    ExecutionPlan q_ts = build_plan(m, Protocol::Trio, 3, Mode::LR_TS, cfg);
    ExecutionPlan q_cc = build_plan(m, Protocol::Trio, 3, Mode::LR_TS_Concat, cfg);
    double u_ts = simulate(q_ts, schedule(q_ts), opts).critical_path_ms;
    double u_cc = simulate(q_cc, schedule(q_cc), opts).critical_path_ms;
    CHECK(u_cc < u_ts);
}

TEST_CASE("bench reproduces the LAN > MAN > WAN speedup ordering") {
    Model m = lowrank_fc_model(4, 1024, 512, 32, true);
    BenchOptions opts;
    opts.cfg = FixedPointConfig(64, 5);
    opts.modes = {Mode::FullRank, Mode::LR_TS_Concat};
    BenchReport rep = run_bench(m, opts);
    REQUIRE(rep.rows.size() == 2 * 3 * 2);
    for (const char* proto : {"npc", "trio"}) {
        std::map<std::string, double> speedup;
        for (const auto& r : rep.rows)
            if (r.protocol == proto && r.mode == "lr_ts_concat") speedup[r.network] = r.speedup_pct;
        CHECK(speedup.at("lan") > speedup.at("man"));
        CHECK(speedup.at("man") > speedup.at("wan"));
        CHECK(speedup.at("wan") > 0);
    }
}

TEST_CASE("offline accounting flows through the bench") {
    Model m = lowrank_fc_model(1, 1, 512, 128, false);
    BenchOptions opts;
    opts.cfg = FixedPointConfig(64, 5);
    opts.protocols = {Protocol::Npc};
    opts.networks = {"lan"};
    opts.offline_only = true;
    BenchReport rep = run_bench(m, opts);
    u64 full = 0, lowr = 0;
    for (const auto& r : rep.rows) {
        if (r.mode == "full") full = r.offline_triple_elements;
        if (r.mode == "lr_ts") lowr = r.offline_triple_elements;
    }
    CHECK(full == 263168);
    CHECK(lowr == 132352);
}
