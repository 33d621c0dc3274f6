#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "lrmpc/bench.hpp"
#include "lrmpc/errors.hpp"
#include "lrmpc/vm.hpp"

using namespace lrmpc;

namespace {

struct CommonOpts {
    u32 l = 64, f = 5;
    bool has_seed = false;
    u64 seed = 0;

    FixedPointConfig cfg() const { return FixedPointConfig(l, f); }
    SeedSet seeds() const { return SeedSet::from_master(resolve_master_seed(has_seed, seed)); }
};

void add_common(CLI::App* app, CommonOpts& c) {
    app->add_option("--ring-bits,-l", c.l, "ring width in bits")->check(CLI::Range(8, 64));
    app->add_option("--frac-bits,-f", c.f, "fraction bits");
    app->add_option("--seed", c.seed, "master seed (overrides LRMPC_SEED)")
        ->each([&](const std::string&) { c.has_seed = true; });
}

void write_json(const std::string& path, const nlohmann::json& j) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << std::endl;
        return;
    }
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot write " + path);
    f << j.dump(2) << std::endl;
}

Model load_model(const std::string& path) { return Model::load(path); }

// one party's share container: weight shares always, input shares when the
// plaintext input is supplied (trio parties hold m components; P1 derives)
void write_share_files(const ExecutionPlan& plan, const EventProgram& prog, const Model& model,
                       const RealTensor* input, const SeedSet& seeds, const std::string& dir) {
    RealTensor zero_input(plan.wires.at(plan.input_wire).shape);
    auto inputs = make_party_inputs(plan, prog, model, input ? *input : zero_input, seeds);
    for (u32 p = 1; p <= plan.parties(); ++p) {
        Container c;
        c.meta()["scheme"] = plan.protocol == Protocol::Npc ? "additive" : "trio";
        c.meta()["party"] = p;
        c.meta()["l"] = plan.cfg.l;
        c.meta()["f"] = plan.cfg.f;
        const auto& wires = prog.parties[p - 1].input_wires;
        for (std::size_t k = 0; k < wires.size(); ++k) {
            if (!input && wires[k] == plan.input_wire) continue;
            c.put("wire" + std::to_string(wires[k]), inputs[p - 1][k]);
        }
        c.save(dir + "/party" + std::to_string(p) + ".lrmt");
    }
}

void write_material_files(const ExecutionPlan& plan, const DealerOutput& dealt,
                          const std::string& dir) {
    for (u32 p = 1; p <= plan.parties(); ++p) {
        Container c;
        c.meta()["party"] = p;
        c.meta()["kind"] = "offline_material";
        nlohmann::json slots = nlohmann::json::array();
        const MaterialStore& store = dealt.stores[p - 1];
        for (u32 s = 0; s < plan.material.size(); ++s) {
            const auto& spec = plan.material[s];
            nlohmann::json sj;
            sj["slot"] = s;
            sj["layer"] = spec.layer;
            sj["d"] = spec.d;
            std::string base = "slot" + std::to_string(s) + "/";
            switch (spec.kind) {
            case MaterialKind::BeaverMatmul:
            case MaterialKind::BeaverElt: {
                sj["kind"] = "beaver";
                const auto& t = const_cast<MaterialStore&>(store).triple(s);
                c.put(base + "A", t.A);
                c.put(base + "B", t.B);
                c.put(base + "C", t.C);
                sj["elementwise"] = t.elementwise;
                break;
            }
            case MaterialKind::TruncMask: {
                sj["kind"] = "trunc";
                const auto& mk = const_cast<MaterialStore&>(store).mask(s);
                if (mk.R.size()) {
                    c.put(base + "R", mk.R);
                    c.put(base + "Rp", mk.Rp);
                    c.put(base + "B", mk.Bbit);
                }
                if (mk.lam_out2) c.put(base + "lam2", *mk.lam_out2);
                if (mk.lam_out3) c.put(base + "lam3", *mk.lam_out3);
                break;
            }
            case MaterialKind::TrioMatmul:
            case MaterialKind::TrioElt: {
                sj["kind"] = "trio_prep";
                const auto& pp = const_cast<MaterialStore&>(store).prep(s);
                if (pp.MN.size()) c.put(base + "MN", pp.MN);
                if (pp.lamZ2) c.put(base + "lamZ2", *pp.lamZ2);
                if (pp.lamZ3) c.put(base + "lamZ3", *pp.lamZ3);
                sj["elementwise"] = spec.kind == MaterialKind::TrioElt;
                break;
            }
            case MaterialKind::None:
                sj["kind"] = "none";
                break;
            }
            slots.push_back(std::move(sj));
        }
        c.meta()["slots"] = slots;
        c.save(dir + "/material_party" + std::to_string(p) + ".lrmt");
    }
}

MaterialStore load_material_file(const ExecutionPlan& plan, const std::string& path) {
    Container c = Container::load(path);
    std::vector<PartyMaterial> mats(plan.material.size());
    for (const auto& sj : c.meta().at("slots")) {
        u32 s = sj.at("slot").get<u32>();
        std::string base = "slot" + std::to_string(s) + "/";
        std::string kind = sj.at("kind").get<std::string>();
        if (kind == "beaver") {
            BeaverTripleShare t;
            t.A = c.ring(base + "A");
            t.B = c.ring(base + "B");
            t.C = c.ring(base + "C");
            t.elementwise = sj.value("elementwise", false);
            mats[s].triple = std::move(t);
        } else if (kind == "trunc") {
            TruncMaskShare mk;
            mk.d = sj.at("d").get<u32>();
            if (c.has(base + "R")) {
                mk.R = c.ring(base + "R");
                mk.Rp = c.ring(base + "Rp");
                mk.Bbit = c.ring(base + "B");
            }
            if (c.has(base + "lam2")) mk.lam_out2 = c.ring(base + "lam2");
            if (c.has(base + "lam3")) mk.lam_out3 = c.ring(base + "lam3");
            mats[s].mask = std::move(mk);
        } else if (kind == "trio_prep") {
            TrioPrepShare pp;
            if (c.has(base + "MN")) pp.MN = c.ring(base + "MN");
            if (c.has(base + "lamZ2")) pp.lamZ2 = c.ring(base + "lamZ2");
            if (c.has(base + "lamZ3")) pp.lamZ3 = c.ring(base + "lamZ3");
            pp.elementwise = sj.value("elementwise", false);
            mats[s].prep = std::move(pp);
        }
    }
    return MaterialStore(std::move(mats));
}

int cmd_decompose(const std::string& in, const std::string& out, const std::string& policy_path,
                  double fc_ratio, double conv_ratio, const std::string& report_path) {
    Model model = load_model(in);
    Policy policy;
    if (!policy_path.empty()) {
        policy = Policy::load(policy_path);
    } else {
        policy.fc_ratio = fc_ratio;
        policy.conv_ratio = conv_ratio;
        for (u32 i = 0; i < model.layers.size(); ++i) {
            auto k = model.layers[i].kind;
            if (k == LayerKind::FullRankFC || k == LayerKind::FullRankConv)
                policy.low_rank_layers.push_back(i);
        }
    }
    DecomposeReport rep = decompose_model(model, policy);
    model.save(out);
    write_json(report_path, rep.to_json());
    return 0;
}

RealTensor load_input_tensor(const std::string& path, const std::string& name) {
    Container c = Container::load(path);
    return c.real(name);
}

int cmd_share(const CommonOpts& common, const std::string& model_path, const std::string& proto_s,
              u32 n, const std::string& mode_s, const std::string& input_path,
              const std::string& input_name, const std::string& out_dir) {
    Model model = load_model(model_path);
    Protocol proto = protocol_from_name(proto_s);
    Mode mode = mode_from_name(mode_s);
    ExecutionPlan plan = build_plan(model, proto, n, mode, common.cfg());
    EventProgram prog = schedule(plan);
    SeedSet seeds = common.seeds();

    std::optional<RealTensor> input;
    if (!input_path.empty()) input = load_input_tensor(input_path, input_name);
    write_share_files(plan, prog, model, input ? &*input : nullptr, seeds, out_dir);

    DealerOutput dealt = deal_material(plan.material, proto == Protocol::Trio ? Scheme::Trio
                                                                              : Scheme::Additive,
                                       plan.parties(), plan.cfg, seeds, plan.lambda_rules);
    write_material_files(plan, dealt, out_dir);

    // public model file: structure and public tensors, no weights
    Model pub;
    pub.layers = model.layers;
    pub.input_rows = model.input_rows;
    pub.input_cols = model.input_cols;
    for (const auto& ly : model.layers)
        if (!ly.public_name.empty()) pub.store.put(ly.public_name, model.store.real(ly.public_name));
    pub.save(out_dir + "/model_public.lrmt");

    nlohmann::json j;
    j["dealer_bytes"] = dealt.bytes;
    j["parties"] = plan.parties();
    write_json(out_dir + "/dealer_report.json", j);
    return 0;
}

int cmd_run_party(const CommonOpts& common, const std::string& config_path) {
    std::ifstream f(config_path);
    if (!f) throw ValidationError("cannot open config " + config_path);
    nlohmann::json cfg = nlohmann::json::parse(f);

    u32 party = cfg.at("party").get<u32>();
    std::string dir = cfg.at("share_dir").get<std::string>();
    Model model = load_model(cfg.value("model", dir + "/model_public.lrmt"));
    Protocol proto = protocol_from_name(cfg.at("protocol").get<std::string>());
    Mode mode = mode_from_name(cfg.at("mode").get<std::string>());
    u32 n = cfg.value("parties", 3u);
    bool allow_insecure = cfg.value("allow_insecure", false);
    u32 session = cfg.value("session", 1u);

    ExecutionPlan plan = build_plan(model, proto, n, mode, common.cfg());
    plan.session = session;
    EventProgram prog = schedule(plan);
    SeedSet seeds = common.seeds();

    std::vector<Endpoint> eps;
    for (const auto& ej : cfg.at("endpoints"))
        eps.push_back({ej.at("party").get<u32>(), ej.at("host").get<std::string>(),
                       ej.at("port").get<int>()});

    Container shares = Container::load(dir + "/party" + std::to_string(party) + ".lrmt");
    std::vector<RingTensor> inputs;
    for (u32 w : prog.parties[party - 1].input_wires)
        inputs.push_back(shares.ring("wire" + std::to_string(w)));

    MaterialStore store =
        load_material_file(plan, dir + "/material_party" + std::to_string(party) + ".lrmt");

    SocketTransport tr(party, eps, plan.topology(), session, /*dealer_channels=*/false);
    VmEnv env;
    env.tr = &tr;
    env.store = &store;
    env.seeds = &seeds;
    env.plan = &plan;
    env.inputs = &inputs;
    env.allow_insecure = allow_insecure;
    VmResult res = execute_program(prog.parties[party - 1], env);

    std::string out_dir = cfg.value("out_dir", dir);
    Container out;
    out.meta()["party"] = party;
    out.meta()["scheme"] = proto == Protocol::Npc ? "additive" : "trio";
    for (std::size_t i = 0; i < res.outputs.size(); ++i)
        out.put("output" + std::to_string(i), res.outputs[i]);
    out.save(out_dir + "/output_party" + std::to_string(party) + ".lrmt");

    Metrics m;
    m.rounds = structural_rounds(plan, prog);
    m.triples_consumed = res.triples.size();
    m.masks_consumed = res.masks.size();
    m.preps_consumed = res.preps.size();
    m.insecure_ops = res.insecure_ops;
    for (const auto& [dst, b] : tr.bytes_by_peer())
        m.bytes[std::to_string(party) + "->" + std::to_string(dst)] = b;
    write_json(out_dir + "/metrics_party" + std::to_string(party) + ".json", m.to_json());
    return 0;
}

int cmd_simulate(const CommonOpts& common, const std::string& model_path,
                 const std::string& proto_s, u32 n, const std::string& mode_s,
                 const std::string& network, double ns_per_mult, bool calibrate,
                 const std::string& out) {
    Model model = load_model(model_path);
    ExecutionPlan plan = build_plan(model, protocol_from_name(proto_s), n,
                                    mode_from_name(mode_s), common.cfg());
    EventProgram prog = schedule(plan);
    SimOptions opts;
    opts.profile = NetworkProfile::by_name(network);
    opts.ns_per_mult = calibrate ? calibrate_ns_per_mult() : ns_per_mult;
    Timeline tl = simulate(plan, prog, opts);
    nlohmann::json j = tl.to_json();
    j["ns_per_mult"] = opts.ns_per_mult;
    write_json(out, j);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"low-rank MPC inference engine"};
    app.require_subcommand(1);
    CommonOpts common;

    // decompose
    auto* dec = app.add_subcommand("decompose", "factorize model weights");
    std::string dec_in, dec_out, dec_policy, dec_report = "-";
    double fc_ratio = 0.25, conv_ratio = 0.5;
    dec->add_option("--in", dec_in)->required();
    dec->add_option("--out", dec_out)->required();
    dec->add_option("--layers", dec_policy, "policy JSON file");
    dec->add_option("--fc-ratio", fc_ratio);
    dec->add_option("--conv-ratio", conv_ratio);
    dec->add_option("--report", dec_report, "rank/error sidecar JSON");
    add_common(dec, common);

    // share
    auto* sh = app.add_subcommand("share", "write per-party share and material files");
    std::string sh_model, sh_proto = "npc", sh_mode = "full", sh_input, sh_input_name = "input",
                sh_out = ".";
    u32 sh_n = 3;
    sh->add_option("--model", sh_model)->required();
    sh->add_option("--protocol", sh_proto);
    sh->add_option("-n,--parties", sh_n);
    sh->add_option("--mode", sh_mode);
    sh->add_option("--input", sh_input, "LRMT file with the plaintext input tensor");
    sh->add_option("--input-name", sh_input_name);
    sh->add_option("--out-dir", sh_out);
    add_common(sh, common);

    // run-party
    auto* rp = app.add_subcommand("run-party", "execute one party over sockets");
    std::string rp_config;
    rp->add_option("--config", rp_config)->required();
    add_common(rp, common);

    // simulate
    auto* sim = app.add_subcommand("simulate", "discrete-event timing simulation");
    std::string sim_model, sim_proto = "npc", sim_mode = "full", sim_net = "wan", sim_out = "-";
    u32 sim_n = 3;
    double ns_per_mult = 1.0;
    bool sim_calibrate = false;
    sim->add_option("--model", sim_model)->required();
    sim->add_option("--protocol", sim_proto);
    sim->add_option("-n,--parties", sim_n);
    sim->add_option("--mode", sim_mode);
    sim->add_option("--network", sim_net);
    sim->add_option("--ns-per-mult", ns_per_mult);
    sim->add_flag("--calibrate", sim_calibrate, "measure the compute constant locally");
    sim->add_option("--out", sim_out);
    add_common(sim, common);

    // bench
    auto* be = app.add_subcommand("bench", "mode x protocol x network sweep");
    std::string be_model, be_out = "-", be_csv;
    std::string be_protocols = "npc,trio", be_modes = "full,lr,lr_ts,lr_ts_concat",
                be_networks = "lan,man,wan";
    u32 be_n = 3;
    double be_ns = 1.0;
    bool be_offline_only = false;
    std::size_t synth_layers = 4, synth_m = 1024, synth_dim = 512, synth_rank = 32;
    bool be_synth = false;
    be->add_option("--model", be_model);
    be->add_flag("--synthetic", be_synth, "use the built-in 4-layer FC bench model");
    be->add_option("--synth-layers", synth_layers);
    be->add_option("--synth-batch", synth_m);
    be->add_option("--synth-dim", synth_dim);
    be->add_option("--synth-rank", synth_rank);
    be->add_option("--protocols", be_protocols);
    be->add_option("--modes", be_modes);
    be->add_option("--networks", be_networks);
    be->add_option("-n,--parties", be_n);
    be->add_option("--ns-per-mult", be_ns);
    be->add_flag("--offline-only", be_offline_only, "emit offline cost accounting only");
    be->add_option("--out", be_out);
    be->add_option("--csv", be_csv);
    add_common(be, common);

    // report
    auto* rep = app.add_subcommand("report", "project a bench JSON to CSV");
    std::string rep_in, rep_out = "-";
    rep->add_option("--in", rep_in)->required();
    rep->add_option("--out", rep_out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*dec) return cmd_decompose(dec_in, dec_out, dec_policy, fc_ratio, conv_ratio, dec_report);
        if (*sh)
            return cmd_share(common, sh_model, sh_proto, sh_n, sh_mode, sh_input, sh_input_name,
                             sh_out);
        if (*rp) return cmd_run_party(common, rp_config);
        if (*sim)
            return cmd_simulate(common, sim_model, sim_proto, sim_n, sim_mode, sim_net, ns_per_mult,
                                sim_calibrate, sim_out);
        if (*be) {
            Model model = be_synth || be_model.empty()
                              ? make_fc_model(synth_layers, synth_m, synth_dim, synth_dim,
                                              synth_rank, /*with_weights=*/true)
                              : load_model(be_model);
            BenchOptions opts;
            opts.cfg = common.cfg();
            opts.n_parties = be_n;
            opts.ns_per_mult = be_ns;
            opts.offline_only = be_offline_only;
            opts.protocols.clear();
            {
                std::stringstream ss(be_protocols);
                std::string tok;
                while (std::getline(ss, tok, ',')) opts.protocols.push_back(protocol_from_name(tok));
            }
            opts.modes.clear();
            {
                std::stringstream ss(be_modes);
                std::string tok;
                while (std::getline(ss, tok, ',')) opts.modes.push_back(mode_from_name(tok));
            }
            opts.networks.clear();
            {
                std::stringstream ss(be_networks);
                std::string tok;
                while (std::getline(ss, tok, ',')) opts.networks.push_back(tok);
            }
            BenchReport brep = run_bench(model, opts);
            write_json(be_out, brep.to_json());
            if (!be_csv.empty()) {
                std::ofstream cf(be_csv);
                cf << brep.to_csv();
            }
            return 0;
        }
        if (*rep) {
            std::ifstream f(rep_in);
            if (!f) throw ValidationError("cannot open " + rep_in);
            nlohmann::json j = nlohmann::json::parse(f);
            BenchReport brep;
            for (const auto& rj : j.at("rows")) {
                BenchRow r;
                r.protocol = rj.at("protocol");
                r.mode = rj.at("mode");
                r.network = rj.at("network");
                r.finish_ms = rj.at("finish_ms");
                r.rounds = rj.at("rounds");
                r.online_bytes = rj.at("online_bytes");
                r.offline_triple_elements = rj.at("offline_triple_elements");
                r.offline_prep_elements = rj.at("offline_prep_elements");
                r.offline_mask_elements = rj.at("offline_mask_elements");
                r.speedup_pct = rj.at("speedup_pct");
                r.insecure_ops = rj.value("insecure_ops", false);
                brep.rows.push_back(std::move(r));
            }
            if (rep_out.empty() || rep_out == "-") {
                std::cout << brep.to_csv();
            } else {
                std::ofstream of(rep_out);
                of << brep.to_csv();
            }
            return 0;
        }
    } catch (const InsecureOpError& e) {
        std::cerr << "insecure operation refused: " << e.what() << std::endl;
        return 4;
    } catch (const TransportError& e) {
        std::cerr << "transport failure: " << e.what() << std::endl;
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "validation failure: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    }
    return 0;
}
