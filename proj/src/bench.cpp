#include "lrmpc/bench.hpp"

#include <sstream>

namespace lrmpc {

nlohmann::json BenchReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        arr.push_back({{"protocol", r.protocol},
                       {"mode", r.mode},
                       {"network", r.network},
                       {"finish_ms", r.finish_ms},
                       {"rounds", r.rounds},
                       {"online_bytes", r.online_bytes},
                       {"offline_triple_elements", r.offline_triple_elements},
                       {"offline_prep_elements", r.offline_prep_elements},
                       {"offline_mask_elements", r.offline_mask_elements},
                       {"speedup_pct", r.speedup_pct},
                       {"insecure_ops", r.insecure_ops}});
    }
    return {{"rows", arr}};
}

std::string BenchReport::to_csv() const {
    std::ostringstream os;
    os << "protocol,mode,network,finish_ms,rounds,online_bytes,offline_triple_elements,"
          "offline_prep_elements,offline_mask_elements,speedup_pct,insecure_ops\n";
    for (const auto& r : rows)
        os << r.protocol << ',' << r.mode << ',' << r.network << ',' << r.finish_ms << ','
           << r.rounds << ',' << r.online_bytes << ',' << r.offline_triple_elements << ','
           << r.offline_prep_elements << ',' << r.offline_mask_elements << ',' << r.speedup_pct
           << ',' << (r.insecure_ops ? 1 : 0) << '\n';
    return os.str();
}

BenchReport run_bench(const Model& model, const BenchOptions& opts) {
    BenchReport rep;
    for (Protocol proto : opts.protocols) {
        for (const std::string& net : opts.networks) {
            double t_full = 0;
            for (Mode mode : opts.modes) {
                ExecutionPlan plan = build_plan(model, proto, opts.n_parties, mode, opts.cfg);
                OfflineCostReport off = account(plan.material, opts.cfg.l);
                BenchRow row;
                row.protocol = protocol_name(proto);
                row.mode = mode_name(mode);
                row.network = net;
                row.offline_triple_elements = off.total.triple_elements;
                row.offline_prep_elements = off.total.trio_prep_elements;
                row.offline_mask_elements = off.total.trunc_mask_elements;
                for (const auto& op : plan.ops)
                    if (op.kind == OpKind::DebugRelu) row.insecure_ops = true;
                if (!opts.offline_only) {
                    EventProgram prog = schedule(plan);
                    SimOptions sopts;
                    sopts.profile = NetworkProfile::by_name(net);
                    sopts.ns_per_mult = opts.ns_per_mult;
                    sopts.record_events = false;
                    Timeline tl = simulate(plan, prog, sopts);
                    row.finish_ms = tl.critical_path_ms;
                    row.rounds = tl.metrics.rounds;
                    for (const auto& [ch, b] : tl.metrics.bytes) row.online_bytes += b;
                    if (mode == Mode::FullRank) t_full = row.finish_ms;
                    if (t_full > 0 && row.finish_ms > 0)
                        row.speedup_pct = (t_full / row.finish_ms - 1.0) * 100.0;
                }
                rep.rows.push_back(std::move(row));
            }
        }
    }
    return rep;
}

} // namespace lrmpc
