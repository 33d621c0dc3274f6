#include "lrmpc/simulate.hpp"

#include <chrono>
#include <sstream>

#include "lrmpc/errors.hpp"

namespace lrmpc {

nlohmann::json Timeline::to_json() const {
    nlohmann::json j;
    j["critical_path_ms"] = critical_path_ms;
    nlohmann::json fin = nlohmann::json::object();
    for (const auto& [p, t] : finish_ms) fin[std::to_string(p)] = t;
    j["finish_ms"] = fin;
    j["metrics"] = metrics.to_json();
    nlohmann::json ev = nlohmann::json::array();
    for (const auto& e : events)
        ev.push_back({{"party", e.party}, {"start_ms", e.start_ms}, {"end_ms", e.end_ms},
                      {"what", e.what}});
    j["events"] = ev;
    return j;
}

namespace {

const char* iop_name(IOp op) {
    switch (op) {
    case IOp::Input: return "input";
    case IOp::Offline: return "offline";
    case IOp::LoadPub: return "load_pub";
    case IOp::PrfLam: return "prf_lam";
    case IOp::Zero: return "zero";
    case IOp::Lin: return "lin";
    case IOp::Matmul: return "matmul";
    case IOp::EltMul: return "elt_mul";
    case IOp::Im2col: return "im2col";
    case IOp::MsbSplit: return "msb_split";
    case IOp::ReluPub: return "relu";
    case IOp::Send: return "send";
    case IOp::Recv: return "recv";
    case IOp::Output: return "output";
    }
    return "?";
}

struct SendRec {
    double arrival_ms;
    u64 tag;
};

} // namespace

Timeline simulate(const ExecutionPlan& plan, const EventProgram& prog, const SimOptions& opts) {
    u32 n = plan.parties();
    Timeline tl;
    std::vector<std::size_t> pc(n, 0);
    std::vector<double> clock(n, 0.0);
    std::vector<u64> chain(n, 0);
    // (from, to, kind, slot) -> delivery record
    std::map<std::tuple<u32, u32, u8, u32>, SendRec> sends;
    std::map<std::pair<u32, u32>, double> channel_busy;

    auto bw_ms = [&](u64 elems) {
        double bits = static_cast<double>(elems) * 64.0;
        return bits / (opts.profile.bandwidth_gbps * 1e9) * 1e3;
    };

    bool progress = true;
    std::size_t done = 0;
    while (done < n) {
        if (!progress) {
            std::ostringstream os;
            os << "schedule deadlock: ";
            for (u32 p = 0; p < n; ++p)
                if (pc[p] < prog.parties[p].code.size()) {
                    const auto& in = prog.parties[p].code[pc[p]];
                    os << "P" << (p + 1) << " blocked at " << iop_name(in.op) << " "
                       << msg_kind_name(in.kind) << "/slot" << in.slot << "; ";
                }
            throw ValidationError(os.str());
        }
        progress = false;
        done = 0;
        for (u32 p = 0; p < n; ++p) {
            const auto& code = prog.parties[p].code;
            while (pc[p] < code.size()) {
                const Instr& in = code[pc[p]];
                if (in.op == IOp::Send) {
                    u32 from = p + 1, to = in.peer;
                    auto ch = std::make_pair(from, to);
                    double start = std::max(channel_busy[ch], clock[p]);
                    double busy_until = start + bw_ms(in.elems);
                    channel_busy[ch] = busy_until;
                    double arrival = busy_until + opts.profile.latency_ms;
                    auto key = std::make_tuple(from, to, static_cast<u8>(in.kind), in.slot);
                    if (sends.count(key))
                        throw ValidationError("duplicate message key on channel");
                    sends[key] = {arrival, chain[p]};
                    tl.metrics.bytes[std::to_string(from) + "->" + std::to_string(to)] +=
                        in.elems * 8;
                    if (opts.record_events)
                        tl.events.push_back({p + 1, clock[p], clock[p],
                                             std::string("send ") + msg_kind_name(in.kind) +
                                                 "/" + std::to_string(in.slot)});
                    ++pc[p];
                    progress = true;
                    continue;
                }
                if (in.op == IOp::Recv) {
                    auto key = std::make_tuple(in.peer, p + 1, static_cast<u8>(in.kind), in.slot);
                    auto it = sends.find(key);
                    if (it == sends.end()) break;  // stall until the send is simulated
                    double start = clock[p];
                    clock[p] = std::max(clock[p], it->second.arrival_ms);
                    chain[p] = std::max(chain[p], it->second.tag + 1);
                    if (opts.record_events && clock[p] > start)
                        tl.events.push_back({p + 1, start, clock[p],
                                             std::string("wait ") + msg_kind_name(in.kind) + "/" +
                                                 std::to_string(in.slot)});
                    sends.erase(it);
                    ++pc[p];
                    progress = true;
                    continue;
                }
                double cost_ms = static_cast<double>(in.cost_mults) * opts.ns_per_mult * 1e-6;
                if (cost_ms > 0) {
                    if (opts.record_events)
                        tl.events.push_back({p + 1, clock[p], clock[p] + cost_ms, iop_name(in.op)});
                    clock[p] += cost_ms;
                }
                ++pc[p];
                progress = true;
            }
            if (pc[p] >= code.size()) ++done;
        }
    }
    if (!sends.empty()) throw ValidationError("unconsumed messages left in the schedule");

    for (u32 p = 0; p < n; ++p) {
        tl.finish_ms[p + 1] = clock[p];
        tl.critical_path_ms = std::max(tl.critical_path_ms, clock[p]);
        tl.metrics.rounds = std::max(tl.metrics.rounds, chain[p]);
    }
    return tl;
}

u64 structural_rounds(const ExecutionPlan& plan, const EventProgram& prog) {
    SimOptions opts;
    opts.profile = NetworkProfile::zero();
    opts.record_events = false;
    return simulate(plan, prog, opts).metrics.rounds;
}

double calibrate_ns_per_mult() {
    Ring rg(64);
    std::size_t n = 192;
    Prf prf(make_master_seed(11), 0);
    RingTensor a = prf.tensor({n, n}, rg);
    RingTensor b = prf.tensor({n, n}, rg);
    auto t0 = std::chrono::steady_clock::now();
    RingTensor c = ring_matmul(rg, a, b);
    auto t1 = std::chrono::steady_clock::now();
    double ns = std::chrono::duration<double, std::nano>(t1 - t0).count();
    volatile u64 sink = c.data[0];
    (void)sink;
    return ns / (static_cast<double>(n) * n * n);
}

} // namespace lrmpc
