#pragma once

#include "lrmpc/program.hpp"
#include "lrmpc/vm.hpp"

namespace lrmpc {

struct SimOptions {
    NetworkProfile profile;
    double ns_per_mult = 1.0;  // calibratable compute cost constant
    bool record_events = true;
};

struct TimelineEvent {
    u32 party;
    double start_ms, end_ms;
    std::string what;
};

struct Timeline {
    std::vector<TimelineEvent> events;
    std::map<u32, double> finish_ms;
    double critical_path_ms = 0;  // max finish over parties
    Metrics metrics;              // rounds/bytes are structural, times are not

    nlohmann::json to_json() const;
};

// Deterministic discrete-event walk of the compiled programs: per-party
// virtual clocks, per-channel FIFO serialization at the profile bandwidth,
// one-way latency per message, compute charged at ns_per_mult * cost.
// Also the schedule-safety check: an unmatched or out-of-order receive
// deadlocks and raises a ValidationError.
Timeline simulate(const ExecutionPlan& plan, const EventProgram& prog, const SimOptions& opts);

// Blocking-round count alone (profile independent).
u64 structural_rounds(const ExecutionPlan& plan, const EventProgram& prog);

// ns/mult measured from a local ring_matmul microbenchmark (the --calibrate
// path; the default stays pinned for reproducibility).
double calibrate_ns_per_mult();

} // namespace lrmpc
