#pragma once

#include <set>

#include "lrmpc/program.hpp"
#include "lrmpc/protocols.hpp"

namespace lrmpc {

struct Metrics {
    u64 rounds = 0;                      // max blocking-recv chain over parties
    std::map<std::string, u64> bytes;    // directed channel "i->j" -> payload bytes
    u64 triples_consumed = 0;
    u64 masks_consumed = 0;
    u64 preps_consumed = 0;
    std::vector<std::string> insecure_ops;

    nlohmann::json to_json() const;
};

struct VmResult {
    std::vector<RingTensor> outputs;
    u64 round_chain = 0;
    std::set<u32> triples, masks, preps;  // slots touched
    std::vector<std::string> insecure_ops;
};

struct VmEnv {
    Transport* tr = nullptr;
    MaterialStore* store = nullptr;
    const SeedSet* seeds = nullptr;
    const ExecutionPlan* plan = nullptr;
    const std::vector<RingTensor>* inputs = nullptr;
    bool allow_insecure = false;
};

// Executes one party's program over its transport. Blocking; run one party
// per thread (or per process for the socket transport).
VmResult execute_program(const PartyProgram& prog, VmEnv env);

struct RunResult {
    std::vector<std::vector<RingTensor>> party_outputs;  // [party-1]
    Metrics metrics;
};

// All parties on in-process threads over a LocalHub.
RunResult run_inprocess(const ExecutionPlan& plan, const EventProgram& prog,
                        const std::vector<std::vector<RingTensor>>& inputs,
                        std::vector<MaterialStore>& stores, const SeedSet& seeds,
                        bool allow_insecure);

// Per-party input share tensors in program input order (encodes, then
// shares input and weights deterministically under the seeds).
std::vector<std::vector<RingTensor>> make_party_inputs(const ExecutionPlan& plan,
                                                       const EventProgram& prog,
                                                       const Model& model,
                                                       const RealTensor& input,
                                                       const SeedSet& seeds);

RingTensor reconstruct_output(const ExecutionPlan& plan,
                              const std::vector<std::vector<RingTensor>>& party_outputs);

} // namespace lrmpc
