#pragma once

#include "lrmpc/simulate.hpp"

namespace lrmpc {

struct BenchOptions {
    std::vector<Protocol> protocols{Protocol::Npc, Protocol::Trio};
    std::vector<Mode> modes{Mode::FullRank, Mode::LR, Mode::LR_TS, Mode::LR_TS_Concat};
    std::vector<std::string> networks{"lan", "man", "wan"};
    u32 n_parties = 3;
    FixedPointConfig cfg;
    double ns_per_mult = 1.0;
    bool offline_only = false;
};

struct BenchRow {
    std::string protocol, mode, network;
    double finish_ms = 0;
    u64 rounds = 0;
    u64 online_bytes = 0;
    u64 offline_triple_elements = 0;
    u64 offline_prep_elements = 0;
    u64 offline_mask_elements = 0;
    double speedup_pct = 0;      // (T_full/T_mode - 1) * 100, per protocol+network
    bool insecure_ops = false;   // plan contains debug reveals
};

struct BenchReport {
    std::vector<BenchRow> rows;
    nlohmann::json to_json() const;
    std::string to_csv() const;
};

BenchReport run_bench(const Model& model, const BenchOptions& opts);

} // namespace lrmpc
