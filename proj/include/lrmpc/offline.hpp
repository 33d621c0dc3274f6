#pragma once

#include <map>
#include <optional>

#include "lrmpc/sharing.hpp"

namespace lrmpc {

// ---------- per-party correlated randomness ----------

// Additive shares of (A, B, C) with C = A (.) B; matrix product for matmul
// triples, elementwise product for square/activation triples.
struct BeaverTripleShare {
    RingTensor A, B, C;
    bool elementwise = false;
    bool used = false;
};

// Shares of the truncation mask: R uniform on l-1-d bits, Rp uniform on d
// bits, Bbit a single uniform bit, all additively shared over the parties
// that run the opening (every party in n-PC, P2/P3 in trio). Trio masks also
// carry the fresh output masks the result is re-shared onto.
struct TruncMaskShare {
    u32 d = 0;
    RingTensor R, Rp, Bbit;
    // trio only: lam_out.first = lambda2 side, .second = lambda3 side;
    // presence depends on the role (P1 both, P2 the 2-side, P3 the 3-side)
    std::optional<RingTensor> lam_out2, lam_out3;
    bool used = false;
};

// Trio preprocessing for one multiplication: P2 receives N, P3 receives M,
// and every role learns its side of the output mask lamZ.
struct TrioPrepShare {
    RingTensor MN;  // N at P2, M at P3, empty at P1
    std::optional<RingTensor> lamZ2, lamZ3;
    bool elementwise = false;
    bool used = false;
};

// ---------- dealer-side generation (all parties' shares at once) ----------

struct BeaverTriple {
    std::vector<BeaverTripleShare> party;  // index = party-1
};
struct TruncMask {
    std::vector<TruncMaskShare> party;  // n-PC: party-1; trio: index 0..2 = roles P1..P3
    Scheme scheme = Scheme::Additive;
};
struct TrioPrep {
    std::array<TrioPrepShare, 3> party;
};

BeaverTriple gen_beaver(std::size_t m, std::size_t n, std::size_t o, u32 parties, const Ring& rg,
                        const Seed256& seed, u32 slot);
BeaverTriple gen_beaver_elt(const Shape& shape, u32 parties, const Ring& rg, const Seed256& seed,
                            u32 slot);
TruncMask gen_trunc_mask(const Shape& shape, u32 d, const FixedPointConfig& cfg, u32 parties,
                         Scheme scheme, const Seed256& seed, u32 slot);
// M/N from mask tensors only (input independent); lamZ sides included.
TrioPrep gen_trio_prep(const RingTensor& lamX2, const RingTensor& lamX3, const RingTensor& lamY2,
                       const RingTensor& lamY3, const RingTensor& lamZ2, const RingTensor& lamZ3,
                       bool elementwise, const Ring& rg);

// ---------- engine-facing material plan ----------

enum class MaterialKind : u8 { None, BeaverMatmul, BeaverElt, TruncMask, TrioMatmul, TrioElt };

// One protocol-op slot worth of offline material, described by shape only.
struct MaterialSpec {
    MaterialKind kind = MaterialKind::None;
    u32 layer = 0;
    std::size_t m = 0, n = 0, o = 0;  // matmul dims
    Shape shape;                      // elementwise / trunc shapes
    u32 d = 0;                        // trunc bits
    u32 x_wire = 0, y_wire = 0, z_wire = 0;  // trio lambda derivation
};

// Closed-form offline cost accounting; no generation involved.
struct OfflineCostReport {
    struct Row {
        u32 layer = 0;
        u64 triple_elements = 0;      // beaver triple ring elements
        u64 trio_prep_elements = 0;   // M and N elements
        u64 trunc_mask_elements = 0;  // mask tensor elements (R,R',B each this size)
        u64 trunc_shared_bits = 0;    // l bits per masked element, invariant in d
    };
    std::vector<Row> per_layer;
    Row total;
    std::map<std::string, u64> dealer_bytes;  // channel "0->k" -> payload bytes
};

OfflineCostReport account(const std::vector<MaterialSpec>& slots, u32 l);

// Per-party store of generated material, consumed slot by slot.
struct PartyMaterial {
    std::optional<BeaverTripleShare> triple;
    std::optional<TruncMaskShare> mask;
    std::optional<TrioPrepShare> prep;
};

class MaterialStore {
public:
    explicit MaterialStore(std::vector<PartyMaterial> slots) : slots_(std::move(slots)) {}
    MaterialStore() = default;

    BeaverTripleShare& triple(u32 slot);
    TruncMaskShare& mask(u32 slot);
    TrioPrepShare& prep(u32 slot);
    std::size_t size() const { return slots_.size(); }

private:
    std::vector<PartyMaterial> slots_;
};

// Resolves trio wire masks lambda(wire, side) from pairwise seeds; the
// dealer and the compiled party programs must agree on these bit for bit.
// TruncMaskOut wires take the fresh masks generated with slot `src_slot`'s
// truncation material; Zero covers debug re-shares of opened values.
struct WireLambdaRule {
    enum class Kind { Prf, Zero, Im2col, PublicMatmulLeft, TruncMaskOut } kind = Kind::Prf;
    Shape shape;
    u32 src_wire = 0;           // derived rules
    u32 src_slot = 0;           // TruncMaskOut
    ConvShape conv;             // Im2col
    RingTensor pub;             // PublicMatmulLeft: encoded public matrix
    std::string pub_name;       // name of that matrix in the plan's publics
};

class LambdaResolver {
public:
    LambdaResolver(const std::map<u32, WireLambdaRule>* rules, const SeedSet* seeds, Ring rg)
        : rules_(rules), seeds_(seeds), rg_(rg) {}

    const RingTensor& lambda(u32 wire, int side);  // side 2 or 3

private:
    const std::map<u32, WireLambdaRule>* rules_;
    const SeedSet* seeds_;
    Ring rg_;
    std::map<std::pair<u32, int>, RingTensor> memo_;
};

RingTensor prf_wire_lambda(const SeedSet& seeds, u32 wire, int side, const Shape& shape,
                           const Ring& rg);
RingTensor prf_trunc_out_lambda(const Seed256& dealer_seed, u32 slot, int side, const Shape& shape,
                                const Ring& rg);

// Trio sharing of a named wire: masks come from the wire-lambda streams so
// every participant (dealer included) derives the same values.
std::array<TrioShare, 3> share_trio_wire(const RingTensor& x, u32 wire, const SeedSet& seeds,
                                         const Ring& rg);

// Generates every slot for every party and meters what the dealer would
// actually ship (seed-derived shares are free, corrections are not).
struct DealerOutput {
    std::vector<MaterialStore> stores;  // index = party-1
    std::map<std::string, u64> bytes;   // "0->k" or "1->k" channel -> payload bytes
};

DealerOutput deal_material(const std::vector<MaterialSpec>& slots, Scheme scheme, u32 parties,
                           const FixedPointConfig& cfg, const SeedSet& seeds,
                           const std::map<u32, WireLambdaRule>& wire_rules);

} // namespace lrmpc
