#include "lrmpc/prng.hpp"

#include <cstdlib>

namespace lrmpc {

namespace {

inline u32 rotl(u32 x, int n) { return (x << n) | (x >> (32 - n)); }

inline void quarter(u32& a, u32& b, u32& c, u32& d) {
    a += b; d ^= a; d = rotl(d, 16);
    c += d; b ^= c; b = rotl(b, 12);
    a += b; d ^= a; d = rotl(d, 8);
    c += d; b ^= c; b = rotl(b, 7);
}

void chacha_block(const std::array<u32, 16>& in, std::array<u32, 16>& out) {
    out = in;
    for (int round = 0; round < 10; ++round) {
        quarter(out[0], out[4], out[8], out[12]);
        quarter(out[1], out[5], out[9], out[13]);
        quarter(out[2], out[6], out[10], out[14]);
        quarter(out[3], out[7], out[11], out[15]);
        quarter(out[0], out[5], out[10], out[15]);
        quarter(out[1], out[6], out[11], out[12]);
        quarter(out[2], out[7], out[8], out[13]);
        quarter(out[3], out[4], out[9], out[14]);
    }
    for (int i = 0; i < 16; ++i) out[i] += in[i];
}

} // namespace

Prf::Prf(const Seed256& seed, u64 domain) {
    // "expand 32-byte k" constants
    state_[0] = 0x61707865;
    state_[1] = 0x3320646e;
    state_[2] = 0x79622d32;
    state_[3] = 0x6b206574;
    for (int i = 0; i < 4; ++i) {
        state_[4 + 2 * i] = static_cast<u32>(seed.k[i]);
        state_[5 + 2 * i] = static_cast<u32>(seed.k[i] >> 32);
    }
    // words 12..13 = block counter, 14..15 = domain nonce
    state_[14] = static_cast<u32>(domain);
    state_[15] = static_cast<u32>(domain >> 32);
}

void Prf::refill() {
    state_[12] = static_cast<u32>(counter_);
    state_[13] = static_cast<u32>(counter_ >> 32);
    ++counter_;
    std::array<u32, 16> out;
    chacha_block(state_, out);
    for (int i = 0; i < 8; ++i)
        buf_[i] = static_cast<u64>(out[2 * i]) | (static_cast<u64>(out[2 * i + 1]) << 32);
    pos_ = 0;
}

u64 Prf::next_u64() {
    if (pos_ >= 8) refill();
    return buf_[pos_++];
}

u64 Prf::next_bits(u32 bits) {
    if (bits == 0) return 0;
    u64 mask = bits >= 64 ? ~0ULL : ((1ULL << bits) - 1ULL);
    return next_u64() & mask;
}

RingTensor Prf::tensor(const Shape& shape, const Ring& rg) {
    RingTensor t(shape);
    for (auto& v : t.data) v = next_u64() & rg.mask;
    return t;
}

RingTensor Prf::tensor_bits(const Shape& shape, u32 bits) {
    RingTensor t(shape);
    for (auto& v : t.data) v = next_bits(bits);
    return t;
}

Seed256 Seed256::derive(u64 tag) const {
    Prf prf(*this, domain::make(domain::kSubSeed, static_cast<u32>(tag), static_cast<u8>(tag >> 32)));
    Seed256 out;
    for (auto& w : out.k) w = prf.next_u64();
    return out;
}

SeedSet SeedSet::from_master(const Seed256& master) {
    SeedSet s;
    s.p12 = master.derive(1);
    s.p13 = master.derive(2);
    s.p23 = master.derive(3);
    s.dealer = master.derive(4);
    return s;
}

Seed256 make_master_seed(u64 value) {
    Seed256 s;
    s.k = {value, 0x9e3779b97f4a7c15ULL ^ value, 0xbf58476d1ce4e5b9ULL, 0x94d049bb133111ebULL + value};
    return s;
}

Seed256 resolve_master_seed(bool has_flag, u64 flag_value) {
    if (has_flag) return make_master_seed(flag_value);
    if (const char* env = std::getenv("LRMPC_SEED"))
        return make_master_seed(std::strtoull(env, nullptr, 0));
    return make_master_seed(kDefaultSeed);
}

} // namespace lrmpc
