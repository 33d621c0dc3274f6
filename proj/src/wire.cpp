#include "lrmpc/wire.hpp"

#include <array>
#include <stdexcept>

namespace lrmpc {

const char* msg_kind_name(MsgKind k) {
    switch (k) {
    case MsgKind::E: return "E";
    case MsgKind::Urev: return "Urev";
    case MsgKind::Vmsg: return "Vmsg";
    case MsgKind::Wmsg: return "Wmsg";
    case MsgKind::SOpen: return "SOpen";
    case MsgKind::Debug: return "Debug";
    case MsgKind::Remask: return "Remask";
    }
    return "?";
}

namespace {

std::array<u32, 256> make_crc_table() {
    std::array<u32, 256> t{};
    for (u32 i = 0; i < 256; ++i) {
        u32 c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        t[i] = c;
    }
    return t;
}

void put_u32(std::vector<u8>& out, u32 v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<u8>(v >> (8 * i)));
}
u32 get_u32(const u8* p) {
    u32 v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<u32>(p[i]) << (8 * i);
    return v;
}

} // namespace

u32 crc32(const u8* data, std::size_t n) {
    static const auto table = make_crc_table();
    u32 c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

std::vector<u8> encode_frame(const Message& m) {
    std::vector<u8> out;
    out.reserve(kFrameHeaderBytes + m.payload.size() * 8 + kFrameTrailerBytes);
    put_u32(out, m.session);
    put_u32(out, m.slot);
    out.push_back(static_cast<u8>(m.kind));
    put_u32(out, static_cast<u32>(m.payload.size()));
    for (u64 v : m.payload)
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<u8>(v >> (8 * i)));
    u32 crc = crc32(out.data() + kFrameHeaderBytes, m.payload.size() * 8);
    put_u32(out, crc);
    return out;
}

std::optional<Message> decode_frame(const std::vector<u8>& buf, std::size_t& consumed) {
    if (buf.size() < kFrameHeaderBytes) return std::nullopt;
    u32 count = get_u32(buf.data() + 9);
    std::size_t total = kFrameHeaderBytes + static_cast<std::size_t>(count) * 8 + kFrameTrailerBytes;
    if (buf.size() < total) return std::nullopt;

    Message m;
    m.session = get_u32(buf.data());
    m.slot = get_u32(buf.data() + 4);
    m.kind = static_cast<MsgKind>(buf[8]);
    m.payload.resize(count);
    const u8* p = buf.data() + kFrameHeaderBytes;
    for (u32 i = 0; i < count; ++i) {
        u64 v = 0;
        for (int k = 0; k < 8; ++k) v |= static_cast<u64>(p[8 * i + k]) << (8 * k);
        m.payload[i] = v;
    }
    u32 want = get_u32(buf.data() + total - 4);
    u32 got = crc32(p, static_cast<std::size_t>(count) * 8);
    if (want != got) throw std::runtime_error("wire frame checksum mismatch");
    consumed = total;
    return m;
}

} // namespace lrmpc
