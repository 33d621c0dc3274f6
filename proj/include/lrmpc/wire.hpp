#pragma once

#include <optional>
#include <vector>

#include "lrmpc/tensor.hpp"

namespace lrmpc {

// Online message kinds. E/Urev are the Beaver openings, Vmsg/Wmsg the trio
// cross messages, SOpen the truncation opening, Debug the insecure reveal,
// Remask the trio truncation re-share exchange.
enum class MsgKind : u8 {
    E = 1,
    Urev = 2,
    Vmsg = 3,
    Wmsg = 4,
    SOpen = 5,
    Debug = 6,
    Remask = 7,
};

const char* msg_kind_name(MsgKind k);

// One tensor-valued protocol message. slot identifies the protocol op
// instance (carried in the frame's layer-id field). round_tag rides along
// in-process only (never serialized): it carries the sender's blocking-chain
// position so receivers can count rounds without touching the wire format.
struct Message {
    u32 session = 0;
    u32 slot = 0;
    MsgKind kind = MsgKind::E;
    std::vector<u64> payload;
    u64 round_tag = 0;
    bool tagged = false;

    std::size_t payload_bytes() const { return payload.size() * 8; }
};

u32 crc32(const u8* data, std::size_t n);

// Frame layout, all little endian:
//   u32 session | u32 layer (op slot) | u8 kind | u32 element count |
//   count x u64 payload | u32 crc32 over the payload bytes
std::vector<u8> encode_frame(const Message& m);
// Parses one frame from the front of `buf`; returns nullopt if incomplete.
// Throws on checksum mismatch.
std::optional<Message> decode_frame(const std::vector<u8>& buf, std::size_t& consumed);

constexpr std::size_t kFrameHeaderBytes = 4 + 4 + 1 + 4;
constexpr std::size_t kFrameTrailerBytes = 4;

} // namespace lrmpc
