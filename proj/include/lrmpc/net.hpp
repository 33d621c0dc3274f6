#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "lrmpc/wire.hpp"

namespace lrmpc {

// One-way latency plus linear bandwidth term. Presets follow the evaluated
// setups: lan 10 Gbps low-latency, man 5 Gbps / 5 ms RTT, wan 5 Gbps / 35 ms RTT.
struct NetworkProfile {
    std::string name = "custom";
    double latency_ms = 0.0;      // one-way
    double bandwidth_gbps = 1.0;  // per directed channel

    static NetworkProfile lan();
    static NetworkProfile man();
    static NetworkProfile wan();
    static NetworkProfile zero();  // zero latency, effectively infinite bandwidth
    static NetworkProfile by_name(const std::string& name);
};

// latency + bytes*8/bandwidth, in milliseconds.
double deliver_time_ms(std::size_t bytes, const NetworkProfile& p);

enum class Topology { FullMesh, TrioChain };

// Channels allowed by the topology. Trio online channels are P2<->P3 only;
// P1->P2 and P1->P3 exist for the offline phase. party 0 is the dealer,
// which may reach everyone.
bool channel_allowed(Topology topo, u32 from, u32 to, bool offline = false);
std::size_t directed_channel_count(Topology topo, u32 n);

// Per-party view of the network. send is non-blocking (enqueue and return);
// recv blocks until the next frame on the channel arrives. FIFO per channel,
// nothing is assumed across channels. Byte counters track payload bytes.
class Transport {
public:
    virtual ~Transport() = default;
    virtual void send(u32 dst, Message m) = 0;
    virtual Message recv(u32 src) = 0;
    virtual std::optional<Message> try_recv(u32 src) = 0;
    virtual u32 self() const = 0;

    u64 bytes_sent_to(u32 dst) const;
    const std::map<u32, u64>& bytes_by_peer() const { return sent_bytes_; }

protected:
    void count_sent(u32 dst, std::size_t payload_bytes) { sent_bytes_[dst] += payload_bytes; }
    std::map<u32, u64> sent_bytes_;
};

// In-process hub: shared FIFO queues between party threads.
class LocalHub {
public:
    LocalHub(u32 parties, Topology topo, u32 session);

    std::unique_ptr<Transport> transport(u32 party);
    u32 session() const { return session_; }

    // true when some queue is non-empty (lockstep driver progress check)
    bool messages_in_flight() const;

    struct Channel {
        std::mutex m;
        std::condition_variable cv;
        std::deque<Message> q;
    };
    Channel& channel(u32 from, u32 to);

private:
    u32 parties_;
    Topology topo_;
    u32 session_;
    std::vector<std::unique_ptr<Channel>> chans_;
};

// TCP transport with the same framing. Party i listens for connections from
// lower-numbered peers and dials higher-numbered ones. A writer thread per
// peer keeps send() non-blocking.
struct Endpoint {
    u32 party;
    std::string host;
    int port;
};

class SocketTransport : public Transport {
public:
    SocketTransport(u32 self, const std::vector<Endpoint>& peers, Topology topo, u32 session,
                    bool dealer_channels = false);
    ~SocketTransport() override;

    void send(u32 dst, Message m) override;
    Message recv(u32 src) override;
    std::optional<Message> try_recv(u32 src) override;
    u32 self() const override { return self_; }

private:
    struct Peer;
    Peer& peer(u32 id);
    Message read_frame(Peer& p);

    u32 self_;
    Topology topo_;
    u32 session_;
    std::map<u32, std::unique_ptr<Peer>> peers_;
};

} // namespace lrmpc
