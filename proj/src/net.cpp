#include "lrmpc/net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include "lrmpc/errors.hpp"

namespace lrmpc {

NetworkProfile NetworkProfile::lan() { return {"lan", 0.2, 10.0}; }
NetworkProfile NetworkProfile::man() { return {"man", 2.5, 5.0}; }
NetworkProfile NetworkProfile::wan() { return {"wan", 17.5, 5.0}; }
NetworkProfile NetworkProfile::zero() { return {"zero", 0.0, 1e12}; }

NetworkProfile NetworkProfile::by_name(const std::string& name) {
    if (name == "lan") return lan();
    if (name == "man") return man();
    if (name == "wan") return wan();
    if (name == "zero") return zero();
    throw std::invalid_argument("unknown network preset " + name);
}

double deliver_time_ms(std::size_t bytes, const NetworkProfile& p) {
    double bits = static_cast<double>(bytes) * 8.0;
    return p.latency_ms + bits / (p.bandwidth_gbps * 1e9) * 1e3;
}

bool channel_allowed(Topology topo, u32 from, u32 to, bool offline) {
    if (from == to) return false;
    if (from == 0 || to == 0) return offline;  // dealer channels
    if (topo == Topology::FullMesh) return true;
    // trio: P2<->P3 online; P1 may send to P2 and P3 offline only
    if ((from == 2 && to == 3) || (from == 3 && to == 2)) return true;
    if (offline && from == 1 && (to == 2 || to == 3)) return true;
    return false;
}

std::size_t directed_channel_count(Topology topo, u32 n) {
    if (topo == Topology::FullMesh) return static_cast<std::size_t>(n) * (n - 1);
    return 2;  // online trio channels
}

u64 Transport::bytes_sent_to(u32 dst) const {
    auto it = sent_bytes_.find(dst);
    return it == sent_bytes_.end() ? 0 : it->second;
}

// ---------------- LocalHub ----------------

LocalHub::LocalHub(u32 parties, Topology topo, u32 session)
    : parties_(parties), topo_(topo), session_(session) {
    // party ids 0..parties (0 = dealer)
    chans_.resize(static_cast<std::size_t>(parties_ + 1) * (parties_ + 1));
    for (auto& c : chans_) c = std::make_unique<Channel>();
}

LocalHub::Channel& LocalHub::channel(u32 from, u32 to) {
    return *chans_[from * (parties_ + 1) + to];
}

bool LocalHub::messages_in_flight() const {
    for (const auto& c : chans_) {
        std::lock_guard<std::mutex> lk(c->m);
        if (!c->q.empty()) return true;
    }
    return false;
}

namespace {

class LocalTransport : public Transport {
public:
    LocalTransport(LocalHub* hub, u32 self, Topology topo, u32 session)
        : hub_(hub), self_(self), topo_(topo), session_(session) {}

    void send(u32 dst, Message m) override {
        if (!channel_allowed(topo_, self_, dst, /*offline=*/self_ == 0 || dst == 0 || self_ == 1))
            throw TransportError("send on nonexistent channel " + std::to_string(self_) +
                                     "->" + std::to_string(dst));
        m.session = session_;
        count_sent(dst, m.payload_bytes());
        auto& ch = hub_->channel(self_, dst);
        {
            std::lock_guard<std::mutex> lk(ch.m);
            ch.q.push_back(std::move(m));
        }
        ch.cv.notify_all();
    }

    Message recv(u32 src) override {
        auto& ch = hub_->channel(src, self_);
        std::unique_lock<std::mutex> lk(ch.m);
        ch.cv.wait(lk, [&] { return !ch.q.empty(); });
        Message m = std::move(ch.q.front());
        ch.q.pop_front();
        check_session(m);
        return m;
    }

    std::optional<Message> try_recv(u32 src) override {
        auto& ch = hub_->channel(src, self_);
        std::lock_guard<std::mutex> lk(ch.m);
        if (ch.q.empty()) return std::nullopt;
        Message m = std::move(ch.q.front());
        ch.q.pop_front();
        check_session(m);
        return m;
    }

    u32 self() const override { return self_; }

private:
    void check_session(const Message& m) const {
        if (m.session != session_)
            throw TransportError("session id mismatch: expected " + std::to_string(session_) +
                                     ", got " + std::to_string(m.session));
    }

    LocalHub* hub_;
    u32 self_;
    Topology topo_;
    u32 session_;
};

} // namespace

std::unique_ptr<Transport> LocalHub::transport(u32 party) {
    return std::make_unique<LocalTransport>(this, party, topo_, session_);
}

// ---------------- SocketTransport ----------------

struct SocketTransport::Peer {
    int fd = -1;
    std::vector<u8> inbuf;
    // writer side
    std::thread writer;
    std::mutex m;
    std::condition_variable cv;
    std::deque<std::vector<u8>> outq;
    bool closing = false;

    ~Peer() {
        {
            std::lock_guard<std::mutex> lk(m);
            closing = true;
        }
        cv.notify_all();
        if (writer.joinable()) writer.join();
        if (fd >= 0) ::close(fd);
    }
};

namespace {

void write_all(int fd, const u8* data, std::size_t n) {
    std::size_t off = 0;
    while (off < n) {
        ssize_t w = ::write(fd, data + off, n - off);
        if (w <= 0) throw TransportError("socket write failed");
        off += static_cast<std::size_t>(w);
    }
}

int dial(const std::string& host, int port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw TransportError("bad address " + host);
    }
    // retry while the peer is still coming up
    for (int attempt = 0; attempt < 400; ++attempt) {
        if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
            return fd;
        }
        ::usleep(25 * 1000);
    }
    ::close(fd);
    throw TransportError("connection to " + host + ":" + std::to_string(port) + " timed out");
}

} // namespace

SocketTransport::SocketTransport(u32 self, const std::vector<Endpoint>& peers, Topology topo,
                                 u32 session, bool dealer_channels)
    : self_(self), topo_(topo), session_(session) {
    const Endpoint* mine = nullptr;
    for (const auto& ep : peers)
        if (ep.party == self) mine = &ep;
    if (!mine) throw TransportError("own endpoint missing from config");

    auto needs_channel = [&](u32 a, u32 b) {
        return channel_allowed(topo_, a, b, dealer_channels || a == 1 || b == 1 || a == 0 || b == 0);
    };

    // who do we talk to at all (either direction)
    std::vector<const Endpoint*> wanted;
    for (const auto& ep : peers) {
        if (ep.party == self) continue;
        if (needs_channel(self, ep.party) || needs_channel(ep.party, self)) wanted.push_back(&ep);
    }

    // accept from lower ids, dial higher ids
    std::size_t expect_accepts = 0;
    for (auto* ep : wanted)
        if (ep->party < self) ++expect_accepts;

    int listen_fd = -1;
    if (expect_accepts > 0) {
        listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
        int one = 1;
        ::setsockopt(listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
        addr.sin_port = htons(static_cast<uint16_t>(mine->port));
        if (::bind(listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
            ::listen(listen_fd, 8) != 0) {
            ::close(listen_fd);
            throw TransportError("cannot listen on port " + std::to_string(mine->port));
        }
    }

    for (auto* ep : wanted) {
        auto p = std::make_unique<Peer>();
        if (ep->party > self) {
            p->fd = dial(ep->host, ep->port);
            u32 hello[2] = {self_, session_};
            write_all(p->fd, reinterpret_cast<u8*>(hello), sizeof(hello));
        }
        peers_[ep->party] = std::move(p);
    }

    for (std::size_t i = 0; i < expect_accepts; ++i) {
        int fd = ::accept(listen_fd, nullptr, nullptr);
        if (fd < 0) {
            ::close(listen_fd);
            throw TransportError("accept failed");
        }
        try {
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
            u32 hello[2];
            std::size_t got = 0;
            while (got < sizeof(hello)) {
                ssize_t r = ::read(fd, reinterpret_cast<u8*>(hello) + got, sizeof(hello) - got);
                if (r <= 0) throw TransportError("handshake read failed");
                got += static_cast<std::size_t>(r);
            }
            if (hello[1] != session_)
                throw TransportError("session id mismatch on connect: expected " +
                                         std::to_string(session_) + ", got " +
                                         std::to_string(hello[1]));
            auto it = peers_.find(hello[0]);
            if (it == peers_.end()) throw TransportError("unexpected peer connected");
            it->second->fd = fd;
        } catch (...) {
            ::close(fd);
            ::close(listen_fd);
            throw;
        }
    }
    if (listen_fd >= 0) ::close(listen_fd);

    // one writer thread per peer keeps send() non-blocking
    for (auto& [id, p] : peers_) {
        Peer* raw = p.get();
        raw->writer = std::thread([raw] {
            for (;;) {
                std::vector<u8> frame;
                {
                    std::unique_lock<std::mutex> lk(raw->m);
                    raw->cv.wait(lk, [&] { return raw->closing || !raw->outq.empty(); });
                    if (raw->outq.empty()) return;
                    frame = std::move(raw->outq.front());
                    raw->outq.pop_front();
                }
                write_all(raw->fd, frame.data(), frame.size());
            }
        });
    }
}

SocketTransport::~SocketTransport() = default;

SocketTransport::Peer& SocketTransport::peer(u32 id) {
    auto it = peers_.find(id);
    if (it == peers_.end())
        throw TransportError("no channel to party " + std::to_string(id));
    return *it->second;
}

void SocketTransport::send(u32 dst, Message m) {
    if (!channel_allowed(topo_, self_, dst, /*offline=*/self_ == 1 || self_ == 0))
        throw TransportError("send on nonexistent channel " + std::to_string(self_) + "->" +
                                 std::to_string(dst));
    m.session = session_;
    count_sent(dst, m.payload_bytes());
    auto frame = encode_frame(m);
    Peer& p = peer(dst);
    {
        std::lock_guard<std::mutex> lk(p.m);
        p.outq.push_back(std::move(frame));
    }
    p.cv.notify_all();
}

Message SocketTransport::read_frame(Peer& p) {
    for (;;) {
        std::size_t consumed = 0;
        if (auto m = decode_frame(p.inbuf, consumed)) {
            p.inbuf.erase(p.inbuf.begin(), p.inbuf.begin() + static_cast<long>(consumed));
            if (m->session != session_)
                throw TransportError("session id mismatch: expected " +
                                         std::to_string(session_) + ", got " +
                                         std::to_string(m->session));
            return std::move(*m);
        }
        u8 tmp[65536];
        ssize_t r = ::read(p.fd, tmp, sizeof(tmp));
        if (r <= 0) throw TransportError("peer disconnected mid-stream");
        p.inbuf.insert(p.inbuf.end(), tmp, tmp + r);
    }
}

Message SocketTransport::recv(u32 src) { return read_frame(peer(src)); }

std::optional<Message> SocketTransport::try_recv(u32 src) {
    // Sockets are used with blocking party threads only.
    return recv(src);
}

} // namespace lrmpc
