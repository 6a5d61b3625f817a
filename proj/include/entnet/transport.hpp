#pragma once

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "entnet/errors.hpp"

// Message passing between protocol parties. Two interchangeable backends:
// an in-process hub of FIFO queues and a loopback TCP full mesh speaking
// length-prefixed frames.
namespace entnet::transport {

inline constexpr std::chrono::milliseconds kDefaultTimeout{5000};
inline constexpr std::size_t kMaxFrameBytes = 1 << 20;

// ---------------------------------------------------------------------------
// Messages and wire format
// ---------------------------------------------------------------------------

struct Message {
    std::string session;
    int round = 0;
    std::string sender;
    std::string kind;
    std::map<std::string, std::string> fields;

    bool operator==(const Message&) const = default;
};

inline bool known_kind(const std::string& kind) {
    return kind == "ANNOUNCE" || kind == "KEY_SYNC" || kind == "CONTROL";
}

// Payload text: fixed header lines, then any extra fields in sorted order.
inline std::string encode_payload(const Message& m) {
    std::string out;
    out += "session=" + m.session + "\n";
    out += "round=" + std::to_string(m.round) + "\n";
    out += "sender=" + m.sender + "\n";
    out += "kind=" + m.kind + "\n";
    for (const auto& [k, v] : m.fields) out += k + "=" + v + "\n";
    return out;
}

inline Message decode_payload(const std::string& payload) {
    Message m;
    std::size_t pos = 0;
    int header = 0;
    while (pos < payload.size()) {
        auto nl = payload.find('\n', pos);
        if (nl == std::string::npos) nl = payload.size();
        const std::string line = payload.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw protocol_violation_error("payload line without '=': " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        switch (header) {
            case 0:
                if (key != "session") throw protocol_violation_error("payload must open with session");
                m.session = value;
                break;
            case 1: {
                if (key != "round") throw protocol_violation_error("payload round line missing");
                try {
                    std::size_t used = 0;
                    m.round = std::stoi(value, &used);
                    if (used != value.size() || m.round < 0) throw std::invalid_argument(value);
                } catch (const std::exception&) {
                    throw protocol_violation_error("bad round '" + value + "'");
                }
                break;
            }
            case 2:
                if (key != "sender") throw protocol_violation_error("payload sender line missing");
                m.sender = value;
                break;
            case 3:
                if (key != "kind") throw protocol_violation_error("payload kind line missing");
                m.kind = value;
                break;
            default:
                if (m.fields.count(key))
                    throw protocol_violation_error("duplicate payload field '" + key + "'");
                m.fields[key] = value;
                break;
        }
        ++header;
    }
    if (header < 4) throw protocol_violation_error("payload shorter than its header");
    if (!known_kind(m.kind)) throw protocol_violation_error("unknown message kind '" + m.kind + "'");
    return m;
}

inline std::uint64_t message_x(const Message& m) {
    const auto it = m.fields.find("x");
    if (it == m.fields.end()) throw protocol_violation_error("message lacks field x");
    try {
        std::size_t used = 0;
        const std::uint64_t x = std::stoull(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(it->second);
        return x;
    } catch (const std::exception&) {
        throw protocol_violation_error("bad x value '" + it->second + "'");
    }
}

// ---------------------------------------------------------------------------
// Endpoint interface
// ---------------------------------------------------------------------------

class Endpoint {
public:
    virtual ~Endpoint() = default;
    virtual const std::string& self() const = 0;
    virtual const std::vector<std::string>& members() const = 0;
    virtual void send(const std::string& to, const Message& m) = 0;
    virtual Message recv(std::chrono::milliseconds timeout = kDefaultTimeout) = 0;
    virtual void close() = 0;

    void broadcast(const Message& m) {
        for (const auto& peer : members())
            if (peer != self()) send(peer, m);
    }
};

// ---------------------------------------------------------------------------
// In-process backend
// ---------------------------------------------------------------------------

// Shared queue fabric. Each endpoint drains its own per-sender FIFOs; when
// several senders have mail, the earliest member in ring order wins, so a
// single-threaded exchange replays identically.
class InProcessHub {
public:
    explicit InProcessHub(std::vector<std::string> members) : members_(std::move(members)) {
        if (members_.size() < 2) throw domain_error("hub needs at least two members");
        for (const auto& m : members_)
            for (const auto& peer : members_)
                if (m != peer) queues_[{m, peer}];
        for (const auto& m : members_) open_[m] = true;
    }

    const std::vector<std::string>& members() const { return members_; }

    void send(const std::string& from, const std::string& to, const Message& m) {
        if (!known_kind(m.kind))
            throw protocol_violation_error("unknown message kind '" + m.kind + "'");
        std::unique_lock lock(mu_);
        if (!open_.count(to)) throw protocol_violation_error("unknown recipient '" + to + "'");
        if (!open_.at(from)) throw channel_closed_error("send from closed endpoint");
        if (!open_.at(to)) throw channel_closed_error("send to closed endpoint '" + to + "'");
        queues_.at({to, from}).push_back(m);
        cv_.notify_all();
    }

    Message recv(const std::string& to, std::chrono::milliseconds timeout) {
        std::unique_lock lock(mu_);
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        for (;;) {
            if (!open_.at(to)) throw channel_closed_error("recv on closed endpoint");
            for (const auto& from : members_) {
                if (from == to) continue;
                auto& q = queues_.at({to, from});
                if (!q.empty()) {
                    Message m = q.front();
                    q.pop_front();
                    return m;
                }
            }
            if (cv_.wait_until(lock, deadline) == std::cv_status::timeout)
                throw io_error("recv timeout for '" + to + "'");
        }
    }

    void close(const std::string& who) {
        std::unique_lock lock(mu_);
        open_.at(who) = false;
        cv_.notify_all();
    }

private:
    std::vector<std::string> members_;
    std::map<std::pair<std::string, std::string>, std::deque<Message>> queues_;  // (to, from)
    std::map<std::string, bool> open_;
    std::mutex mu_;
    std::condition_variable cv_;
};

class InProcessEndpoint final : public Endpoint {
public:
    InProcessEndpoint(std::shared_ptr<InProcessHub> hub, std::string self)
        : hub_(std::move(hub)), self_(std::move(self)) {}
    ~InProcessEndpoint() override { close(); }

    const std::string& self() const override { return self_; }
    const std::vector<std::string>& members() const override { return hub_->members(); }
    void send(const std::string& to, const Message& m) override { hub_->send(self_, to, m); }
    Message recv(std::chrono::milliseconds timeout) override { return hub_->recv(self_, timeout); }
    void close() override {
        if (!closed_) {
            closed_ = true;
            hub_->close(self_);
        }
    }

private:
    std::shared_ptr<InProcessHub> hub_;
    std::string self_;
    bool closed_ = false;
};

inline std::vector<std::unique_ptr<Endpoint>> make_inprocess_mesh(
    const std::vector<std::string>& members) {
    auto hub = std::make_shared<InProcessHub>(members);
    std::vector<std::unique_ptr<Endpoint>> out;
    out.reserve(members.size());
    for (const auto& m : members) out.push_back(std::make_unique<InProcessEndpoint>(hub, m));
    return out;
}

// ---------------------------------------------------------------------------
// Loopback TCP backend
// ---------------------------------------------------------------------------

namespace detail {

class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(Fd&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    Fd& operator=(Fd&& o) noexcept {
        reset();
        std::swap(fd_, o.fd_);
        return *this;
    }
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }

    int get() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    void reset() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_ = -1;
};

inline void write_all(int fd, const void* data, std::size_t len) {
    const char* p = static_cast<const char*>(data);
    while (len > 0) {
        const ssize_t w = ::send(fd, p, len, 0);
        if (w < 0) {
            if (errno == EINTR) continue;
            throw channel_closed_error(std::string("send failed: ") + std::strerror(errno));
        }
        p += w;
        len -= static_cast<std::size_t>(w);
    }
}

inline void read_all(int fd, void* data, std::size_t len) {
    char* p = static_cast<char*>(data);
    while (len > 0) {
        const ssize_t r = ::recv(fd, p, len, 0);
        if (r < 0) {
            if (errno == EINTR) continue;
            throw channel_closed_error(std::string("recv failed: ") + std::strerror(errno));
        }
        if (r == 0) throw channel_closed_error("peer closed the connection");
        p += r;
        len -= static_cast<std::size_t>(r);
    }
}

}  // namespace detail

// Frame: 4-byte big-endian payload length, then the payload bytes.
inline void write_frame(int fd, const std::string& payload) {
    if (payload.size() > kMaxFrameBytes) throw protocol_violation_error("frame too large");
    unsigned char hdr[4];
    const auto n = static_cast<std::uint32_t>(payload.size());
    hdr[0] = static_cast<unsigned char>(n >> 24);
    hdr[1] = static_cast<unsigned char>(n >> 16);
    hdr[2] = static_cast<unsigned char>(n >> 8);
    hdr[3] = static_cast<unsigned char>(n);
    detail::write_all(fd, hdr, 4);
    detail::write_all(fd, payload.data(), payload.size());
}

inline std::string read_frame(int fd) {
    unsigned char hdr[4];
    detail::read_all(fd, hdr, 4);
    const std::uint32_t n = (static_cast<std::uint32_t>(hdr[0]) << 24) |
                            (static_cast<std::uint32_t>(hdr[1]) << 16) |
                            (static_cast<std::uint32_t>(hdr[2]) << 8) |
                            static_cast<std::uint32_t>(hdr[3]);
    if (n > kMaxFrameBytes) throw protocol_violation_error("incoming frame too large");
    std::string payload(n, '\0');
    if (n > 0) detail::read_all(fd, payload.data(), n);
    return payload;
}

// One party's end of a full mesh of loopback TCP connections. recv polls all
// peer sockets and, when several are readable, serves the earliest member in
// ring order.
class SocketEndpoint final : public Endpoint {
public:
    SocketEndpoint(std::string self, std::vector<std::string> members,
                   std::map<std::string, detail::Fd> peers)
        : self_(std::move(self)), members_(std::move(members)), peers_(std::move(peers)) {
        for (const auto& m : members_)
            if (m != self_ && !peers_.count(m))
                throw protocol_violation_error("socket mesh missing peer '" + m + "'");
    }

    const std::string& self() const override { return self_; }
    const std::vector<std::string>& members() const override { return members_; }

    void send(const std::string& to, const Message& m) override {
        const auto it = peers_.find(to);
        if (it == peers_.end()) throw protocol_violation_error("unknown recipient '" + to + "'");
        if (!it->second.valid()) throw channel_closed_error("send on closed endpoint");
        write_frame(it->second.get(), encode_payload(m));
    }

    Message recv(std::chrono::milliseconds timeout) override {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        for (;;) {
            std::vector<pollfd> fds;
            for (const auto& m : members_) {
                if (m == self_) continue;
                const auto& fd = peers_.at(m);
                if (!fd.valid()) continue;
                fds.push_back({fd.get(), POLLIN, 0});
            }
            if (fds.empty()) throw channel_closed_error("recv with no open peers");
            const auto now = std::chrono::steady_clock::now();
            if (now >= deadline) throw io_error("recv timeout for '" + self_ + "'");
            const auto left =
                std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now);
            const int rc = ::poll(fds.data(), static_cast<nfds_t>(fds.size()),
                                  static_cast<int>(left.count()) + 1);
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw io_error(std::string("poll failed: ") + std::strerror(errno));
            }
            if (rc == 0) throw io_error("recv timeout for '" + self_ + "'");
            for (std::size_t i = 0; i < fds.size(); ++i)
                if (fds[i].revents & (POLLIN | POLLHUP | POLLERR))
                    return decode_payload(read_frame(fds[i].fd));
        }
    }

    void close() override {
        for (auto& [who, fd] : peers_) fd.reset();
    }

private:
    std::string self_;
    std::vector<std::string> members_;
    std::map<std::string, detail::Fd> peers_;
};

// Build the mesh inside one process: every party listens on an ephemeral
// loopback port, higher-indexed parties dial lower-indexed ones, and a hello
// frame names the dialing side.
inline std::vector<std::unique_ptr<Endpoint>> make_socket_mesh(
    const std::vector<std::string>& members) {
    const auto n = members.size();
    if (n < 2) throw domain_error("socket mesh needs at least two members");

    std::vector<detail::Fd> listeners;
    std::vector<std::uint16_t> ports(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        detail::Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
        if (!fd.valid()) throw io_error(std::string("socket failed: ") + std::strerror(errno));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = 0;
        if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
            throw io_error(std::string("bind failed: ") + std::strerror(errno));
        if (::listen(fd.get(), static_cast<int>(n)) != 0)
            throw io_error(std::string("listen failed: ") + std::strerror(errno));
        socklen_t len = sizeof addr;
        if (::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len) != 0)
            throw io_error(std::string("getsockname failed: ") + std::strerror(errno));
        ports[i] = ntohs(addr.sin_port);
        listeners.push_back(std::move(fd));
    }

    std::vector<std::map<std::string, detail::Fd>> peers(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            detail::Fd dial(::socket(AF_INET, SOCK_STREAM, 0));
            if (!dial.valid())
                throw io_error(std::string("socket failed: ") + std::strerror(errno));
            sockaddr_in addr{};
            addr.sin_family = AF_INET;
            addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
            addr.sin_port = htons(ports[i]);
            if (::connect(dial.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
                throw io_error(std::string("connect failed: ") + std::strerror(errno));
            Message hello;
            hello.session = "mesh";
            hello.round = 0;
            hello.sender = members[j];
            hello.kind = "CONTROL";
            hello.fields["hello"] = "1";
            write_frame(dial.get(), encode_payload(hello));

            detail::Fd accepted(::accept(listeners[i].get(), nullptr, nullptr));
            if (!accepted.valid())
                throw io_error(std::string("accept failed: ") + std::strerror(errno));
            const Message got = decode_payload(read_frame(accepted.get()));
            if (got.kind != "CONTROL" || !got.fields.count("hello") || got.sender != members[j])
                throw protocol_violation_error("unexpected mesh hello from '" + got.sender + "'");

            peers[i].emplace(members[j], std::move(accepted));
            peers[j].emplace(members[i], std::move(dial));
        }
    }

    std::vector<std::unique_ptr<Endpoint>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(std::make_unique<SocketEndpoint>(members[i], members, std::move(peers[i])));
    return out;
}

}  // namespace entnet::transport
