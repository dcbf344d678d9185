#include "mcpipe/frontend.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <cstring>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mcpipe/binary_protocol.hpp"

namespace mcpipe {

namespace {

void set_nonblocking(int fd) {
    const int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

constexpr std::size_t kFrameNeedMore = 0;
constexpr std::size_t kFrameFatal = static_cast<std::size_t>(-1);

}  // namespace

struct Server::Impl {
    explicit Impl(ServerConfig cfg) : cfg(cfg), pipeline(cfg.pipeline) {
        // largest frameable request plus slack for the next one behind it
        max_frame_bytes = binproto::kHeaderBytes + 8 + kMaxKeyLength + cfg.pipeline.max_value + 2;
        inbuf_limit = max_frame_bytes + 4096;
    }

    ServerConfig cfg;
    Pipeline pipeline;
    std::size_t max_frame_bytes;
    std::size_t inbuf_limit;

    int listen_fd = -1;
    int udp_fd = -1;
    std::uint16_t bound_tcp_port = 0;
    std::uint16_t bound_udp_port = 0;

    struct Conn {
        int fd = -1;
        std::uint64_t id = 0;
        std::vector<std::uint8_t> inbuf;
        std::vector<std::uint8_t> outbuf;
        std::uint32_t pending = 0;       // responses owed to this connection
        bool stop_reading = false;       // framing failure: ignore further bytes
        bool read_closed = false;        // peer EOF: buffered requests still run
        bool close_after_flush = false;  // close once pending==0 and outbuf drained
        std::vector<std::uint8_t> deferred_error;  // sent right before such a close
        bool closing = false;
    };

    struct Tag {
        bool udp = false;
        std::uint64_t conn_id = 0;
        sockaddr_storage addr{};
        socklen_t addr_len = 0;
        std::uint16_t udp_request_id = 0;
    };

    std::map<std::uint64_t, Conn> conns;
    std::uint64_t next_conn_id = 1;
    std::uint64_t last_served = 0;
    std::deque<Tag> tags;

    // one in-flight message toward the parser; its words trickle in under
    // backpressure
    std::vector<StreamWord> ingress_words;
    std::size_t ingress_pos = 0;

    std::vector<StreamWord> egress_words;

    std::thread loop_thread;
    std::atomic<bool> stop_flag{false};

    std::atomic<std::uint64_t> stat_conns{0};
    std::atomic<std::uint64_t> stat_requests{0};
    std::atomic<std::uint64_t> stat_responses{0};
    std::atomic<std::uint64_t> stat_udp_dropped{0};
    std::atomic<std::uint64_t> stat_framing_failures{0};

    // ---- socket setup ----

    void open_sockets() {
        in_addr addr{};
        if (inet_pton(AF_INET, cfg.listen_address.c_str(), &addr) != 1)
            throw std::invalid_argument("listen_address");

        listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd < 0) throw std::runtime_error("tcp socket");
        int one = 1;
        setsockopt(listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in sa{};
        sa.sin_family = AF_INET;
        sa.sin_addr = addr;
        sa.sin_port = htons(cfg.tcp_port);
        if (bind(listen_fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0)
            throw std::runtime_error("tcp bind");
        if (listen(listen_fd, 128) != 0) throw std::runtime_error("tcp listen");
        set_nonblocking(listen_fd);
        socklen_t len = sizeof(sa);
        getsockname(listen_fd, reinterpret_cast<sockaddr*>(&sa), &len);
        bound_tcp_port = ntohs(sa.sin_port);

        udp_fd = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (udp_fd < 0) throw std::runtime_error("udp socket");
        sockaddr_in ua{};
        ua.sin_family = AF_INET;
        ua.sin_addr = addr;
        ua.sin_port = htons(cfg.udp_port);
        if (bind(udp_fd, reinterpret_cast<sockaddr*>(&ua), sizeof(ua)) != 0)
            throw std::runtime_error("udp bind");
        set_nonblocking(udp_fd);
        len = sizeof(ua);
        getsockname(udp_fd, reinterpret_cast<sockaddr*>(&ua), &len);
        bound_udp_port = ntohs(ua.sin_port);
    }

    void close_sockets() {
        if (listen_fd >= 0) ::close(listen_fd);
        if (udp_fd >= 0) ::close(udp_fd);
        for (auto& [id, c] : conns) ::close(c.fd);
        conns.clear();
        listen_fd = udp_fd = -1;
    }

    // ---- framing ----

    // Returns the byte length of the first complete request in the buffer,
    // kFrameNeedMore, or kFrameFatal for streams that cannot be re-synced.
    // inject_close marks a request that should be the connection's last.
    std::size_t try_frame(const std::vector<std::uint8_t>& buf, bool& inject_close) {
        inject_close = false;
        if (buf.empty()) return kFrameNeedMore;
        if (buf[0] == binproto::kMagicRequest) {
            if (buf.size() < binproto::kHeaderBytes) return kFrameNeedMore;
            const std::uint32_t total_body = binproto::get_u32be(&buf[8]);
            if (binproto::kHeaderBytes + total_body > max_frame_bytes) return kFrameFatal;
            const std::size_t total = binproto::kHeaderBytes + total_body;
            return buf.size() >= total ? total : kFrameNeedMore;
        }
        // ASCII: find the command line terminator
        const std::size_t scan_limit = std::min<std::size_t>(buf.size(), cfg.pipeline.max_ascii_line + 2);
        std::size_t eol = kFrameFatal;
        for (std::size_t i = 0; i + 1 < scan_limit; ++i) {
            if (buf[i] == '\r' && buf[i + 1] == '\n') {
                eol = i;
                break;
            }
        }
        if (eol == kFrameFatal) {
            return buf.size() > cfg.pipeline.max_ascii_line + 2 ? kFrameFatal : kFrameNeedMore;
        }
        const std::size_t line_end = eol + 2;
        // only "set" carries a body; everything else is the line itself
        if (eol >= 4 && std::tolower(buf[0]) == 's' && std::tolower(buf[1]) == 'e' &&
            std::tolower(buf[2]) == 't' && buf[3] == ' ') {
            std::size_t len_begin = eol;
            while (len_begin > 0 && buf[len_begin - 1] != ' ') --len_begin;
            std::uint64_t n = 0;
            bool ok = len_begin < eol && eol - len_begin <= 10;
            for (std::size_t i = len_begin; ok && i < eol; ++i) {
                if (buf[i] < '0' || buf[i] > '9') ok = false;
                else n = n * 10 + (buf[i] - '0');
            }
            if (!ok || n > cfg.pipeline.max_value) {
                // cannot locate the value body: hand the bare line to the
                // parser for the error response, then close
                inject_close = true;
                return line_end;
            }
            const std::size_t total = line_end + n + 2;
            return buf.size() >= total ? total : kFrameNeedMore;
        }
        return line_end;
    }

    std::vector<std::uint8_t> fatal_error_bytes(const std::vector<std::uint8_t>& buf) {
        if (!buf.empty() && buf[0] == binproto::kMagicRequest) {
            std::vector<std::uint8_t> out(binproto::kHeaderBytes, 0);
            out[0] = binproto::kMagicResponse;
            if (buf.size() > 1) out[1] = buf[1];
            binproto::put_u16be(&out[6], binproto::kStatusTooLarge);
            if (buf.size() >= 16) std::copy(buf.begin() + 12, buf.begin() + 16, out.begin() + 12);
            return out;
        }
        static const char* text = "CLIENT_ERROR bad request\r\n";
        return {reinterpret_cast<const std::uint8_t*>(text),
                reinterpret_cast<const std::uint8_t*>(text) + std::strlen(text)};
    }

    // ---- ingress ----

    bool ingress_busy() const { return ingress_pos < ingress_words.size(); }

    void pump_ingress() {
        while (ingress_pos < ingress_words.size() &&
               pipeline.ingress().try_write(ingress_words[ingress_pos])) {
            ++ingress_pos;
        }
        if (!ingress_busy() && !ingress_words.empty()) {
            ingress_words.clear();
            ingress_pos = 0;
        }
    }

    void begin_ingress(std::span<const std::uint8_t> request) {
        ingress_words = pack_message(request);
        ingress_pos = 0;
        stat_requests.fetch_add(1, std::memory_order_relaxed);
        pump_ingress();
    }

    // Serves one frame from one connection, rotating so a busy peer cannot
    // starve the rest. Returns false when no connection had a frame ready.
    bool serve_one_frame() {
        if (conns.empty()) return false;
        auto it = conns.upper_bound(last_served);
        for (std::size_t seen = 0; seen < conns.size(); ++seen) {
            if (it == conns.end()) it = conns.begin();
            Conn& c = it->second;
            const std::uint64_t id = it->first;
            ++it;
            if (c.stop_reading || c.closing || c.inbuf.empty()) continue;
            bool inject_close = false;
            const std::size_t n = try_frame(c.inbuf, inject_close);
            if (n == kFrameNeedMore) continue;
            last_served = id;
            if (n == kFrameFatal) {
                stat_framing_failures.fetch_add(1, std::memory_order_relaxed);
                c.stop_reading = true;
                c.close_after_flush = true;
                c.deferred_error = fatal_error_bytes(c.inbuf);
                c.inbuf.clear();
                if (c.pending == 0) finish_error_close(c);
                return true;
            }
            Tag tag;
            tag.udp = false;
            tag.conn_id = id;
            tags.push_back(tag);
            ++c.pending;
            if (inject_close) {
                stat_framing_failures.fetch_add(1, std::memory_order_relaxed);
                c.stop_reading = true;
                c.close_after_flush = true;
            }
            begin_ingress(std::span<const std::uint8_t>(c.inbuf.data(), n));
            c.inbuf.erase(c.inbuf.begin(), c.inbuf.begin() + static_cast<std::ptrdiff_t>(n));
            return true;
        }
        return false;
    }

    void pull_frames() {
        // keep extracting requests while the parser-facing slot is free
        while (!ingress_busy()) {
            if (!serve_one_frame()) break;
        }
        // EOF'd connections: once nothing frameable remains, the leftover is
        // a forever-incomplete request; discard it and close after the owed
        // responses drain.
        for (auto& [id, c] : conns) {
            if (!c.read_closed || c.close_after_flush || c.closing) continue;
            bool inject_close = false;
            if (c.inbuf.empty() || c.stop_reading || try_frame(c.inbuf, inject_close) == kFrameNeedMore) {
                c.inbuf.clear();
                c.stop_reading = true;
                c.close_after_flush = true;
                if (c.pending == 0) finish_error_close(c);
            }
        }
    }

    void ingest_udp_datagram(std::span<const std::uint8_t> datagram, const sockaddr_storage& from,
                             socklen_t from_len) {
        if (datagram.size() < kUdpFrameBytes + 1) {
            stat_udp_dropped.fetch_add(1, std::memory_order_relaxed);
            return;
        }
        const UdpFrameHeader h = decode_udp_frame(datagram.data());
        if (h.total_datagrams != 1) {
            stat_udp_dropped.fetch_add(1, std::memory_order_relaxed);
            return;
        }
        if (ingress_busy()) {  // pipeline backpressure: UDP is droppable
            stat_udp_dropped.fetch_add(1, std::memory_order_relaxed);
            return;
        }
        Tag tag;
        tag.udp = true;
        tag.addr = from;
        tag.addr_len = from_len;
        tag.udp_request_id = h.request_id;
        tags.push_back(tag);
        begin_ingress(datagram.subspan(kUdpFrameBytes));
    }

    // ---- egress ----

    void pump_egress() {
        while (auto w = pipeline.egress().try_read()) {
            egress_words.push_back(*w);
            if (!w->last) continue;
            std::vector<std::uint8_t> bytes = unpack_message(egress_words);
            egress_words.clear();
            if (tags.empty()) throw std::logic_error("response without a pending tag");
            Tag tag = tags.front();
            tags.pop_front();
            stat_responses.fetch_add(1, std::memory_order_relaxed);
            if (tag.udp) {
                send_udp_response(tag, bytes);
            } else {
                route_tcp_response(tag.conn_id, bytes);
            }
        }
    }

    void send_udp_response(const Tag& tag, std::vector<std::uint8_t>& bytes) {
        if (kUdpFrameBytes + bytes.size() > cfg.udp_max_response) {
            bytes = udp_oversize_error(bytes);
        }
        std::vector<std::uint8_t> datagram(kUdpFrameBytes + bytes.size());
        UdpFrameHeader h;
        h.request_id = tag.udp_request_id;
        encode_udp_frame(h, datagram.data());
        std::copy(bytes.begin(), bytes.end(), datagram.begin() + kUdpFrameBytes);
        sendto(udp_fd, datagram.data(), datagram.size(), 0,
               reinterpret_cast<const sockaddr*>(&tag.addr), tag.addr_len);
    }

    std::vector<std::uint8_t> udp_oversize_error(const std::vector<std::uint8_t>& response) {
        if (!response.empty() && response[0] == binproto::kMagicResponse) {
            std::vector<std::uint8_t> out(binproto::kHeaderBytes, 0);
            out[0] = binproto::kMagicResponse;
            out[1] = response[1];
            binproto::put_u16be(&out[6], binproto::kStatusTooLarge);
            std::copy(response.begin() + 12, response.begin() + 16, out.begin() + 12);
            return out;
        }
        static const char* text = "SERVER_ERROR object too large for udp\r\n";
        return {reinterpret_cast<const std::uint8_t*>(text),
                reinterpret_cast<const std::uint8_t*>(text) + std::strlen(text)};
    }

    void route_tcp_response(std::uint64_t conn_id, const std::vector<std::uint8_t>& bytes) {
        auto it = conns.find(conn_id);
        if (it == conns.end()) return;  // connection died, drop the response
        Conn& c = it->second;
        c.outbuf.insert(c.outbuf.end(), bytes.begin(), bytes.end());
        if (c.pending > 0) --c.pending;
        if (c.pending == 0 && c.close_after_flush) finish_error_close(c);
        flush_conn(c);
    }

    void finish_error_close(Conn& c) {
        if (!c.deferred_error.empty()) {
            c.outbuf.insert(c.outbuf.end(), c.deferred_error.begin(), c.deferred_error.end());
            c.deferred_error.clear();
        }
        c.closing = true;
    }

    void flush_conn(Conn& c) {
        if (c.fd < 0) {
            c.outbuf.clear();
            return;
        }
        while (!c.outbuf.empty()) {
            const ssize_t n = send(c.fd, c.outbuf.data(), c.outbuf.size(), MSG_NOSIGNAL);
            if (n > 0) {
                c.outbuf.erase(c.outbuf.begin(), c.outbuf.begin() + n);
                continue;
            }
            if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) break;
            drop_conn(c);  // peer is gone, discard the rest
            break;
        }
    }

    // ---- event loop ----

    void loop() {
        std::vector<pollfd> pfds;
        std::vector<std::uint64_t> pfd_conn;
        while (!stop_flag.load(std::memory_order_relaxed)) {
            if (!cfg.threaded_pipeline) {
                for (int i = 0; i < 256 && pipeline.pump(); ++i) {
                }
            }
            pump_ingress();
            pull_frames();
            pump_egress();
            reap_closed();

            pfds.clear();
            pfd_conn.clear();
            pfds.push_back({listen_fd, POLLIN, 0});
            pfd_conn.push_back(0);
            pfds.push_back({udp_fd, POLLIN, 0});
            pfd_conn.push_back(0);
            for (auto& [id, c] : conns) {
                short events = 0;
                if (!c.stop_reading && !c.read_closed && !c.closing && c.inbuf.size() < inbuf_limit)
                    events |= POLLIN;
                if (!c.outbuf.empty()) events |= POLLOUT;
                if (events == 0) continue;
                pfds.push_back({c.fd, events, 0});
                pfd_conn.push_back(id);
            }

            const bool busy = ingress_busy() || !tags.empty();
            poll(pfds.data(), pfds.size(), busy ? 0 : 1);

            for (std::size_t i = 0; i < pfds.size(); ++i) {
                if (pfds[i].revents == 0) continue;
                if (pfds[i].fd == listen_fd) {
                    accept_new();
                } else if (pfds[i].fd == udp_fd) {
                    read_udp();
                } else {
                    handle_conn_event(pfd_conn[i], pfds[i].revents);
                }
            }
        }
    }

    void accept_new() {
        for (;;) {
            const int fd = accept(listen_fd, nullptr, nullptr);
            if (fd < 0) break;
            set_nonblocking(fd);
            int one = 1;
            setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
            Conn c;
            c.fd = fd;
            c.id = next_conn_id++;
            stat_conns.fetch_add(1, std::memory_order_relaxed);
            conns.emplace(c.id, std::move(c));
        }
    }

    void read_udp() {
        std::uint8_t buf[65536];
        for (int i = 0; i < 16; ++i) {
            sockaddr_storage from{};
            socklen_t from_len = sizeof(from);
            const ssize_t n =
                recvfrom(udp_fd, buf, sizeof(buf), 0, reinterpret_cast<sockaddr*>(&from), &from_len);
            if (n <= 0) break;
            ingest_udp_datagram({buf, static_cast<std::size_t>(n)}, from, from_len);
        }
    }

    void handle_conn_event(std::uint64_t id, short revents) {
        auto it = conns.find(id);
        if (it == conns.end()) return;
        Conn& c = it->second;
        if (revents & (POLLERR | POLLHUP)) {
            drop_conn(c);
            return;
        }
        if (revents & POLLIN) {
            std::uint8_t buf[16384];
            for (;;) {
                const ssize_t n = recv(c.fd, buf, sizeof(buf), 0);
                if (n == 0) {
                    // half-close: finish what was already received
                    c.read_closed = true;
                    break;
                }
                if (n < 0) {
                    if (errno != EAGAIN && errno != EWOULDBLOCK) drop_conn(c);
                    break;
                }
                c.inbuf.insert(c.inbuf.end(), buf, buf + n);
                if (c.inbuf.size() >= inbuf_limit) break;
            }
        }
        if (revents & POLLOUT) flush_conn(c);
    }

    void drop_conn(Conn& c) {
        // responses still in flight for this connection are discarded at
        // egress when the id no longer resolves
        ::close(c.fd);
        c.fd = -1;
        c.closing = true;
        c.outbuf.clear();
        c.pending = 0;
    }

    void reap_closed() {
        for (auto it = conns.begin(); it != conns.end();) {
            Conn& c = it->second;
            if (c.closing && (c.fd < 0 || (c.outbuf.empty() && c.pending == 0))) {
                if (c.fd >= 0) ::close(c.fd);
                it = conns.erase(it);
            } else {
                ++it;
            }
        }
    }
};

Server::Server(ServerConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

Server::~Server() { stop(); }

void Server::start() {
    impl_->open_sockets();
    if (impl_->cfg.threaded_pipeline) impl_->pipeline.start();
    impl_->stop_flag.store(false);
    impl_->loop_thread = std::thread([this] { impl_->loop(); });
}

void Server::stop() {
    if (!impl_->loop_thread.joinable()) return;
    impl_->stop_flag.store(true);
    impl_->loop_thread.join();
    impl_->pipeline.stop();
    impl_->close_sockets();
}

std::uint16_t Server::tcp_port() const { return impl_->bound_tcp_port; }
std::uint16_t Server::udp_port() const { return impl_->bound_udp_port; }

ServerStats Server::stats() const {
    ServerStats s;
    s.connections_accepted = impl_->stat_conns.load();
    s.requests_in = impl_->stat_requests.load();
    s.responses_out = impl_->stat_responses.load();
    s.udp_dropped = impl_->stat_udp_dropped.load();
    s.framing_failures = impl_->stat_framing_failures.load();
    return s;
}

}  // namespace mcpipe
