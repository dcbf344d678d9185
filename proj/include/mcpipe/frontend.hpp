#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>

#include "mcpipe/pipeline.hpp"

namespace mcpipe {

// Standard memcached UDP frame: four big-endian 16-bit fields. Requests
// and responses must fit one datagram each; multi-datagram traffic is
// unsupported and dropped on ingest.
struct UdpFrameHeader {
    std::uint16_t request_id = 0;
    std::uint16_t sequence = 0;
    std::uint16_t total_datagrams = 1;
    std::uint16_t reserved = 0;
};

inline constexpr std::size_t kUdpFrameBytes = 8;

inline void encode_udp_frame(const UdpFrameHeader& h, std::uint8_t* out) {
    out[0] = static_cast<std::uint8_t>(h.request_id >> 8);
    out[1] = static_cast<std::uint8_t>(h.request_id);
    out[2] = static_cast<std::uint8_t>(h.sequence >> 8);
    out[3] = static_cast<std::uint8_t>(h.sequence);
    out[4] = static_cast<std::uint8_t>(h.total_datagrams >> 8);
    out[5] = static_cast<std::uint8_t>(h.total_datagrams);
    out[6] = static_cast<std::uint8_t>(h.reserved >> 8);
    out[7] = static_cast<std::uint8_t>(h.reserved);
}

inline UdpFrameHeader decode_udp_frame(const std::uint8_t* in) {
    UdpFrameHeader h;
    h.request_id = static_cast<std::uint16_t>(in[0] << 8 | in[1]);
    h.sequence = static_cast<std::uint16_t>(in[2] << 8 | in[3]);
    h.total_datagrams = static_cast<std::uint16_t>(in[4] << 8 | in[5]);
    h.reserved = static_cast<std::uint16_t>(in[6] << 8 | in[7]);
    return h;
}

struct ServerConfig {
    std::string listen_address = "0.0.0.0";
    std::uint16_t tcp_port = 11211;  // 0 binds an ephemeral port
    std::uint16_t udp_port = 11211;
    PipelineConfig pipeline;
    bool threaded_pipeline = true;  // false: the event loop pumps the stages itself
    std::size_t udp_max_response = 1400;  // larger responses become an error reply
};

struct ServerStats {
    std::uint64_t connections_accepted = 0;
    std::uint64_t requests_in = 0;
    std::uint64_t responses_out = 0;
    std::uint64_t udp_dropped = 0;
    std::uint64_t framing_failures = 0;
};

// TCP/UDP front-end around one pipeline. A single event-loop thread owns
// all sockets, frames request bytes into word-stream messages, feeds them
// to the parser one message at a time, and routes responses back by the
// order-preserving tag queue. On pipeline backpressure TCP reads pause;
// UDP datagrams are dropped.
class Server {
public:
    explicit Server(ServerConfig cfg);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    void start();
    void stop();

    std::uint16_t tcp_port() const;
    std::uint16_t udp_port() const;
    ServerStats stats() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace mcpipe
