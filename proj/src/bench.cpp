#include "mcpipe/bench.hpp"

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace mcpipe {

namespace {

std::uint64_t now_ns() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

std::uint64_t percentile(std::vector<std::uint64_t>& sorted, double q) {
    if (sorted.empty()) return 0;
    const std::size_t idx = static_cast<std::size_t>(std::max(
        0.0, std::ceil(q * static_cast<double>(sorted.size())) - 1.0));
    return sorted[std::min(idx, sorted.size() - 1)];
}

void fill_buckets(BenchReport& report) {
    std::map<std::pair<int, int>, std::vector<std::uint64_t>> lat;
    for (const LatencyRecord& r : report.records) {
        lat[{static_cast<int>(r.opcode), static_cast<int>(r.protocol)}].push_back(r.latency_ns());
    }
    for (auto& [key, values] : lat) {
        std::sort(values.begin(), values.end());
        OpBucketStats s;
        s.opcode = static_cast<Opcode>(key.first);
        s.protocol = static_cast<Protocol>(key.second);
        s.count = values.size();
        s.p50_ns = percentile(values, 0.50);
        s.p95_ns = percentile(values, 0.95);
        s.p99_ns = percentile(values, 0.99);
        double sum = 0;
        for (std::uint64_t v : values) sum += static_cast<double>(v);
        s.mean_ns = sum / static_cast<double>(values.size());
        report.buckets.push_back(s);
    }
}

void count_response(BenchReport& report, std::span<const std::uint8_t> response) {
    bool server_side = false;
    if (is_error_response(response, server_side)) {
        if (server_side) {
            ++report.server_error_responses;
        } else {
            ++report.client_error_responses;
        }
    }
}

// --- network client -------------------------------------------------------

struct ClientSocket {
    int fd = -1;

    bool connect_to(const std::string& host, std::uint16_t port) {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        const std::string port_str = std::to_string(port);
        if (getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res) != 0) return false;
        for (addrinfo* ai = res; ai; ai = ai->ai_next) {
            fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
            if (fd < 0) continue;
            if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
            ::close(fd);
            fd = -1;
        }
        freeaddrinfo(res);
        return fd >= 0;
    }

    bool send_all(std::span<const std::uint8_t> bytes) {
        std::size_t off = 0;
        while (off < bytes.size()) {
            const ssize_t n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
            if (n <= 0) return false;
            off += static_cast<std::size_t>(n);
        }
        return true;
    }

    ~ClientSocket() {
        if (fd >= 0) ::close(fd);
    }
};

// Frames exactly one response out of a buffered TCP stream.
class ResponseFramer {
public:
    // Returns the framed length, or 0 if more bytes are needed, or npos on
    // a stream that cannot be a valid response.
    static std::size_t frame(std::span<const std::uint8_t> buf) {
        if (buf.empty()) return 0;
        if (buf[0] == 0x81) {
            if (buf.size() < 24) return 0;
            const std::uint32_t body = static_cast<std::uint32_t>(buf[8]) << 24 |
                                       static_cast<std::uint32_t>(buf[9]) << 16 |
                                       static_cast<std::uint32_t>(buf[10]) << 8 | buf[11];
            const std::size_t total = 24 + body;
            return buf.size() >= total ? total : 0;
        }
        const std::size_t eol = find_crlf(buf, 0);
        if (eol == npos) return 0;
        const std::size_t line_end = eol + 2;
        if (buf.size() >= 6 && std::memcmp(buf.data(), "VALUE ", 6) == 0) {
            // VALUE <key> <flags> <bytes>\r\n<data>\r\nEND\r\n
            std::size_t len_begin = eol;
            while (len_begin > 0 && buf[len_begin - 1] != ' ') --len_begin;
            std::uint64_t n = 0;
            for (std::size_t i = len_begin; i < eol; ++i) {
                if (buf[i] < '0' || buf[i] > '9') return npos;
                n = n * 10 + (buf[i] - '0');
            }
            const std::size_t total = line_end + n + 2 + 5;
            return buf.size() >= total ? total : 0;
        }
        return line_end;
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    static std::size_t find_crlf(std::span<const std::uint8_t> buf, std::size_t from) {
        for (std::size_t i = from; i + 1 < buf.size(); ++i) {
            if (buf[i] == '\r' && buf[i + 1] == '\n') return i;
        }
        return npos;
    }
};

struct ConnectionOutcome {
    std::vector<LatencyRecord> records;
    std::uint64_t bytes_sent = 0;
    std::uint64_t bytes_received = 0;
    std::uint64_t mismatches = 0;
    std::uint64_t client_errors = 0;
    std::uint64_t server_errors = 0;
    bool transport_failed = false;
};

ConnectionOutcome run_connection(const std::string& host, std::uint16_t port, const Workload& slice,
                                 bool validate, std::uint32_t id_base) {
    ConnectionOutcome out;
    const std::vector<GeneratedRequest> requests = generate_workload(slice);
    ModelCache model;

    ClientSocket sock;
    if (!sock.connect_to(host, port)) {
        out.transport_failed = true;
        return out;
    }

    std::vector<std::uint8_t> inbuf;
    std::uint8_t chunk[16384];
    for (std::size_t i = 0; i < requests.size(); ++i) {
        const GeneratedRequest& req = requests[i];
        LatencyRecord rec;
        rec.request_id = id_base + static_cast<std::uint32_t>(i);
        rec.opcode = req.opcode;
        rec.protocol = req.protocol;
        rec.ingress_ns = now_ns();
        if (!sock.send_all(req.bytes)) {
            out.transport_failed = true;
            return out;
        }
        out.bytes_sent += req.bytes.size();

        std::size_t framed = 0;
        while ((framed = ResponseFramer::frame(inbuf)) == 0) {
            const ssize_t n = ::recv(sock.fd, chunk, sizeof(chunk), 0);
            if (n <= 0) {
                out.transport_failed = true;
                return out;
            }
            inbuf.insert(inbuf.end(), chunk, chunk + n);
        }
        if (framed == ResponseFramer::npos) {
            out.transport_failed = true;
            return out;
        }
        rec.egress_ns = now_ns();
        std::span<const std::uint8_t> response(inbuf.data(), framed);
        out.bytes_received += framed;
        bool server_side = false;
        if (is_error_response(response, server_side)) {
            (server_side ? out.server_errors : out.client_errors) += 1;
        }
        if (validate) {
            const std::vector<std::uint8_t> expected = model.apply(req.bytes);
            if (expected.size() != framed || !std::equal(expected.begin(), expected.end(), inbuf.begin()))
                ++out.mismatches;
        }
        inbuf.erase(inbuf.begin(), inbuf.begin() + static_cast<std::ptrdiff_t>(framed));
        out.records.push_back(rec);
    }
    return out;
}

BenchReport run_network_bench(const BenchOptions& opts) {
    const Workload& w = opts.workload;
    if (w.connections > 1 && opts.validate && w.mix.flush > 0)
        throw std::invalid_argument("mix");  // flushes cross connection key ranges

    BenchReport report;
    const std::uint32_t conns = w.connections;
    std::vector<Workload> slices(conns, w);
    const std::uint64_t base_requests = w.requests / conns;
    const std::uint32_t span = std::max<std::uint32_t>(1, w.key_space / conns);
    for (std::uint32_t c = 0; c < conns; ++c) {
        slices[c].requests = base_requests + (c < w.requests % conns ? 1 : 0);
        slices[c].connections = 1;
        slices[c].seed = w.seed + 0x9e3779b97f4a7c15ull * (c + 1);
        if (conns > 1) {
            slices[c].key_space = span;
            slices[c].key_base = w.key_base + c * span;
        }
    }

    std::vector<ConnectionOutcome> outcomes(conns);
    std::vector<std::thread> workers;
    const std::uint64_t t0 = now_ns();
    for (std::uint32_t c = 0; c < conns; ++c) {
        workers.emplace_back([&, c] {
            outcomes[c] = run_connection(opts.host, opts.port, slices[c], opts.validate,
                                         static_cast<std::uint32_t>(c * (base_requests + 1)));
        });
    }
    for (std::thread& t : workers) t.join();
    const std::uint64_t t1 = now_ns();

    for (ConnectionOutcome& o : outcomes) {
        report.total_requests += o.records.size();
        report.bytes_sent += o.bytes_sent;
        report.bytes_received += o.bytes_received;
        report.validation_mismatches += o.mismatches;
        report.client_error_responses += o.client_errors;
        report.server_error_responses += o.server_errors;
        if (o.transport_failed) {
            report.transport_errors += 1;
            report.complete = false;
        }
        report.records.insert(report.records.end(), o.records.begin(), o.records.end());
    }
    report.seconds = static_cast<double>(t1 - t0) / 1e9;
    report.ops_per_sec =
        report.seconds > 0 ? static_cast<double>(report.total_requests) / report.seconds : 0.0;
    fill_buckets(report);
    return report;
}

BenchReport run_in_process_bench(const BenchOptions& opts) {
    BenchReport report;
    const std::vector<GeneratedRequest> generated = generate_workload(opts.workload);
    std::vector<std::vector<std::uint8_t>> requests;
    requests.reserve(generated.size());
    for (const GeneratedRequest& g : generated) requests.push_back(g.bytes);

    Pipeline pipeline(opts.pipeline);
    const std::uint64_t t0 = now_ns();
    TraceResult trace = run_trace(pipeline, requests, opts.threaded);
    const std::uint64_t t1 = now_ns();

    report.total_requests = requests.size();
    report.seconds = static_cast<double>(t1 - t0) / 1e9;
    report.ops_per_sec =
        report.seconds > 0 ? static_cast<double>(report.total_requests) / report.seconds : 0.0;
    for (const auto& req : requests) report.bytes_sent += req.size();
    for (const auto& resp : trace.responses) {
        report.bytes_received += resp.size();
        count_response(report, resp);
    }
    if (opts.validate) {
        ModelCache model;
        for (std::size_t i = 0; i < requests.size(); ++i) {
            const std::vector<std::uint8_t> expected = model.apply(requests[i]);
            if (expected != trace.responses[i]) ++report.validation_mismatches;
        }
    }
    report.records = std::move(trace.latencies);
    fill_buckets(report);
    return report;
}

}  // namespace

bool is_error_response(std::span<const std::uint8_t> response, bool& server_side) {
    server_side = false;
    if (response.empty()) return false;
    if (response[0] == 0x81) {
        if (response.size() < 8) return false;
        const std::uint16_t status = static_cast<std::uint16_t>(response[6] << 8 | response[7]);
        if (status == 0x0000 || status == 0x0001) return false;  // miss is not an error
        server_side = status == 0x0082 || status == 0x0003;
        return true;
    }
    auto starts_with = [&](const char* prefix) {
        const std::size_t n = std::strlen(prefix);
        return response.size() >= n && std::memcmp(response.data(), prefix, n) == 0;
    };
    if (starts_with("SERVER_ERROR")) {
        server_side = true;
        return true;
    }
    return starts_with("ERROR") || starts_with("CLIENT_ERROR");
}

BenchReport run_bench(const BenchOptions& opts) {
    validate_workload(opts.workload);
    return opts.in_process ? run_in_process_bench(opts) : run_network_bench(opts);
}

void print_report(std::ostream& os, const BenchReport& report) {
    os << "requests:   " << report.total_requests << (report.complete ? "" : "  (INCOMPLETE)") << "\n";
    os << "elapsed:    " << report.seconds << " s\n";
    os << "throughput: " << static_cast<std::uint64_t>(report.ops_per_sec) << " ops/s\n";
    os << "bytes:      " << report.bytes_sent << " out, " << report.bytes_received << " in\n";
    os << "errors:     " << report.validation_mismatches << " mismatches, " << report.transport_errors
       << " transport, " << report.client_error_responses << " client, " << report.server_error_responses
       << " server\n";
    os << "op        proto    count        p50        p95        p99       mean (ns)\n";
    for (const OpBucketStats& b : report.buckets) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-9s %-8s %6llu %10llu %10llu %10llu %10.0f\n",
                      opcode_name(b.opcode), protocol_name(b.protocol),
                      static_cast<unsigned long long>(b.count), static_cast<unsigned long long>(b.p50_ns),
                      static_cast<unsigned long long>(b.p95_ns), static_cast<unsigned long long>(b.p99_ns),
                      b.mean_ns);
        os << line;
    }
}

}  // namespace mcpipe
