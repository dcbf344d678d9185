#include "mcpipe/pipeline.hpp"

#include <cctype>
#include <chrono>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace mcpipe {

namespace {

std::uint64_t now_ns() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

}  // namespace

namespace {
std::size_t channel_cap(const PipelineConfig& cfg, std::size_t i) {
    return cfg.channel_capacity_override[i] != 0 ? cfg.channel_capacity_override[i]
                                                 : cfg.channel_capacity;
}
}  // namespace

Pipeline::Pipeline(PipelineConfig cfg)
    : cfg_(cfg),
      ingress_(channel_cap(cfg, 0)),
      parser_to_ht_(channel_cap(cfg, 1)),
      ht_to_store_(channel_cap(cfg, 2)),
      store_to_fmt_(channel_cap(cfg, 3)),
      egress_(channel_cap(cfg, 4)) {
    if (cfg_.store_slot_count != 0 && cfg_.store_slot_count != cfg_.slot_count)
        throw std::invalid_argument("slot_count");
    if (cfg_.max_key == 0 || cfg_.max_key > kMaxKeyLength) throw std::invalid_argument("max_key");
    if (cfg_.max_value > cfg_.slab_size) throw std::invalid_argument("max_value");

    ParserConfig pcfg;
    pcfg.search_variant = cfg_.search_variant;
    pcfg.max_key = cfg_.max_key;
    pcfg.max_value = cfg_.max_value;
    pcfg.max_ascii_line = cfg_.max_ascii_line;
    parser_ = std::make_unique<ParserStage>(ingress_, parser_to_ht_, pcfg);

    HashTableConfig hcfg;
    hcfg.bucket_count = cfg_.bucket_count;
    hcfg.bucket_slots = cfg_.bucket_slots;
    hcfg.filter_entries = cfg_.filter_entries;
    hcfg.slot_count = cfg_.slot_count;
    hash_table_ = std::make_unique<HashTableStage>(parser_to_ht_, ht_to_store_, hcfg);

    SlabConfig scfg;
    scfg.slot_count = cfg_.store_slot_count == 0 ? cfg_.slot_count : cfg_.store_slot_count;
    scfg.slab_size = cfg_.slab_size;
    value_store_ = std::make_unique<ValueStoreStage>(ht_to_store_, store_to_fmt_, scfg);

    formatter_ = std::make_unique<FormatterStage>(store_to_fmt_, egress_);
    if (cfg_.log_response_ids) formatter_->set_id_log(&response_ids_);

    stages_ = {parser_.get(), hash_table_.get(), value_store_.get(), formatter_.get()};
}

Pipeline::~Pipeline() { stop(); }

bool Pipeline::pump() {
    bool progress = false;
    for (Stage* s : stages_) progress = s->step() || progress;
    return progress;
}

void Pipeline::start() {
    if (!threads_.empty()) return;
    stop_.store(false, std::memory_order_relaxed);
    for (Stage* s : stages_) {
        threads_.emplace_back([this, s] {
            unsigned idle = 0;
            while (!stop_.load(std::memory_order_relaxed)) {
                bool moved = false;
                try {
                    moved = s->step();
                } catch (...) {
                    fault_ = std::current_exception();
                    faulted_.store(true, std::memory_order_release);
                    return;
                }
                if (moved) {
                    idle = 0;
                } else if (++idle < 128) {
                    std::this_thread::yield();
                } else {
                    std::this_thread::sleep_for(std::chrono::microseconds(20));
                }
            }
        });
    }
}

void Pipeline::stop() {
    if (threads_.empty()) return;
    stop_.store(true, std::memory_order_relaxed);
    for (std::thread& t : threads_) t.join();
    threads_.clear();
}

void Pipeline::check_fault() {
    if (faulted_.load(std::memory_order_acquire)) {
        stop();
        std::rethrow_exception(fault_);
    }
}

std::array<const BoundedChannel<StreamWord>*, 5> Pipeline::channels() const {
    return {&ingress_, &parser_to_ht_, &ht_to_store_, &store_to_fmt_, &egress_};
}

std::pair<Opcode, Protocol> sniff_request(std::span<const std::uint8_t> request) {
    if (!request.empty() && request[0] == 0x80) {
        Opcode op = Opcode::Get;
        if (request.size() > 1) {
            switch (request[1]) {
                case 0x01: op = Opcode::Set; break;
                case 0x04: op = Opcode::Delete; break;
                case 0x08: op = Opcode::Flush; break;
                default: op = Opcode::Get; break;
            }
        }
        return {op, Protocol::Binary};
    }
    std::string word;
    for (std::uint8_t b : request) {
        if (b == ' ' || b == '\r') break;
        word.push_back(static_cast<char>(std::tolower(b)));
        if (word.size() > 9) break;
    }
    Opcode op = Opcode::Get;
    if (word == "set") op = Opcode::Set;
    else if (word == "delete") op = Opcode::Delete;
    else if (word == "flush_all") op = Opcode::Flush;
    return {op, Protocol::Ascii};
}

TraceResult run_trace(Pipeline& pipeline, std::span<const std::vector<std::uint8_t>> requests,
                      bool threaded) {
    TraceResult result;
    result.responses.reserve(requests.size());
    result.latencies.resize(requests.size());

    const bool started_here = threaded && !pipeline.running();
    if (started_here) pipeline.start();

    std::size_t feed_idx = 0;
    std::vector<StreamWord> feed_words;
    std::size_t feed_pos = 0;

    std::vector<StreamWord> resp_words;
    std::size_t resp_idx = 0;

    while (result.responses.size() < requests.size()) {
        bool progress = false;

        while (feed_idx < requests.size()) {
            if (feed_words.empty()) {
                feed_words = pack_message(requests[feed_idx]);
                feed_pos = 0;
            }
            bool wrote = false;
            while (feed_pos < feed_words.size() && pipeline.ingress().try_write(feed_words[feed_pos])) {
                if (feed_pos == 0) {
                    auto [op, proto] = sniff_request(requests[feed_idx]);
                    LatencyRecord& rec = result.latencies[feed_idx];
                    rec.request_id = static_cast<std::uint32_t>(feed_idx);
                    rec.opcode = op;
                    rec.protocol = proto;
                    rec.ingress_ns = now_ns();
                }
                ++feed_pos;
                wrote = true;
            }
            progress = progress || wrote;
            if (feed_pos < feed_words.size()) break;  // ingress full, resume later
            feed_words.clear();
            ++feed_idx;
        }

        if (threaded) {
            pipeline.check_fault();
        } else {
            progress = pipeline.pump() || progress;
        }

        while (auto w = pipeline.egress().try_read()) {
            progress = true;
            resp_words.push_back(*w);
            if (w->last) {
                result.responses.push_back(unpack_message(resp_words));
                resp_words.clear();
                result.latencies[resp_idx].egress_ns = now_ns();
                ++resp_idx;
            }
        }

        if (!progress) {
            if (!threaded) throw std::runtime_error("run_trace: pipeline made no progress");
            std::this_thread::yield();
        }
    }

    if (started_here) pipeline.stop();
    return result;
}

const char* opcode_name(Opcode op) {
    switch (op) {
        case Opcode::Get: return "get";
        case Opcode::Set: return "set";
        case Opcode::Delete: return "delete";
        case Opcode::Flush: return "flush";
    }
    return "?";
}

const char* protocol_name(Protocol p) {
    return p == Protocol::Binary ? "binary" : "ascii";
}

void write_latency_csv(std::ostream& os, std::span<const LatencyRecord> records) {
    os << "request_id,opcode,protocol,latency_ns\n";
    for (const LatencyRecord& r : records) {
        os << r.request_id << ',' << opcode_name(r.opcode) << ',' << protocol_name(r.protocol) << ','
           << r.latency_ns() << '\n';
    }
}

void write_trace_file(const std::string& path, std::span<const std::vector<std::uint8_t>> requests) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open trace file for writing: " + path);
    for (const auto& req : requests) {
        const std::uint32_t n = static_cast<std::uint32_t>(req.size());
        const std::uint8_t len[4] = {static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16),
                                     static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n)};
        out.write(reinterpret_cast<const char*>(len), 4);
        out.write(reinterpret_cast<const char*>(req.data()), static_cast<std::streamsize>(req.size()));
    }
}

std::vector<std::vector<std::uint8_t>> read_trace_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    std::vector<std::vector<std::uint8_t>> requests;
    for (;;) {
        std::uint8_t len[4];
        if (!in.read(reinterpret_cast<char*>(len), 4)) break;
        const std::uint32_t n = static_cast<std::uint32_t>(len[0]) << 24 |
                                static_cast<std::uint32_t>(len[1]) << 16 |
                                static_cast<std::uint32_t>(len[2]) << 8 | len[3];
        std::vector<std::uint8_t> req(n);
        if (!in.read(reinterpret_cast<char*>(req.data()), n)) throw std::runtime_error("truncated trace file");
        requests.push_back(std::move(req));
    }
    return requests;
}

}  // namespace mcpipe
