// mcpiped: memcached-compatible server built on the staged word-stream
// pipeline. Supports SET/GET/DELETE/FLUSH over the ASCII and binary
// protocols on TCP and UDP.

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "mcpipe/frontend.hpp"

namespace {
std::atomic<bool> g_quit{false};
void handle_signal(int) { g_quit.store(true); }
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mcpiped - dataflow-pipeline memcached server"};

    mcpipe::ServerConfig cfg;
    std::string search_variant = "shift_reverse";
    bool single_context = false;

    app.add_option("--listen", cfg.listen_address, "Listen address")->capture_default_str();
    app.add_option("--tcp-port", cfg.tcp_port, "TCP port (0 = ephemeral)")->capture_default_str();
    app.add_option("--udp-port", cfg.udp_port, "UDP port (0 = ephemeral)")->capture_default_str();
    app.add_option("--channel-capacity", cfg.pipeline.channel_capacity, "Words per inter-stage channel")
        ->capture_default_str();
    app.add_option("--bucket-count", cfg.pipeline.bucket_count, "Hash buckets (power of two)")
        ->capture_default_str();
    app.add_option("--bucket-slots", cfg.pipeline.bucket_slots, "Entries per bucket")->capture_default_str();
    app.add_option("--filter-entries", cfg.pipeline.filter_entries, "Concurrency filter capacity")
        ->capture_default_str();
    app.add_option("--slot-count", cfg.pipeline.slot_count, "Value-store slots")->capture_default_str();
    app.add_option("--slab-size", cfg.pipeline.slab_size, "Bytes per value slot")->capture_default_str();
    app.add_option("--max-value", cfg.pipeline.max_value, "Largest accepted value")->capture_default_str();
    app.add_option("--search-variant", search_variant,
                   "Delimiter search: shift_reverse|forward_noshift|reverse_noshift|shift_forward")
        ->capture_default_str();
    app.add_flag("--single-context", single_context,
                 "Run all stages on the event-loop thread instead of one thread per stage");

    CLI11_PARSE(app, argc, argv);

    if (search_variant == "shift_reverse") {
        cfg.pipeline.search_variant = mcpipe::SearchVariant::ShiftReverse;
    } else if (search_variant == "forward_noshift") {
        cfg.pipeline.search_variant = mcpipe::SearchVariant::ForwardNoShift;
    } else if (search_variant == "reverse_noshift") {
        cfg.pipeline.search_variant = mcpipe::SearchVariant::ReverseNoShift;
    } else if (search_variant == "shift_forward") {
        cfg.pipeline.search_variant = mcpipe::SearchVariant::ShiftForward;
    } else {
        std::cerr << "unknown search variant: " << search_variant << "\n";
        return 2;
    }
    cfg.threaded_pipeline = !single_context;

    try {
        mcpipe::Server server(cfg);
        server.start();
        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
        std::cout << "mcpiped listening on " << cfg.listen_address << " tcp:" << server.tcp_port()
                  << " udp:" << server.udp_port() << std::endl;
        while (!g_quit.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        server.stop();
        const mcpipe::ServerStats stats = server.stats();
        std::cout << "served " << stats.responses_out << " responses over " << stats.connections_accepted
                  << " connections (" << stats.udp_dropped << " udp drops)" << std::endl;
    } catch (const std::exception& e) {
        std::cerr << "fatal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
