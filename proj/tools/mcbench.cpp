// mcbench: load generator and validator. Drives either the in-process
// pipeline or a network server with a seeded command mix and reports
// throughput plus latency percentiles; --validate checks every response
// against the reference cache model.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mcpipe/bench.hpp"

namespace {

bool parse_mix(const std::string& text, mcpipe::MixRatios& mix) {
    mix = {0, 0, 0, 0};
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const std::size_t eq = part.find('=');
        if (eq == std::string::npos) return false;
        const std::string name = part.substr(0, eq);
        double value = 0;
        try {
            value = std::stod(part.substr(eq + 1));
        } catch (...) {
            return false;
        }
        if (name == "get") mix.get = value;
        else if (name == "set") mix.set = value;
        else if (name == "delete") mix.del = value;
        else if (name == "flush") mix.flush = value;
        else return false;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mcbench - pipeline load generator"};

    mcpipe::BenchOptions opts;
    std::string target;
    std::string mix = "get=0.9,set=0.1";
    std::string protocol = "ascii";
    std::string csv_path;
    std::string trace_out;
    std::string trace_in;

    bool in_process = false;
    app.add_option("--target", target, "host:port of a running server");
    app.add_flag("--in-process", in_process, "drive the in-process pipeline (the default)");
    app.add_option("--requests", opts.workload.requests, "Total requests")->capture_default_str();
    app.add_option("--mix", mix, "Command mix, e.g. get=0.9,set=0.1")->capture_default_str();
    app.add_option("--protocol", protocol, "ascii|binary|mixed")->capture_default_str();
    app.add_option("--connections", opts.workload.connections, "Client connections (network target)")
        ->capture_default_str();
    app.add_option("--seed", opts.workload.seed, "Workload seed")->capture_default_str();
    app.add_option("--key-space", opts.workload.key_space, "Distinct keys")->capture_default_str();
    app.add_option("--value-min", opts.workload.value_len_min, "Smallest value")->capture_default_str();
    app.add_option("--value-max", opts.workload.value_len_max, "Largest value")->capture_default_str();
    app.add_flag("--validate", opts.validate, "Check responses against the cache model");
    app.add_flag("--threaded", opts.threaded, "In-process: one thread per stage");
    app.add_option("--csv", csv_path, "Write per-request latency CSV here");
    app.add_option("--trace-out", trace_out, "Write the generated workload as a trace file and exit");
    app.add_option("--trace-in", trace_in, "Replay a trace file through the in-process pipeline");

    CLI11_PARSE(app, argc, argv);

    if (!parse_mix(mix, opts.workload.mix)) {
        std::cerr << "bad --mix\n";
        return 2;
    }
    if (protocol == "ascii") opts.workload.protocol = mcpipe::WireProtocol::Ascii;
    else if (protocol == "binary") opts.workload.protocol = mcpipe::WireProtocol::Binary;
    else if (protocol == "mixed") opts.workload.protocol = mcpipe::WireProtocol::Mixed;
    else {
        std::cerr << "bad --protocol\n";
        return 2;
    }
    if (!target.empty()) {
        if (in_process) {
            std::cerr << "--target and --in-process are mutually exclusive\n";
            return 2;
        }
        const std::size_t colon = target.rfind(':');
        if (colon == std::string::npos) {
            std::cerr << "bad --target, expected host:port\n";
            return 2;
        }
        opts.in_process = false;
        opts.host = target.substr(0, colon);
        opts.port = static_cast<std::uint16_t>(std::stoi(target.substr(colon + 1)));
    }

    try {
        if (!trace_out.empty()) {
            const auto generated = mcpipe::generate_workload(opts.workload);
            std::vector<std::vector<std::uint8_t>> requests;
            requests.reserve(generated.size());
            for (const auto& g : generated) requests.push_back(g.bytes);
            mcpipe::write_trace_file(trace_out, requests);
            std::cout << "wrote " << requests.size() << " requests to " << trace_out << "\n";
            return 0;
        }
        if (!trace_in.empty()) {
            const auto requests = mcpipe::read_trace_file(trace_in);
            mcpipe::Pipeline pipeline(opts.pipeline);
            const auto result = mcpipe::run_trace(pipeline, requests, opts.threaded);
            std::cout << "replayed " << result.responses.size() << " requests\n";
            if (!csv_path.empty()) {
                std::ofstream csv(csv_path);
                mcpipe::write_latency_csv(csv, result.latencies);
            }
            return 0;
        }

        const mcpipe::BenchReport report = mcpipe::run_bench(opts);
        mcpipe::print_report(std::cout, report);
        if (!csv_path.empty()) {
            std::ofstream csv(csv_path);
            mcpipe::write_latency_csv(csv, report.records);
        }
        if (report.validation_mismatches > 0 || !report.complete) return 1;
    } catch (const std::exception& e) {
        std::cerr << "fatal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
