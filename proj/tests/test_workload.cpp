#include "doctest.h"
#include "mcpipe/workload.hpp"

using namespace mcpipe;

TEST_CASE("same seed gives a byte-identical sequence") {
    Workload w;
    w.requests = 500;
    w.protocol = WireProtocol::Mixed;
    w.mix = {0.6, 0.3, 0.1, 0.0};
    w.seed = 1;
    const auto a = generate_workload(w);
    const auto b = generate_workload(w);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].bytes == b[i].bytes);
        REQUIRE(a[i].opcode == b[i].opcode);
    }
}

TEST_CASE("pure set mix generates only sets") {
    Workload w;
    w.requests = 200;
    w.mix = {0.0, 1.0, 0.0, 0.0};
    for (const auto& g : generate_workload(w)) CHECK(g.opcode == Opcode::Set);
}

TEST_CASE("mix ratios hold within a binomial bound") {
    Workload w;
    w.requests = 1000;
    w.mix = {0.9, 0.1, 0.0, 0.0};
    w.seed = 7;
    std::size_t gets = 0, sets = 0;
    for (const auto& g : generate_workload(w)) {
        gets += g.opcode == Opcode::Get;
        sets += g.opcode == Opcode::Set;
    }
    CHECK(gets + sets == 1000);
    // +-5% of the expected counts
    CHECK(gets >= 850);
    CHECK(gets <= 950);
    CHECK(sets >= 50);
    CHECK(sets <= 150);
}

TEST_CASE("workload validation rejects bad mixes") {
    Workload w;
    w.mix = {0.5, 0.4, 0.0, 0.0};  // sums to 0.9
    CHECK_THROWS_WITH_AS(generate_workload(w), "mix", std::invalid_argument);
    w.mix = {1.5, -0.5, 0.0, 0.0};
    CHECK_THROWS_WITH_AS(generate_workload(w), "mix", std::invalid_argument);
}

TEST_CASE("keys stay delimiter-free and inside the caps") {
    Workload w;
    w.requests = 300;
    w.mix = {0.0, 1.0, 0.0, 0.0};
    w.key_space = 1000;
    w.key_len_min = 11;
    w.key_len_max = 40;
    for (const auto& g : generate_workload(w)) {
        const std::string text(g.bytes.begin(), g.bytes.end());
        REQUIRE(text.rfind("set key", 0) == 0);
    }
    const std::string k = workload_key(123, 11, 40);
    CHECK(k.rfind("key00000123", 0) == 0);
    CHECK(k.size() >= 11);
    CHECK(k.size() <= 40);
    for (char c : k) {
        CHECK(c != ' ');
        CHECK(c != '\r');
        CHECK(c != '\n');
    }
}

TEST_CASE("warmed gets mostly hit previously set keys") {
    Workload w;
    w.requests = 4000;
    w.mix = {0.8, 0.2, 0.0, 0.0};
    w.key_space = 5000;  // sparse space: blind gets would almost always miss
    w.seed = 11;
    const auto generated = generate_workload(w);
    std::vector<bool> set_seen(w.key_space, false);
    std::size_t warmed_gets = 0, hits = 0;
    bool any_set = false;
    for (const auto& g : generated) {
        const std::string text(g.bytes.begin(), g.bytes.end());
        const std::size_t id = std::stoul(text.substr(text.find("key") + 3, 8));
        if (g.opcode == Opcode::Set) {
            set_seen[id] = true;
            any_set = true;
        } else if (g.opcode == Opcode::Get && any_set) {
            ++warmed_gets;
            hits += set_seen[id];
        }
    }
    REQUIRE(warmed_gets > 1000);
    CHECK(static_cast<double>(hits) >= 0.9 * static_cast<double>(warmed_gets));
}
