#include <cstring>
#include <random>

#include "doctest.h"
#include "mcpipe/value_store.hpp"

using namespace mcpipe;

namespace {

std::vector<std::uint8_t> bytes_of(const char* s) {
    return {reinterpret_cast<const std::uint8_t*>(s), reinterpret_cast<const std::uint8_t*>(s) + strlen(s)};
}

struct VsHarness {
    BoundedChannel<StreamWord> in{4096};
    BoundedChannel<StreamWord> out{4096};
    ValueStoreStage stage;

    explicit VsHarness(SlabConfig cfg = {.slot_count = 64, .slab_size = 256}) : stage(in, out, cfg) {}

    PipeMessage roundtrip(PipeHeader h, const std::string& key, std::span<const std::uint8_t> value = {}) {
        h.meta.key_length = static_cast<std::uint16_t>(key.size());
        for (const StreamWord& w : pack_message(encode_pipe_message(h, key, value)))
            REQUIRE(in.try_write(w));
        std::vector<StreamWord> words;
        for (int i = 0; i < 100000; ++i) {
            stage.step();
            while (auto w = out.try_read()) {
                words.push_back(*w);
                if (w->last) return decode_pipe_message(words);
            }
        }
        FAIL("value store produced no message");
        return {};
    }
};

PipeHeader write_command(std::uint32_t address, std::uint32_t value_length) {
    PipeHeader h;
    h.meta.opcode = Opcode::Set;
    h.meta.value_length = value_length;
    h.status = Status::None;
    h.value_attached = true;
    h.address = address;
    return h;
}

PipeHeader read_command(std::uint32_t address, std::uint32_t value_length, std::uint32_t flags = 0) {
    PipeHeader h;
    h.meta.opcode = Opcode::Get;
    h.meta.value_length = value_length;
    h.meta.flags = flags;
    h.status = Status::Found;
    h.value_attached = false;
    h.address = address;
    return h;
}

}  // namespace

TEST_CASE("slab write/read round trip") {
    SlabStore store({.slot_count = 4, .slab_size = 16});
    CHECK(store.write(0, bytes_of("bar")));
    const auto back = store.read(0, 3);
    CHECK(std::equal(back.begin(), back.end(), bytes_of("bar").begin()));
    CHECK(store.stored_length(0) == 3);
}

TEST_CASE("slab overwrite is last-write-wins") {
    SlabStore store({.slot_count = 4, .slab_size = 16});
    CHECK(store.write(0, bytes_of("bar")));
    CHECK(store.write(0, bytes_of("bazzz")));
    const auto back = store.read(0, 5);
    CHECK(std::equal(back.begin(), back.end(), bytes_of("bazzz").begin()));
    CHECK(store.stored_length(0) == 5);
}

TEST_CASE("slab size boundary") {
    SlabStore store({.slot_count = 2, .slab_size = 8});
    const std::vector<std::uint8_t> exact(8, 'x');
    const std::vector<std::uint8_t> over(9, 'x');
    CHECK(store.write(1, exact));
    CHECK(store.stored_length(1) == 8);
    CHECK(!store.write(1, over));        // rejected whole
    CHECK(store.stored_length(1) == 8);  // nothing partially written
}

TEST_CASE("slab read word framing") {
    SlabStore store({.slot_count = 4, .slab_size = 32});

    SUBCASE("length 3: one word, keep 0x07") {
        store.write(0, bytes_of("bar"));
        const auto words = store.read_words(0, 3);
        REQUIRE(words.size() == 1);
        CHECK(words[0].keep == 0x07);
        CHECK(words[0].last);
    }
    SUBCASE("length 16: two full words") {
        const std::vector<std::uint8_t> v(16, 'a');
        store.write(0, v);
        const auto words = store.read_words(0, 16);
        REQUIRE(words.size() == 2);
        CHECK(words[0].keep == 0xff);
        CHECK(!words[0].last);
        CHECK(words[1].keep == 0xff);
        CHECK(words[1].last);
    }
    SUBCASE("length 9: keep 0xff then 0x01") {
        const std::vector<std::uint8_t> v(9, 'b');
        store.write(0, v);
        const auto words = store.read_words(0, 9);
        REQUIRE(words.size() == 2);
        CHECK(words[0].keep == 0xff);
        CHECK(words[1].keep == 0x01);
        CHECK(words[1].last);
    }
}

TEST_CASE("slab length mismatch is a pipeline fault") {
    SlabStore store({.slot_count = 2, .slab_size = 8});
    store.write(0, bytes_of("abc"));
    CHECK_THROWS_AS(store.read(0, 4), PipelineFault);
    CHECK_THROWS_AS(store.read(5, 1), PipelineFault);  // address out of range
}

TEST_CASE("read-your-writes across random lengths and contents") {
    std::mt19937_64 rng(0x5eed4001);
    SlabStore store({.slot_count = 8, .slab_size = 512});
    int mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::uint32_t addr = static_cast<std::uint32_t>(rng() % 8);
        const std::size_t len = rng() % 513;
        std::vector<std::uint8_t> v(len);
        for (auto& b : v) b = static_cast<std::uint8_t>(rng());
        REQUIRE(store.write(addr, v));
        const auto back = store.read(addr, static_cast<std::uint32_t>(len));
        if (!std::equal(back.begin(), back.end(), v.begin())) ++mismatches;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("dispatch: write then read through the stage") {
    VsHarness h;
    const auto value = bytes_of("hello");
    const PipeMessage stored = h.roundtrip(write_command(3, 5), "k", value);
    CHECK(stored.header.status == Status::Stored);
    CHECK(!stored.header.value_attached);
    CHECK(stored.value.empty());

    const PipeMessage found = h.roundtrip(read_command(3, 5, 42), "k");
    CHECK(found.header.status == Status::Found);
    CHECK(found.header.value_attached);
    CHECK(found.value == value);
    CHECK(found.header.meta.flags == 42);
    CHECK(found.key == "k");
}

TEST_CASE("pass-throughs never touch storage") {
    VsHarness h;
    const std::uint64_t reads0 = h.stage.store().read_accesses();
    const std::uint64_t writes0 = h.stage.store().write_accesses();

    for (Status s : {Status::NotFound, Status::Deleted, Status::Flushed}) {
        PipeHeader ph;
        ph.meta.opcode = s == Status::Deleted ? Opcode::Delete : Opcode::Get;
        ph.status = s;
        const PipeMessage out = h.roundtrip(ph, "k");
        CHECK(out.header.status == s);
    }
    PipeHeader err;
    err.meta.opcode = Opcode::Set;
    err.status = Status::Error;
    err.error = ErrorDetail::Storage;
    CHECK(h.roundtrip(err, "").header.status == Status::Error);

    CHECK(h.stage.store().read_accesses() == reads0);
    CHECK(h.stage.store().write_accesses() == writes0);
}

TEST_CASE("stage preserves request order") {
    VsHarness h;
    const auto value = bytes_of("x");
    std::vector<PipeMessage> outputs;
    for (std::uint32_t i = 0; i < 10; ++i) {
        PipeHeader cmd = write_command(i, 1);
        cmd.meta.request_id = i;
        outputs.push_back(h.roundtrip(cmd, "k" + std::to_string(i), value));
    }
    for (std::uint32_t i = 0; i < 10; ++i) CHECK(outputs[i].header.meta.request_id == i);
}

TEST_CASE("zero-length values store and read back") {
    VsHarness h;
    const PipeMessage stored = h.roundtrip(write_command(0, 0), "k", {});
    CHECK(stored.header.status == Status::Stored);
    const PipeMessage found = h.roundtrip(read_command(0, 0), "k");
    CHECK(found.header.status == Status::Found);
    CHECK(found.header.value_attached);
    CHECK(found.value.empty());
}
