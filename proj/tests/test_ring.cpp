#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <sys/stat.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "aegis/harness.hpp"
#include "aegis/ring.hpp"

using namespace aegis;

namespace {

std::string ring_path(const char* stem) {
    std::string p = std::string("/tmp/aegis_ring_") + stem + "_" + std::to_string(getpid());
    std::remove(p.c_str());
    return p;
}

} // namespace

TEST_CASE("create sizes the file and validates capacity") {
    std::string path = ring_path("create");
    {
        Ring r = Ring::create(path, 4096);
        struct stat st{};
        REQUIRE(stat(path.c_str(), &st) == 0);
        CHECK(st.st_size == 4096 * 64 + 4096); // slots plus one header page
        CHECK(r.capacity() == 4096);
        CHECK(r.write_counter() == 0);
        CHECK(r.read_counter() == 0);
    }
    SUBCASE("existing ring is not clobbered") {
        CHECK_THROWS_AS(Ring::create(path, 4096), Error);
    }
    std::remove(path.c_str());

    CHECK_THROWS_AS(Ring::create(ring_path("badcap"), 1000), Error); // not a power of two
    CHECK_THROWS_AS(Ring::create(ring_path("small"), 512), Error);   // below the floor
}

TEST_CASE("open validates the header") {
    std::string path = ring_path("badmagic");
    FILE* f = fopen(path.c_str(), "wb");
    std::string junk(8192, 'x');
    fwrite(junk.data(), 1, junk.size(), f);
    fclose(f);
    try {
        (void)Ring::open(path);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BadMagic);
    }
    std::remove(path.c_str());
    try {
        (void)Ring::open("/tmp/aegis_no_such_ring");
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RingMissing);
    }
}

TEST_CASE("publish and consume follow the counter contract") {
    std::string path = ring_path("pubsub");
    Ring r = Ring::create(path, 1024);
    RingSlot buf[128];

    SUBCASE("empty ring gives an empty batch") {
        CHECK(r.consume_batch(buf, 64) == 0);
    }
    SUBCASE("first publish moves the write counter from 0 to 1") {
        RingSlot s;
        s.flow_id = 7;
        CHECK(r.publish(s));
        CHECK(r.write_counter() == 1);
        CHECK(r.consume_batch(buf, 64) == 1);
        CHECK(buf[0].flow_id == 7);
        CHECK(buf[0].sequence == 0); // sequence equals write counter at publish
        CHECK(r.read_counter() == 1);
    }
    SUBCASE("fifo order and batching arithmetic") {
        for (uint64_t i = 0; i < 100; ++i) {
            RingSlot s;
            s.flow_id = i;
            REQUIRE(r.publish(s));
        }
        CHECK(r.consume_batch(buf, 64) == 64);
        for (uint64_t i = 0; i < 64; ++i) {
            CHECK(buf[i].flow_id == i);
            CHECK(buf[i].sequence == i);
        }
        CHECK(r.consume_batch(buf, 64) == 36);
        for (uint64_t i = 0; i < 36; ++i) CHECK(buf[i].sequence == 64 + i);
        CHECK(r.write_counter() == r.read_counter()); // quiescent counters agree
    }
    SUBCASE("full ring reports would-block and keeps counters") {
        RingSlot s;
        for (uint64_t i = 0; i < 1024; ++i) REQUIRE(r.publish(s));
        CHECK_FALSE(r.publish(s));
        CHECK(r.write_counter() == 1024);
        CHECK(r.read_counter() == 0);
        CHECK(r.consume_batch(buf, 1) == 1);
        CHECK(r.publish(s)); // space again
    }
    std::remove(path.c_str());
}

TEST_CASE("a reader attached mid-stream resynchronizes from the counters") {
    std::string path = ring_path("attach");
    Ring producer = Ring::create(path, 1024);
    RingSlot s;
    for (int i = 0; i < 10; ++i) REQUIRE(producer.publish(s));

    Ring consumer = Ring::open(path);
    CHECK(consumer.write_counter() == 10);
    RingSlot buf[16];
    CHECK(consumer.consume_batch(buf, 16) == 10);
    for (int i = 0; i < 10; ++i) CHECK(buf[i].sequence == static_cast<uint64_t>(i));
    CHECK(producer.write_counter() == consumer.read_counter());
    std::remove(path.c_str());
}

TEST_CASE("concurrent producer and consumer lose nothing") {
    std::string path = ring_path("bench");
    auto report = bench_ring(path, 1000000, 4096, 64, 2024, 10);
    CHECK(report.records == 1000000);
    CHECK(report.records_per_sec > 0);
    CHECK(report.batches > 0);
    std::remove(path.c_str());
}

TEST_CASE("batch 64 and batch 256 both complete with latency stats") {
    for (int batch : {64, 256}) {
        std::string path = ring_path(batch == 64 ? "b64" : "b256");
        auto report = bench_ring(path, 200000, 4096, batch, 7, 4);
        CHECK(report.records == 200000);
        CHECK(report.p99_us >= report.p50_us);
        CHECK(report.max_us >= report.p99_us);
        std::remove(path.c_str());
    }
}

TEST_CASE("producer and consumer in separate processes") {
    std::string path = ring_path("fork");
    Ring consumer = Ring::create(path, 1024);
    const uint64_t total = 50000;

    pid_t pid = fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        // child: the harvester role over its own mapping
        try {
            Ring producer = Ring::open(path);
            for (uint64_t i = 0; i < total; ++i) {
                RingSlot s;
                s.flow_id = i;
                s.timestamp = static_cast<double>(i) * 0.5;
                while (!producer.publish(s)) std::this_thread::yield();
            }
            _exit(0);
        } catch (...) {
            _exit(1);
        }
    }

    RingSlot buf[64];
    uint64_t expected = 0;
    while (expected < total) {
        size_t got = consumer.consume_batch(buf, 64);
        for (size_t i = 0; i < got; ++i) {
            REQUIRE(buf[i].sequence == expected);
            REQUIRE(buf[i].flow_id == expected);
            ++expected;
        }
        if (got == 0) std::this_thread::yield();
    }
    int status = -1;
    REQUIRE(waitpid(pid, &status, 0) == pid);
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
    CHECK(consumer.read_counter() == total);
    CHECK(consumer.write_counter() == total);
    std::remove(path.c_str());
}

TEST_CASE("slow consumer forces back-pressure without loss") {
    std::string path = ring_path("slow");
    Ring producer = Ring::create(path, 1024);
    Ring consumer = Ring::open(path);

    const uint64_t total = 200000;
    std::atomic<uint64_t> would_block{0};
    std::thread prod([&] {
        for (uint64_t i = 0; i < total; ++i) {
            RingSlot s;
            s.flow_id = i;
            while (!producer.publish(s)) {
                would_block.fetch_add(1, std::memory_order_relaxed);
                std::this_thread::yield();
            }
        }
    });

    RingSlot buf[64];
    uint64_t expected = 0;
    while (expected < total) {
        size_t got = consumer.consume_batch(buf, 64);
        for (size_t i = 0; i < got; ++i) {
            REQUIRE(buf[i].flow_id == expected);
            ++expected;
        }
        if ((expected & 0x3fff) == 0) std::this_thread::sleep_for(std::chrono::microseconds(200));
    }
    prod.join();
    CHECK(would_block.load() > 0); // the 1024-slot ring had to push back
    CHECK(consumer.read_counter() == total);
    std::remove(path.c_str());
}
