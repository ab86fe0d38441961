#pragma once

#include <cstdint>
#include <string>

#include "aegis/errors.hpp"

namespace aegis {

/// Fixed 64-byte slot carried between harvester and engine. Offsets are part
/// of the on-disk contract (docs/formats.md): 0 sequence, 8 flow_id,
/// 16 timestamp, 24 physics[6], 48 flags, 56 padding.
struct RingSlot {
    uint64_t sequence = 0; // assigned by publish(): the write counter value
    uint64_t flow_id = 0;
    double timestamp = 0;
    float physics[6] = {0, 0, 0, 0, 0, 0};
    uint64_t flags = 0;
    uint64_t pad = 0;
};
static_assert(sizeof(RingSlot) == 64, "slot layout is a wire contract");

/// Memory-mapped single-producer/single-consumer ring. The header page holds
/// magic "AEGR", version, capacity and the two counters; publication order is
/// release on write_counter, consumption acquires it before touching slot
/// bytes and releases read_counter afterwards. Back-pressure instead of
/// overwrite: publish reports would-block when write - read == capacity.
class Ring {
public:
    Ring() = default;
    Ring(Ring&& other) noexcept;
    Ring& operator=(Ring&& other) noexcept;
    Ring(const Ring&) = delete;
    Ring& operator=(const Ring&) = delete;
    ~Ring();

    /// Create a fresh zeroed ring file. capacity must be a power of two
    /// >= 1024 (BadCapacity). Refuses to clobber an existing file (IoFailure).
    static Ring create(const std::string& path, uint64_t capacity);

    /// Attach to an existing ring (RingMissing / BadMagic / VersionMismatch).
    /// A mid-stream attach is safe: the counters alone say what may be read.
    static Ring open(const std::string& path);

    /// Single producer only. Sets record.sequence to the current write
    /// counter. Returns false (would-block) when the ring is full.
    bool publish(RingSlot record);

    /// Single consumer only. Reads up to max slots in publish order.
    size_t consume_batch(RingSlot* out, size_t max);

    uint64_t write_counter() const;
    uint64_t read_counter() const;
    uint64_t capacity() const { return capacity_; }
    bool valid() const { return base_ != nullptr; }

private:
    void close() noexcept;

    uint8_t* base_ = nullptr;
    size_t map_len_ = 0;
    uint64_t capacity_ = 0;
    int fd_ = -1;
};

} // namespace aegis
