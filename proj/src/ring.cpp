#include "aegis/ring.hpp"

#include <atomic>
#include <cerrno>
#include <cstring>

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

namespace aegis {

namespace {

constexpr char kMagic[4] = {'A', 'E', 'G', 'R'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kSlotSize = 64;
constexpr size_t kHeaderBytes = 4096; // slots start on the second page

// Header field offsets (documented in docs/formats.md).
constexpr size_t kOffMagic = 0;
constexpr size_t kOffVersion = 4;
constexpr size_t kOffCapacity = 8;
constexpr size_t kOffWrite = 16;
constexpr size_t kOffRead = 24;
constexpr size_t kOffSlotSize = 32;

std::atomic_ref<uint64_t> counter_at(uint8_t* base, size_t off) {
    return std::atomic_ref<uint64_t>(*reinterpret_cast<uint64_t*>(base + off));
}

} // namespace

Ring::Ring(Ring&& other) noexcept
    : base_(other.base_), map_len_(other.map_len_), capacity_(other.capacity_), fd_(other.fd_) {
    other.base_ = nullptr;
    other.fd_ = -1;
}

Ring& Ring::operator=(Ring&& other) noexcept {
    if (this != &other) {
        close();
        base_ = other.base_;
        map_len_ = other.map_len_;
        capacity_ = other.capacity_;
        fd_ = other.fd_;
        other.base_ = nullptr;
        other.fd_ = -1;
    }
    return *this;
}

Ring::~Ring() { close(); }

void Ring::close() noexcept {
    if (base_) munmap(base_, map_len_);
    if (fd_ >= 0) ::close(fd_);
    base_ = nullptr;
    fd_ = -1;
}

Ring Ring::create(const std::string& path, uint64_t capacity) {
    if (capacity < 1024 || (capacity & (capacity - 1)) != 0)
        throw Error(ErrorCode::BadCapacity, "ring capacity must be a power of two >= 1024");

    int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_EXCL, 0644);
    if (fd < 0) {
        if (errno == EEXIST)
            throw Error(ErrorCode::IoFailure, "ring file already exists: " + path);
        throw Error(ErrorCode::IoFailure, "cannot create ring: " + path);
    }

    const size_t len = kHeaderBytes + capacity * kSlotSize;
    if (ftruncate(fd, static_cast<off_t>(len)) != 0) {
        ::close(fd);
        throw Error(ErrorCode::IoFailure, "cannot size ring file: " + path);
    }
    void* mem = mmap(nullptr, len, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
    if (mem == MAP_FAILED) {
        ::close(fd);
        throw Error(ErrorCode::IoFailure, "cannot map ring: " + path);
    }

    Ring r;
    r.base_ = static_cast<uint8_t*>(mem);
    r.map_len_ = len;
    r.capacity_ = capacity;
    r.fd_ = fd;
    std::memset(r.base_, 0, len);
    std::memcpy(r.base_ + kOffMagic, kMagic, 4);
    std::memcpy(r.base_ + kOffVersion, &kVersion, 4);
    std::memcpy(r.base_ + kOffCapacity, &capacity, 8);
    std::memcpy(r.base_ + kOffSlotSize, &kSlotSize, 4);
    return r;
}

Ring Ring::open(const std::string& path) {
    int fd = ::open(path.c_str(), O_RDWR);
    if (fd < 0) throw Error(ErrorCode::RingMissing, "ring file missing: " + path);

    struct stat st{};
    if (fstat(fd, &st) != 0) {
        ::close(fd);
        throw Error(ErrorCode::IoFailure, "cannot stat ring: " + path);
    }
    const size_t len = static_cast<size_t>(st.st_size);
    if (len < kHeaderBytes) {
        ::close(fd);
        throw Error(ErrorCode::BadMagic, "ring file too small: " + path);
    }
    void* mem = mmap(nullptr, len, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
    if (mem == MAP_FAILED) {
        ::close(fd);
        throw Error(ErrorCode::IoFailure, "cannot map ring: " + path);
    }

    Ring r;
    r.base_ = static_cast<uint8_t*>(mem);
    r.map_len_ = len;
    r.fd_ = fd;
    if (std::memcmp(r.base_ + kOffMagic, kMagic, 4) != 0)
        throw Error(ErrorCode::BadMagic, "not a ring file: " + path);
    uint32_t version;
    std::memcpy(&version, r.base_ + kOffVersion, 4);
    if (version != kVersion) throw Error(ErrorCode::VersionMismatch, "unsupported ring version");
    std::memcpy(&r.capacity_, r.base_ + kOffCapacity, 8);
    if (r.capacity_ == 0 || (r.capacity_ & (r.capacity_ - 1)) != 0 ||
        len != kHeaderBytes + r.capacity_ * kSlotSize)
        throw Error(ErrorCode::BadMagic, "ring header inconsistent with file size");
    return r;
}

bool Ring::publish(RingSlot record) {
    auto write = counter_at(base_, kOffWrite);
    auto read = counter_at(base_, kOffRead);
    const uint64_t w = write.load(std::memory_order_relaxed);
    if (w - read.load(std::memory_order_acquire) >= capacity_) return false; // back-pressure

    record.sequence = w;
    auto* slot = reinterpret_cast<RingSlot*>(base_ + kHeaderBytes + (w & (capacity_ - 1)) * kSlotSize);
    std::memcpy(slot, &record, sizeof(RingSlot));
    // Publication point: a consumer that observes w+1 observes the slot bytes.
    write.store(w + 1, std::memory_order_release);
    return true;
}

size_t Ring::consume_batch(RingSlot* out, size_t max) {
    auto write = counter_at(base_, kOffWrite);
    auto read = counter_at(base_, kOffRead);
    const uint64_t r = read.load(std::memory_order_relaxed);
    const uint64_t w = write.load(std::memory_order_acquire);
    size_t avail = static_cast<size_t>(w - r);
    size_t take = avail < max ? avail : max;
    for (size_t i = 0; i < take; ++i) {
        const auto* slot =
            reinterpret_cast<const RingSlot*>(base_ + kHeaderBytes + ((r + i) & (capacity_ - 1)) * kSlotSize);
        std::memcpy(out + i, slot, sizeof(RingSlot));
    }
    if (take > 0) read.store(r + take, std::memory_order_release);
    return take;
}

uint64_t Ring::write_counter() const {
    return counter_at(const_cast<uint8_t*>(base_), kOffWrite).load(std::memory_order_acquire);
}

uint64_t Ring::read_counter() const {
    return counter_at(const_cast<uint8_t*>(base_), kOffRead).load(std::memory_order_acquire);
}

} // namespace aegis
