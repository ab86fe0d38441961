#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>

#include "aegis/errors.hpp"

namespace aegis {

/// Decoded classic-pcap global header (24 bytes).
struct PcapHeader {
    enum class Resolution { micro, nano };
    enum class Order { same, swapped };

    uint32_t magic = 0;
    uint16_t version_major = 0;
    uint16_t version_minor = 0;
    uint32_t snaplen = 0;
    uint32_t link_type = 0;
    Resolution ts_resolution = Resolution::micro;
    Order byte_order = Order::same;
};

/// One parsed packet's physics-relevant header facts. Payload bytes never
/// leave the parser.
struct PacketRecord {
    double timestamp = 0.0; // seconds since epoch, source resolution
    uint32_t frame_len = 0; // original wire length
    uint32_t payload_len = 0;
    uint32_t src_ip = 0; // host byte order
    uint32_t dst_ip = 0;
    uint16_t src_port = 0;
    uint16_t dst_port = 0;
    uint8_t tcp_flags = 0;  // raw flag byte; 0 for UDP
    uint16_t tcp_window = 0; // advertised receiver window; 0 for UDP
    bool is_tcp = false;

    bool operator==(const PacketRecord&) const = default;
};

/// Decode the 24-byte global header. Throws UnknownMagic / Truncated.
PcapHeader parse_pcap_header(std::span<const uint8_t> bytes);

/// Streaming parser over a classic pcap byte stream. IPv4 TCP/UDP over
/// Ethernet only; one VLAN tag is unwrapped; everything else is skipped and
/// counted. Non-initial IP fragments are skipped. Parsing never reads past a
/// record's captured length.
class PcapReader {
public:
    explicit PcapReader(std::istream& in);

    /// Next decoded packet, or nullopt at clean end-of-stream.
    /// Throws Truncated on mid-record EOF and CorruptLength when a record
    /// claims more captured bytes than snaplen.
    std::optional<PacketRecord> next();

    const PcapHeader& header() const { return header_; }
    uint64_t skipped() const { return skipped_; }
    uint64_t records_seen() const { return records_seen_; }

private:
    std::istream& in_;
    PcapHeader header_;
    uint64_t skipped_ = 0;
    uint64_t records_seen_ = 0;
};

/// Write records as a microsecond-resolution little-endian pcap file and
/// return the byte count. Each record must satisfy
/// frame_len == 14 + 20 + (20 if TCP else 8) + payload_len so that parsing
/// the output reproduces every field exactly.
uint64_t write_pcap(std::span<const PacketRecord> records, std::ostream& out);

} // namespace aegis
