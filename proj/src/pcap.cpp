#include "aegis/pcap.hpp"

#include <cmath>
#include <cstring>
#include <vector>

namespace aegis {

namespace {

constexpr uint32_t kMagicMicro = 0xa1b2c3d4u;
constexpr uint32_t kMagicMicroSwapped = 0xd4c3b2a1u;
constexpr uint32_t kMagicNano = 0xa1b23c4du;
constexpr uint32_t kMagicNanoSwapped = 0x4d3cb2a1u;

uint16_t le16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | p[1] << 8); }
uint32_t le32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
           static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}
uint16_t be16(const uint8_t* p) { return static_cast<uint16_t>(p[0] << 8 | p[1]); }
uint32_t be32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) << 24 | static_cast<uint32_t>(p[1]) << 16 |
           static_cast<uint32_t>(p[2]) << 8 | static_cast<uint32_t>(p[3]);
}
uint32_t bswap32(uint32_t v) {
    return v << 24 | (v & 0xff00u) << 8 | (v >> 8 & 0xff00u) | v >> 24;
}
uint16_t bswap16(uint16_t v) { return static_cast<uint16_t>(v << 8 | v >> 8); }

void put_le16(std::vector<uint8_t>& b, uint16_t v) {
    b.push_back(static_cast<uint8_t>(v));
    b.push_back(static_cast<uint8_t>(v >> 8));
}
void put_le32(std::vector<uint8_t>& b, uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<uint8_t>(v >> 8 * i));
}
void put_be16(std::vector<uint8_t>& b, uint16_t v) {
    b.push_back(static_cast<uint8_t>(v >> 8));
    b.push_back(static_cast<uint8_t>(v));
}
void put_be32(std::vector<uint8_t>& b, uint32_t v) {
    for (int i = 3; i >= 0; --i) b.push_back(static_cast<uint8_t>(v >> 8 * i));
}

constexpr uint16_t kEtherIpv4 = 0x0800;
constexpr uint16_t kEtherVlan = 0x8100;
constexpr uint8_t kProtoTcp = 6;
constexpr uint8_t kProtoUdp = 17;

} // namespace

PcapHeader parse_pcap_header(std::span<const uint8_t> bytes) {
    if (bytes.size() < 24) throw Error(ErrorCode::Truncated, "pcap global header needs 24 bytes");
    PcapHeader h;
    h.magic = le32(bytes.data());
    switch (h.magic) {
    case kMagicMicro:
        h.ts_resolution = PcapHeader::Resolution::micro;
        h.byte_order = PcapHeader::Order::same;
        break;
    case kMagicNano:
        h.ts_resolution = PcapHeader::Resolution::nano;
        h.byte_order = PcapHeader::Order::same;
        break;
    case kMagicMicroSwapped:
        h.ts_resolution = PcapHeader::Resolution::micro;
        h.byte_order = PcapHeader::Order::swapped;
        break;
    case kMagicNanoSwapped:
        h.ts_resolution = PcapHeader::Resolution::nano;
        h.byte_order = PcapHeader::Order::swapped;
        break;
    default:
        throw Error(ErrorCode::UnknownMagic, "not a pcap file");
    }
    const bool sw = h.byte_order == PcapHeader::Order::swapped;
    h.version_major = sw ? bswap16(le16(bytes.data() + 4)) : le16(bytes.data() + 4);
    h.version_minor = sw ? bswap16(le16(bytes.data() + 6)) : le16(bytes.data() + 6);
    h.snaplen = sw ? bswap32(le32(bytes.data() + 16)) : le32(bytes.data() + 16);
    h.link_type = sw ? bswap32(le32(bytes.data() + 20)) : le32(bytes.data() + 20);
    if (h.snaplen == 0) throw Error(ErrorCode::UnknownMagic, "pcap header has zero snaplen");
    return h;
}

PcapReader::PcapReader(std::istream& in) : in_(in) {
    uint8_t buf[24];
    in_.read(reinterpret_cast<char*>(buf), 24);
    if (in_.gcount() != 24) throw Error(ErrorCode::Truncated, "pcap global header truncated");
    header_ = parse_pcap_header(std::span<const uint8_t>(buf, 24));
}

std::optional<PacketRecord> PcapReader::next() {
    const bool sw = header_.byte_order == PcapHeader::Order::swapped;
    std::vector<uint8_t> frame;

    for (;;) {
        uint8_t rec[16];
        in_.read(reinterpret_cast<char*>(rec), 16);
        if (in_.gcount() == 0) return std::nullopt; // clean EOF at record boundary
        if (in_.gcount() != 16) throw Error(ErrorCode::Truncated, "pcap record header truncated");

        uint32_t ts_sec = le32(rec);
        uint32_t ts_sub = le32(rec + 4);
        uint32_t incl_len = le32(rec + 8);
        uint32_t orig_len = le32(rec + 12);
        if (sw) {
            ts_sec = bswap32(ts_sec);
            ts_sub = bswap32(ts_sub);
            incl_len = bswap32(incl_len);
            orig_len = bswap32(orig_len);
        }
        if (incl_len > header_.snaplen)
            throw Error(ErrorCode::CorruptLength, "captured length exceeds snaplen");

        ++records_seen_;
        frame.resize(incl_len);
        if (incl_len > 0) {
            in_.read(reinterpret_cast<char*>(frame.data()), incl_len);
            if (static_cast<uint32_t>(in_.gcount()) != incl_len)
                throw Error(ErrorCode::Truncated, "pcap record body truncated");
        }

        // Everything below is bounds-checked against incl_len only; inner
        // header length claims never extend reads past the captured bytes.
        const uint8_t* p = frame.data();
        size_t avail = frame.size();

        if (avail < 14) {
            ++skipped_;
            continue;
        }
        uint16_t ethertype = be16(p + 12);
        size_t link_hdr = 14;
        if (ethertype == kEtherVlan) {
            if (avail < 18) {
                ++skipped_;
                continue;
            }
            ethertype = be16(p + 16);
            link_hdr = 18;
        }
        if (ethertype != kEtherIpv4) {
            ++skipped_;
            continue;
        }
        if (avail < link_hdr + 20) {
            ++skipped_;
            continue;
        }
        const uint8_t* ip = p + link_hdr;
        if (ip[0] >> 4 != 4) {
            ++skipped_;
            continue;
        }
        size_t ip_hdr = static_cast<size_t>(ip[0] & 0x0f) * 4;
        if (ip_hdr < 20 || avail < link_hdr + ip_hdr) {
            ++skipped_;
            continue;
        }
        uint16_t frag = be16(ip + 6);
        if ((frag & 0x1fff) != 0) { // continuation fragment: no payload-ratio semantics
            ++skipped_;
            continue;
        }
        uint8_t proto = ip[9];
        if (proto != kProtoTcp && proto != kProtoUdp) {
            ++skipped_;
            continue;
        }

        PacketRecord out;
        out.src_ip = be32(ip + 12);
        out.dst_ip = be32(ip + 16);
        out.is_tcp = proto == kProtoTcp;

        const uint8_t* tr = ip + ip_hdr;
        size_t tr_avail = avail - link_hdr - ip_hdr;
        size_t tr_hdr = 0;
        if (out.is_tcp) {
            if (tr_avail < 20) {
                ++skipped_;
                continue;
            }
            tr_hdr = static_cast<size_t>(tr[12] >> 4) * 4;
            if (tr_hdr < 20 || tr_avail < tr_hdr) {
                ++skipped_;
                continue;
            }
            out.src_port = be16(tr);
            out.dst_port = be16(tr + 2);
            out.tcp_flags = tr[13];
            out.tcp_window = be16(tr + 14);
        } else {
            if (tr_avail < 8) {
                ++skipped_;
                continue;
            }
            tr_hdr = 8;
            out.src_port = be16(tr);
            out.dst_port = be16(tr + 2);
            out.tcp_flags = 0;
            out.tcp_window = 0;
        }

        const double sub_scale =
            header_.ts_resolution == PcapHeader::Resolution::nano ? 1e-9 : 1e-6;
        out.timestamp = static_cast<double>(ts_sec) + static_cast<double>(ts_sub) * sub_scale;
        out.frame_len = orig_len;
        const size_t headers = link_hdr + ip_hdr + tr_hdr;
        out.payload_len = orig_len > headers ? orig_len - static_cast<uint32_t>(headers) : 0;
        return out;
    }
}

uint64_t write_pcap(std::span<const PacketRecord> records, std::ostream& out) {
    if (records.empty()) throw Error(ErrorCode::InvalidArgument, "write_pcap: no records");

    std::vector<uint8_t> buf;
    buf.reserve(24);
    put_le32(buf, kMagicMicro);
    put_le16(buf, 2);
    put_le16(buf, 4);
    put_le32(buf, 0); // thiszone
    put_le32(buf, 0); // sigfigs
    put_le32(buf, 65535);
    put_le32(buf, 1); // LINKTYPE_ETHERNET
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    uint64_t written = buf.size();

    for (const PacketRecord& r : records) {
        const size_t tr_hdr = r.is_tcp ? 20 : 8;
        const size_t headers = 14 + 20 + tr_hdr;
        if (r.frame_len != headers + r.payload_len)
            throw Error(ErrorCode::InvalidArgument,
                        "write_pcap: frame_len inconsistent with header+payload arithmetic");

        double sec_floor = std::floor(r.timestamp);
        auto ts_sec = static_cast<uint64_t>(sec_floor);
        auto ts_usec = static_cast<uint32_t>(std::llround((r.timestamp - sec_floor) * 1e6));
        if (ts_usec >= 1000000u) {
            ts_usec -= 1000000u;
            ++ts_sec;
        }

        buf.clear();
        put_le32(buf, static_cast<uint32_t>(ts_sec));
        put_le32(buf, ts_usec);
        put_le32(buf, r.frame_len);
        put_le32(buf, r.frame_len);

        // Ethernet
        for (int i = 0; i < 12; ++i) buf.push_back(0);
        put_be16(buf, kEtherIpv4);
        // IPv4, header checksum left zero (not consumed by the parser)
        buf.push_back(0x45);
        buf.push_back(0);
        put_be16(buf, static_cast<uint16_t>(r.frame_len - 14));
        put_be16(buf, 0);         // identification
        put_be16(buf, 0x4000);    // don't-fragment, offset 0
        buf.push_back(64);        // ttl
        buf.push_back(r.is_tcp ? kProtoTcp : kProtoUdp);
        put_be16(buf, 0);         // checksum
        put_be32(buf, r.src_ip);
        put_be32(buf, r.dst_ip);
        if (r.is_tcp) {
            put_be16(buf, r.src_port);
            put_be16(buf, r.dst_port);
            put_be32(buf, 0); // seq
            put_be32(buf, 0); // ack
            buf.push_back(5 << 4);
            buf.push_back(r.tcp_flags);
            put_be16(buf, r.tcp_window);
            put_be16(buf, 0); // checksum
            put_be16(buf, 0); // urgent
        } else {
            put_be16(buf, r.src_port);
            put_be16(buf, r.dst_port);
            put_be16(buf, static_cast<uint16_t>(8 + r.payload_len));
            put_be16(buf, 0); // checksum
        }
        buf.resize(buf.size() + r.payload_len, 0);

        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
        written += buf.size();
    }
    if (!out) throw Error(ErrorCode::IoFailure, "write_pcap: sink failure");
    return written;
}

} // namespace aegis
