#include "organct/vvol.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace organct {
namespace {

using json = nlohmann::json;

constexpr char kMagic[5] = {'V', 'V', 'O', 'L', '1'};

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    return data;
}

bool is_gzip(const std::vector<std::uint8_t>& d) {
    return d.size() >= 2 && d[0] == 0x1f && d[1] == 0x8b;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
        throw DataError("zlib inflate init failed");
    std::vector<std::uint8_t> out;
    out.resize(std::max<std::size_t>(in.size() * 4, 1 << 16));
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    std::size_t written = 0;
    int rc = Z_OK;
    do {
        if (written == out.size()) out.resize(out.size() * 2);
        zs.next_out = out.data() + written;
        zs.avail_out = static_cast<uInt>(out.size() - written);
        rc = inflate(&zs, Z_NO_FLUSH);
        written = out.size() - zs.avail_out;
    } while (rc == Z_OK);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END) throw DataError("gzip payload is corrupt");
    out.resize(written);
    return out;
}

std::vector<std::uint8_t> gzip_bytes(const std::vector<std::uint8_t>& in) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_BEST_SPEED, Z_DEFLATED, 16 + MAX_WBITS, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK)
        throw DataError("zlib deflate init failed");
    std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(in.size())));
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    if (deflate(&zs, Z_FINISH) != Z_STREAM_END) {
        deflateEnd(&zs);
        throw DataError("gzip compression failed");
    }
    out.resize(zs.total_out);
    deflateEnd(&zs);
    return out;
}

struct ParsedHeader {
    Dims dims;
    Spacing spacing;
    std::string dtype;
    std::string kind;
    std::map<std::uint16_t, std::string> labels;
    std::size_t payload_offset = 0;
};

ParsedHeader parse_header(const std::vector<std::uint8_t>& d) {
    if (d.size() < 5 || std::memcmp(d.data(), kMagic, 5) != 0)
        throw VvolFormatError("bad magic, expected VVOL1", 0);
    if (d.size() < 9) throw VvolFormatError("truncated header length field", 5);
    std::uint32_t hlen = 0;
    std::memcpy(&hlen, d.data() + 5, 4);  // little-endian host assumed
    if (d.size() < 9 + std::size_t(hlen))
        throw VvolFormatError("truncated JSON header", 9);
    json h;
    try {
        h = json::parse(d.begin() + 9, d.begin() + 9 + hlen);
    } catch (const json::exception& e) {
        throw VvolFormatError(std::string("invalid JSON header: ") + e.what(), 9);
    }
    ParsedHeader ph;
    try {
        ph.dims = {h.at("dims").at(0).get<int>(), h.at("dims").at(1).get<int>(),
                   h.at("dims").at(2).get<int>()};
        ph.spacing = {h.at("spacing").at(0).get<double>(),
                      h.at("spacing").at(1).get<double>(),
                      h.at("spacing").at(2).get<double>()};
        ph.dtype = h.at("dtype").get<std::string>();
        ph.kind = h.at("kind").get<std::string>();
        if (h.contains("labels"))
            for (auto& [k, v] : h.at("labels").items())
                ph.labels[static_cast<std::uint16_t>(std::stoul(k))] = v.get<std::string>();
    } catch (const json::exception& e) {
        throw VvolFormatError(std::string("header field error: ") + e.what(), 9);
    }
    if (ph.dims.nx < 1 || ph.dims.ny < 1 || ph.dims.nz < 1)
        throw VvolFormatError("dims must all be >= 1", 9);
    ph.payload_offset = 9 + hlen;
    return ph;
}

void check_payload(const std::vector<std::uint8_t>& d, const ParsedHeader& ph) {
    const std::size_t expected = ph.dims.count() * 2;
    const std::size_t actual = d.size() - ph.payload_offset;
    if (actual < expected)
        throw VvolFormatError("truncated payload: expected " + std::to_string(expected) +
                                  " bytes, got " + std::to_string(actual),
                              ph.payload_offset + actual);
    if (actual > expected)
        throw VvolFormatError("header/payload size mismatch: " + std::to_string(actual - expected) +
                                  " trailing bytes",
                              ph.payload_offset + expected);
}

std::vector<std::uint8_t> serialize(const Dims& dims, const Spacing& sp,
                                    const std::string& dtype, const std::string& kind,
                                    const std::map<std::uint16_t, std::string>* labels,
                                    const void* payload, std::size_t payload_bytes) {
    json h;
    h["dims"] = {dims.nx, dims.ny, dims.nz};
    h["spacing"] = {sp.sx, sp.sy, sp.sz};
    h["dtype"] = dtype;
    h["kind"] = kind;
    if (labels) {
        json l = json::object();
        for (auto& [id, name] : *labels) l[std::to_string(id)] = name;
        h["labels"] = l;
    }
    const std::string hs = h.dump();
    std::vector<std::uint8_t> out;
    out.reserve(9 + hs.size() + payload_bytes);
    out.insert(out.end(), kMagic, kMagic + 5);
    const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
    out.insert(out.end(), reinterpret_cast<const std::uint8_t*>(&hlen),
               reinterpret_cast<const std::uint8_t*>(&hlen) + 4);
    out.insert(out.end(), hs.begin(), hs.end());
    out.insert(out.end(), static_cast<const std::uint8_t*>(payload),
               static_cast<const std::uint8_t*>(payload) + payload_bytes);
    return out;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& data,
                bool gzipped) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path.string());
    if (gzipped) {
        auto z = gzip_bytes(data);
        out.write(reinterpret_cast<const char*>(z.data()), z.size());
    } else {
        out.write(reinterpret_cast<const char*>(data.data()), data.size());
    }
}

}  // namespace

std::uint16_t SegMask::id_of(const std::string& organ) const {
    for (auto& [id, name] : label_table)
        if (name == organ) return id;
    return 0;
}

std::vector<std::string> SegMask::present_organs() const {
    std::vector<bool> seen(65536, false);
    for (auto l : labels) seen[l] = true;
    std::vector<std::string> out;
    for (auto& [id, name] : label_table)
        if (id != 0 && seen[id]) out.push_back(name);
    return out;
}

Volume load_volume(const std::filesystem::path& path) {
    auto d = read_bytes(path);
    if (is_gzip(d)) d = gunzip(d);
    auto ph = parse_header(d);
    if (ph.dtype != "i16")
        throw VvolFormatError("volume dtype must be i16, got " + ph.dtype, 9);
    check_payload(d, ph);
    Volume v;
    v.dims = ph.dims;
    v.spacing = ph.spacing;
    v.voxels.resize(ph.dims.count());
    std::memcpy(v.voxels.data(), d.data() + ph.payload_offset, v.voxels.size() * 2);
    return v;
}

SegMask load_mask(const std::filesystem::path& path) {
    auto d = read_bytes(path);
    if (is_gzip(d)) d = gunzip(d);
    auto ph = parse_header(d);
    if (ph.dtype != "u16")
        throw VvolFormatError("mask dtype must be u16, got " + ph.dtype, 9);
    check_payload(d, ph);
    SegMask m;
    m.dims = ph.dims;
    m.spacing = ph.spacing;
    m.label_table = ph.labels;
    m.labels.resize(ph.dims.count());
    std::memcpy(m.labels.data(), d.data() + ph.payload_offset, m.labels.size() * 2);
    for (auto l : m.labels)
        if (l != 0 && !m.label_table.count(l))
            throw DataError("mask voxel label " + std::to_string(l) +
                            " missing from label_table in " + path.string());
    return m;
}

void write_volume(const std::filesystem::path& path, const Volume& v, bool gzipped) {
    auto bytes = serialize(v.dims, v.spacing, "i16", "volume", nullptr, v.voxels.data(),
                           v.voxels.size() * 2);
    write_file(path, bytes, gzipped);
}

void write_mask(const std::filesystem::path& path, const SegMask& m, bool gzipped) {
    auto bytes = serialize(m.dims, m.spacing, "u16", "mask", &m.label_table,
                           m.labels.data(), m.labels.size() * 2);
    write_file(path, bytes, gzipped);
}

}  // namespace organct
