#include "asbu/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <zlib.h>

namespace asbu {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format requires a little-endian host");

void ByteWriter::u16(std::uint16_t v) { raw(&v, 2); }
void ByteWriter::u32(std::uint32_t v) { raw(&v, 4); }
void ByteWriter::f32(float v) { raw(&v, 4); }

void ByteWriter::raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes.insert(bytes.end(), p, p + n);
}

void ByteWriter::str(const std::string& s) {
    if (s.size() > 0xffff) throw FormatError("checkpoint: name too long");
    u16(static_cast<std::uint16_t>(s.size()));
    raw(s.data(), s.size());
}

void ByteWriter::append_crc() {
    std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
                static_cast<uInt>(bytes.size())));
    u32(crc);
}

std::uint8_t ByteReader::u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
}
std::uint16_t ByteReader::u16() {
    std::uint16_t v;
    raw(&v, 2);
    return v;
}
std::uint32_t ByteReader::u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
}
float ByteReader::f32() {
    float v;
    raw(&v, 4);
    return v;
}

void ByteReader::raw(void* out, std::size_t n) {
    if (pos_ + n + 4 > b_.size()) {  // never read into the trailing CRC
        throw FormatError("checkpoint: truncated file");
    }
    std::memcpy(out, b_.data() + pos_, n);
    pos_ += n;
}

std::string ByteReader::str() {
    std::uint16_t n = u16();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
}

std::uint32_t ByteReader::open_container() {
    if (b_.size() < 12) {
        throw FormatError("checkpoint: truncated file");
    }
    std::uint32_t stored;
    std::memcpy(&stored, b_.data() + b_.size() - 4, 4);
    std::uint32_t actual = static_cast<std::uint32_t>(::crc32(
        0L, reinterpret_cast<const Bytef*>(b_.data()), static_cast<uInt>(b_.size() - 4)));
    if (stored != actual) {
        throw FormatError("checkpoint: CRC mismatch (corrupted file)");
    }
    char magic[4];
    raw(magic, 4);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw FormatError("checkpoint: bad magic bytes");
    }
    return u32();
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open file: " + path);
    f.seekg(0, std::ios::end);
    std::streamoff n = f.tellg();
    f.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
    f.read(reinterpret_cast<char*>(bytes.data()), n);
    if (!f) throw FormatError("failed to read file: " + path);
    return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open file for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw FormatError("failed to write file: " + path);
}

std::vector<std::uint8_t> save_checkpoint_bytes(Network& net) {
    ByteWriter w;
    w.raw(kCheckpointMagic, 4);
    w.u32(kCheckpointVersionF32);
    std::string spec_text = serialize_spec(net.spec);
    w.u32(static_cast<std::uint32_t>(spec_text.size()));
    w.raw(spec_text.data(), spec_text.size());

    visit_params(net, [&](const ParamView& p) {
        w.str(p.name);
        w.u8(static_cast<std::uint8_t>(p.dims.size()));
        for (std::uint32_t d : p.dims) w.u32(d);
        for (std::size_t i = 0; i < p.size; ++i) {
            w.f32(static_cast<float>(p.value[i]));
        }
    });
    w.append_crc();
    return std::move(w.bytes);
}

void save_checkpoint(Network& net, const std::string& path) {
    write_file_bytes(path, save_checkpoint_bytes(net));
}

Network load_checkpoint_bytes(const std::vector<std::uint8_t>& bytes,
                              const NetworkSpec* expected) {
    ByteReader r(bytes);
    std::uint32_t version = r.open_container();
    if (version != kCheckpointVersionF32) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersionF32) + ")");
    }
    std::uint32_t spec_len = r.u32();
    std::string spec_text(spec_len, '\0');
    r.raw(spec_text.data(), spec_len);
    NetworkSpec spec = parse_spec(spec_text);
    if (expected && !(spec == *expected)) {
        throw FormatError("checkpoint: shape-table mismatch (checkpoint spec differs from the "
                          "expected spec)");
    }

    Network net = build_network(spec, 0);
    visit_params(net, [&](const ParamView& p) {
        std::string name = r.str();
        if (name != p.name) {
            throw FormatError("checkpoint: shape-table mismatch at '" + name + "' (expected '" +
                              p.name + "')");
        }
        std::uint8_t rank = r.u8();
        if (rank != p.dims.size()) {
            throw FormatError("checkpoint: shape-table mismatch: rank of '" + name + "'");
        }
        std::size_t count = 1;
        for (std::uint8_t i = 0; i < rank; ++i) {
            std::uint32_t d = r.u32();
            if (d != p.dims[i]) {
                throw FormatError("checkpoint: shape-table mismatch: dims of '" + name + "'");
            }
            count *= d;
        }
        for (std::size_t i = 0; i < count; ++i) {
            p.value[i] = static_cast<double>(r.f32());
        }
    });
    if (r.remaining() != 0) {
        throw FormatError("checkpoint: trailing bytes after weight table");
    }
    return net;
}

Network load_checkpoint(const std::string& path, const NetworkSpec* expected) {
    return load_checkpoint_bytes(read_file_bytes(path), expected);
}

std::uint32_t checkpoint_version(const std::string& path) {
    std::vector<std::uint8_t> bytes = read_file_bytes(path);
    ByteReader r(bytes);
    return r.open_container();
}

}  // namespace asbu
