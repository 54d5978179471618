#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asbu/network.hpp"

namespace asbu {

// Container: "ASBU" | u32 version | u32 spec length + canonical spec text |
// weight table in topological order (u16 name length + name, u8 rank,
// u32 dims, payload) | trailing CRC-32 of all preceding bytes.
// Version 1 stores f32 payloads; version 2 is the quantized variant.
inline constexpr char kCheckpointMagic[4] = {'A', 'S', 'B', 'U'};
inline constexpr std::uint32_t kCheckpointVersionF32 = 1;
inline constexpr std::uint32_t kCheckpointVersionInt8 = 2;

std::vector<std::uint8_t> save_checkpoint_bytes(Network& net);
void save_checkpoint(Network& net, const std::string& path);

/// Rebuilds the network from the embedded spec and weight table. When
/// `expected` is given, a checkpoint for a different spec is rejected with a
/// shape-table mismatch.
Network load_checkpoint_bytes(const std::vector<std::uint8_t>& bytes,
                              const NetworkSpec* expected = nullptr);
Network load_checkpoint(const std::string& path, const NetworkSpec* expected = nullptr);

/// Validates CRC/magic and returns the format version.
std::uint32_t checkpoint_version(const std::string& path);

// Byte-level helpers shared with the quantized container.
class ByteWriter {
public:
    std::vector<std::uint8_t> bytes;

    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float v);
    void raw(const void* data, std::size_t n);
    void str(const std::string& s);  // u16 length + bytes
    void append_crc();
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& bytes) : b_(bytes) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32();
    void raw(void* out, std::size_t n);
    std::string str();
    std::size_t remaining() const { return b_.size() - pos_ - 4; }  // excludes CRC
    /// CRC + magic check; returns the version and leaves the cursor after it.
    std::uint32_t open_container();

private:
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace asbu
