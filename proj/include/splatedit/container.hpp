#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace splatedit {

/// Sectioned little-endian binary container used for scene snapshots and
/// editor checkpoints.
///
/// Layout:
///   magic   8 bytes  "SPLTCNT1"
///   version u32
///   count   u32      number of sections
///   then per section:
///     name    16 bytes, zero padded
///     length  u64     payload bytes
///     crc32   u32     CRC-32 of the payload
///     payload
struct ContainerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ContainerFormatError : ContainerError {
    using ContainerError::ContainerError;
};
struct ContainerVersionError : ContainerError {
    using ContainerError::ContainerError;
};
struct ContainerTruncatedError : ContainerError {
    using ContainerError::ContainerError;
};
struct ContainerChecksumError : ContainerError {
    using ContainerError::ContainerError;
};

struct ContainerSection {
    std::string name;
    std::vector<std::uint8_t> bytes;
};

inline constexpr std::uint32_t kContainerVersion = 1;

void write_container(const std::string& path, const std::vector<ContainerSection>& sections);
std::vector<ContainerSection> read_container(const std::string& path);

const ContainerSection& find_section(const std::vector<ContainerSection>& sections,
                                     const std::string& name);

// Payload packing helpers (little-endian f64 / i64).
void pack_f64(std::vector<std::uint8_t>& out, const double* values, std::size_t count);
std::vector<double> unpack_f64(const ContainerSection& section);
void pack_i64(std::vector<std::uint8_t>& out, const std::int64_t* values, std::size_t count);
std::vector<std::int64_t> unpack_i64(const ContainerSection& section);

}  // namespace splatedit
