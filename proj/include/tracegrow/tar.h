#pragma once

#include <tracegrow/image_io.h>

#include <string>
#include <vector>

namespace tracegrow {

struct TarEntry {
    std::string name;
    Bytes contents;
};

/// Minimal POSIX ustar writer for regular files. Names are limited to 100 bytes.
Bytes writeTar(const std::vector<TarEntry>& entries);

/// Reads regular-file entries written by writeTar (or any plain ustar archive).
std::vector<TarEntry> readTar(std::span<const std::uint8_t> archive);

} // namespace tracegrow
