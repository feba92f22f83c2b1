#include <tracegrow/tar.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>

namespace tracegrow {

namespace {

constexpr std::size_t kBlock = 512;

void putOctal(std::uint8_t* field, std::size_t width, std::uint64_t value) {
    // width - 1 octal digits followed by NUL.
    std::snprintf(reinterpret_cast<char*>(field), width, "%0*llo", int(width - 1),
                  static_cast<unsigned long long>(value));
}

std::uint64_t getOctal(const std::uint8_t* field, std::size_t width) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width && field[i] >= '0' && field[i] <= '7'; ++i) {
        v = v * 8 + (field[i] - '0');
    }
    return v;
}

/// Header byte sum with the checksum field read as spaces.
unsigned headerChecksum(const std::uint8_t* header) {
    unsigned sum = 0;
    for (std::size_t i = 0; i < kBlock; ++i) {
        sum += (i >= 148 && i < 156) ? ' ' : header[i];
    }
    return sum;
}

} // namespace

Bytes writeTar(const std::vector<TarEntry>& entries) {
    Bytes out;
    for (const TarEntry& e : entries) {
        if (e.name.empty() || e.name.size() > 100) {
            throw Error(ErrorCode::InvalidArgument, "tar entry name must be 1-100 bytes");
        }
        std::array<std::uint8_t, kBlock> header{};
        std::memcpy(header.data(), e.name.data(), e.name.size());
        putOctal(header.data() + 100, 8, 0644);
        putOctal(header.data() + 108, 8, 0);
        putOctal(header.data() + 116, 8, 0);
        putOctal(header.data() + 124, 12, e.contents.size());
        putOctal(header.data() + 136, 12, 0);
        header[156] = '0';
        std::memcpy(header.data() + 257, "ustar", 6);
        header[263] = '0';
        header[264] = '0';
        std::snprintf(reinterpret_cast<char*>(header.data() + 148), 8, "%06o",
                      headerChecksum(header.data()));
        header[155] = ' ';

        out.insert(out.end(), header.begin(), header.end());
        out.insert(out.end(), e.contents.begin(), e.contents.end());
        out.resize((out.size() + kBlock - 1) / kBlock * kBlock, 0);
    }
    out.resize(out.size() + 2 * kBlock, 0);
    return out;
}

std::vector<TarEntry> readTar(std::span<const std::uint8_t> archive) {
    std::vector<TarEntry> out;
    std::size_t pos = 0;
    while (pos + kBlock <= archive.size()) {
        const std::uint8_t* h = archive.data() + pos;
        if (std::all_of(h, h + kBlock, [](std::uint8_t b) { return b == 0; })) {
            break;
        }
        if (getOctal(h + 148, 8) != headerChecksum(h)) {
            throw Error(ErrorCode::InvalidArgument, "tar header checksum mismatch");
        }
        const std::uint64_t size = getOctal(h + 124, 12);
        const auto nameLen = static_cast<std::size_t>(
            std::find(h, h + 100, std::uint8_t{0}) - h);
        pos += kBlock;
        if (pos + size > archive.size()) {
            throw Error(ErrorCode::InvalidArgument, "truncated tar archive");
        }
        if (h[156] == '0' || h[156] == 0) {
            out.push_back(TarEntry{std::string(reinterpret_cast<const char*>(h), nameLen),
                                   Bytes(archive.begin() + static_cast<std::ptrdiff_t>(pos),
                                         archive.begin() + static_cast<std::ptrdiff_t>(pos + size))});
        }
        pos += (size + kBlock - 1) / kBlock * kBlock;
    }
    return out;
}

} // namespace tracegrow
