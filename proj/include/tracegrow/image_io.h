#pragma once

#include <tracegrow/image.h>
#include <tracegrow/trace.h>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace tracegrow {

using Bytes = std::vector<std::uint8_t>;

/// 8-bit indexed-colour PNG with a 256-entry PLTE chunk: category colours
/// from the palette, index 255 = void colour. Throws UnknownCategoryValue if a
/// value is neither a palette category nor kUnlabeled.
Bytes encodeMaskPng(const Plane<std::uint8_t>& mask, const Palette& palette);

/// Reads the palette indices of an indexed PNG (bit depth 1-8) or the grey
/// values of an 8-bit greyscale PNG. Throws MalformedPng.
LabelMask decodeMaskPng(std::span<const std::uint8_t> bytes);

/// Palette colours stored in an indexed PNG, in index order.
std::vector<Rgb> readPngPalette(std::span<const std::uint8_t> bytes);

/// Throws UnknownCategoryValue on the first value the palette does not cover.
void requirePaletteValues(const Plane<std::uint8_t>& mask, const Palette& palette);

Bytes encodeRgbPng(const RgbImage& image);
Bytes encodeGray8Png(const Plane<std::uint8_t>& plane);
Bytes encodeGray16Png(const Plane<std::uint16_t>& plane);
Plane<std::uint16_t> decodeGray16Png(std::span<const std::uint8_t> bytes);

/// PNG (any colour type) or JPEG, converted to 8-bit RGB. Throws MalformedImage.
RgbImage decodeRgbImage(std::span<const std::uint8_t> bytes);

Bytes readFile(const std::filesystem::path& path);
void writeFile(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void writeFile(const std::filesystem::path& path, std::string_view text);

RgbImage loadRgbImage(const std::filesystem::path& path);
LabelMask loadMaskPng(const std::filesystem::path& path);

std::string base64Encode(std::span<const std::uint8_t> bytes);
Bytes base64Decode(std::string_view text);

} // namespace tracegrow
