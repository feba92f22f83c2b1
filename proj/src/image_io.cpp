#include <tracegrow/image_io.h>

#include <png.h>
// jpeglib.h expects FILE and size_t to be declared first.
#include <cstdio>
#include <jpeglib.h>

#include <array>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tracegrow {

namespace {

// libpng and libjpeg report errors by longjmp. Every function below that calls
// setjmp holds only trivially destructible locals, so the jump never skips a
// destructor; C++ buffers are allocated by the callers between phases.

struct PngReadHandle {
    png_structp png = nullptr;
    png_infop info = nullptr;
    const std::uint8_t* data = nullptr;
    std::size_t size = 0;
    std::size_t pos = 0;
    std::array<char, 256> message{};

    explicit PngReadHandle(std::span<const std::uint8_t> bytes);
    ~PngReadHandle() { png_destroy_read_struct(&png, &info, nullptr); }
    PngReadHandle(const PngReadHandle&) = delete;
    PngReadHandle& operator=(const PngReadHandle&) = delete;
};

struct PngWriteHandle {
    png_structp png = nullptr;
    png_infop info = nullptr;
    Bytes* out = nullptr;
    std::array<char, 256> message{};

    explicit PngWriteHandle(Bytes& sink);
    ~PngWriteHandle() { png_destroy_write_struct(&png, &info); }
    PngWriteHandle(const PngWriteHandle&) = delete;
    PngWriteHandle& operator=(const PngWriteHandle&) = delete;
};

template <class Handle>
void onPngError(png_structp png, png_const_charp msg) {
    auto* h = static_cast<Handle*>(png_get_error_ptr(png));
    std::snprintf(h->message.data(), h->message.size(), "%s", msg);
    png_longjmp(png, 1);
}

void onPngWarning(png_structp, png_const_charp) {}

void onPngRead(png_structp png, png_bytep out, png_size_t n) {
    auto* h = static_cast<PngReadHandle*>(png_get_io_ptr(png));
    if (n > h->size - h->pos) {
        png_error(png, "unexpected end of PNG data");
    }
    std::memcpy(out, h->data + h->pos, n);
    h->pos += n;
}

void onPngWrite(png_structp png, png_bytep in, png_size_t n) {
    auto* h = static_cast<PngWriteHandle*>(png_get_io_ptr(png));
    h->out->insert(h->out->end(), in, in + n);
}

void onPngFlush(png_structp) {}

PngReadHandle::PngReadHandle(std::span<const std::uint8_t> bytes)
    : data(bytes.data()), size(bytes.size()) {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, this, &onPngError<PngReadHandle>,
                                 &onPngWarning);
    if (png) {
        info = png_create_info_struct(png);
    }
    if (!png || !info) {
        throw Error(ErrorCode::Io, "cannot allocate PNG reader");
    }
}

PngWriteHandle::PngWriteHandle(Bytes& sink) : out(&sink) {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, this, &onPngError<PngWriteHandle>,
                                  &onPngWarning);
    if (png) {
        info = png_create_info_struct(png);
    }
    if (!png || !info) {
        throw Error(ErrorCode::Io, "cannot allocate PNG writer");
    }
}

enum class PngTarget { Indices, Rgb, Gray16 };

struct PngHeader {
    png_uint_32 width = 0;
    png_uint_32 height = 0;
    int colorType = 0;
    int bitDepth = 0;
    std::size_t rowBytes = 0;
    int channels = 0;
    bool supported = true;
};

bool readPngHeader(PngReadHandle& h, PngTarget target, PngHeader& header) noexcept {
    if (setjmp(png_jmpbuf(h.png))) {
        return false;
    }
    png_set_read_fn(h.png, &h, &onPngRead);
    png_read_info(h.png, h.info);
    header.width = png_get_image_width(h.png, h.info);
    header.height = png_get_image_height(h.png, h.info);
    header.colorType = png_get_color_type(h.png, h.info);
    header.bitDepth = png_get_bit_depth(h.png, h.info);

    switch (target) {
        case PngTarget::Indices:
            if (header.colorType != PNG_COLOR_TYPE_PALETTE &&
                !(header.colorType == PNG_COLOR_TYPE_GRAY && header.bitDepth <= 8)) {
                header.supported = false;
                return true;
            }
            if (header.bitDepth < 8) {
                png_set_packing(h.png);
            }
            break;
        case PngTarget::Rgb:
            if (header.bitDepth == 16) {
                png_set_strip_16(h.png);
            }
            if (header.colorType == PNG_COLOR_TYPE_PALETTE) {
                png_set_palette_to_rgb(h.png);
            }
            if (header.colorType == PNG_COLOR_TYPE_GRAY ||
                header.colorType == PNG_COLOR_TYPE_GRAY_ALPHA) {
                if (header.bitDepth < 8) {
                    png_set_expand_gray_1_2_4_to_8(h.png);
                }
                png_set_gray_to_rgb(h.png);
            }
            png_set_strip_alpha(h.png);
            break;
        case PngTarget::Gray16:
            if (header.colorType != PNG_COLOR_TYPE_GRAY || header.bitDepth != 16) {
                header.supported = false;
                return true;
            }
            png_set_swap(h.png);
            break;
    }
    png_read_update_info(h.png, h.info);
    header.rowBytes = png_get_rowbytes(h.png, h.info);
    header.channels = png_get_channels(h.png, h.info);
    return true;
}

bool readPngRows(PngReadHandle& h, png_bytep* rows) noexcept {
    if (setjmp(png_jmpbuf(h.png))) {
        return false;
    }
    png_read_image(h.png, rows);
    png_read_end(h.png, nullptr);
    return true;
}

struct PngImageSpec {
    png_uint_32 width;
    png_uint_32 height;
    int bitDepth;
    int colorType;
    const png_color* palette;  // 256 entries when colorType is PALETTE
};

bool writePng(PngWriteHandle& h, const PngImageSpec& spec, png_bytep* rows) noexcept {
    if (setjmp(png_jmpbuf(h.png))) {
        return false;
    }
    png_set_write_fn(h.png, &h, &onPngWrite, &onPngFlush);
    png_set_IHDR(h.png, h.info, spec.width, spec.height, spec.bitDepth, spec.colorType,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    if (spec.colorType == PNG_COLOR_TYPE_PALETTE) {
        png_set_PLTE(h.png, h.info, spec.palette, 256);
    }
    png_write_info(h.png, h.info);
    if (spec.bitDepth == 16) {
        png_set_swap(h.png);
    }
    png_write_image(h.png, rows);
    png_write_end(h.png, nullptr);
    return true;
}

bool isPng(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

bool isJpeg(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF;
}

template <class T>
std::vector<png_bytep> rowPointers(std::vector<T>& buffer, std::size_t rowBytes,
                                   std::size_t height) {
    std::vector<png_bytep> rows(height);
    auto* base = reinterpret_cast<png_bytep>(buffer.data());
    for (std::size_t y = 0; y < height; ++y) {
        rows[y] = base + y * rowBytes;
    }
    return rows;
}

template <class T>
Bytes encodePlane(const Plane<T>& plane, int bitDepth, int colorType,
                  const png_color* palette = nullptr) {
    // libpng takes non-const row pointers even when writing.
    std::vector<T> copy(plane.values().begin(), plane.values().end());
    const std::size_t rowBytes = static_cast<std::size_t>(plane.width()) * sizeof(T);
    auto rows = rowPointers(copy, rowBytes, static_cast<std::size_t>(plane.height()));
    Bytes out;
    PngWriteHandle h(out);
    const PngImageSpec spec{static_cast<png_uint_32>(plane.width()),
                            static_cast<png_uint_32>(plane.height()), bitDepth, colorType,
                            palette};
    if (!writePng(h, spec, rows.data())) {
        throw Error(ErrorCode::Io, std::string("PNG encode failed: ") + h.message.data());
    }
    return out;
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void onJpegError(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

struct JpegHandle {
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};

    JpegHandle() {
        cinfo.err = jpeg_std_error(&err.base);
        err.base.error_exit = &onJpegError;
    }
    ~JpegHandle() { jpeg_destroy_decompress(&cinfo); }
    JpegHandle(const JpegHandle&) = delete;
    JpegHandle& operator=(const JpegHandle&) = delete;
};

bool readJpegHeader(JpegHandle& h, std::span<const std::uint8_t> bytes) noexcept {
    if (setjmp(h.err.jump)) {
        return false;
    }
    jpeg_create_decompress(&h.cinfo);
    jpeg_mem_src(&h.cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&h.cinfo, TRUE);
    h.cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&h.cinfo);
    return true;
}

bool readJpegRows(JpegHandle& h, std::uint8_t* out) noexcept {
    if (setjmp(h.err.jump)) {
        return false;
    }
    const std::size_t stride = static_cast<std::size_t>(h.cinfo.output_width) * 3;
    while (h.cinfo.output_scanline < h.cinfo.output_height) {
        JSAMPROW row = out + static_cast<std::size_t>(h.cinfo.output_scanline) * stride;
        jpeg_read_scanlines(&h.cinfo, &row, 1);
    }
    jpeg_finish_decompress(&h.cinfo);
    return true;
}

RgbImage decodeJpeg(std::span<const std::uint8_t> bytes) {
    JpegHandle h;
    if (!readJpegHeader(h, bytes)) {
        throw Error(ErrorCode::MalformedImage, std::string("JPEG: ") + h.err.message);
    }
    if (h.cinfo.output_components != 3) {
        throw Error(ErrorCode::MalformedImage, "JPEG: unsupported component count");
    }
    const int width = static_cast<int>(h.cinfo.output_width);
    const int height = static_cast<int>(h.cinfo.output_height);
    std::vector<Rgb> pixels(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    static_assert(sizeof(Rgb) == 3);
    if (!readJpegRows(h, reinterpret_cast<std::uint8_t*>(pixels.data()))) {
        throw Error(ErrorCode::MalformedImage, std::string("JPEG: ") + h.err.message);
    }
    return RgbImage(width, height, std::move(pixels));
}

const char kBase64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

} // namespace

Bytes encodeMaskPng(const Plane<std::uint8_t>& mask, const Palette& palette) {
    requirePaletteValues(mask, palette);
    std::array<png_color, 256> plte{};
    for (std::size_t i = 0; i < palette.size(); ++i) {
        const Rgb c = palette.colors()[i];
        plte[i] = png_color{c.r, c.g, c.b};
    }
    const Rgb v = palette.voidColor();
    plte[kUnlabeled] = png_color{v.r, v.g, v.b};
    return encodePlane(mask, 8, PNG_COLOR_TYPE_PALETTE, plte.data());
}

LabelMask decodeMaskPng(std::span<const std::uint8_t> bytes) {
    if (!isPng(bytes)) {
        throw Error(ErrorCode::MalformedPng, "missing PNG signature");
    }
    PngReadHandle h(bytes);
    PngHeader header;
    if (!readPngHeader(h, PngTarget::Indices, header)) {
        throw Error(ErrorCode::MalformedPng, std::string("PNG: ") + h.message.data());
    }
    if (!header.supported || header.channels != 1) {
        throw Error(ErrorCode::MalformedPng, "mask PNG must be indexed or 8-bit greyscale");
    }
    if (header.width == 0 || header.height == 0 ||
        header.rowBytes != static_cast<std::size_t>(header.width)) {
        throw Error(ErrorCode::MalformedPng, "unexpected mask PNG layout");
    }
    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(header.width) * header.height);
    auto rows = rowPointers(pixels, header.rowBytes, header.height);
    if (!readPngRows(h, rows.data())) {
        throw Error(ErrorCode::MalformedPng, std::string("PNG: ") + h.message.data());
    }
    return LabelMask(static_cast<int>(header.width), static_cast<int>(header.height),
                     std::move(pixels));
}

std::vector<Rgb> readPngPalette(std::span<const std::uint8_t> bytes) {
    if (!isPng(bytes)) {
        throw Error(ErrorCode::MalformedPng, "missing PNG signature");
    }
    PngReadHandle h(bytes);
    PngHeader header;
    if (!readPngHeader(h, PngTarget::Indices, header)) {
        throw Error(ErrorCode::MalformedPng, std::string("PNG: ") + h.message.data());
    }
    png_colorp entries = nullptr;
    int count = 0;
    std::vector<Rgb> out;
    if (png_get_PLTE(h.png, h.info, &entries, &count) & PNG_INFO_PLTE) {
        for (int i = 0; i < count; ++i) {
            out.push_back(Rgb{entries[i].red, entries[i].green, entries[i].blue});
        }
    }
    return out;
}

void requirePaletteValues(const Plane<std::uint8_t>& mask, const Palette& palette) {
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!palette.accepts(mask[i])) {
            throw Error(ErrorCode::UnknownCategoryValue,
                        "value " + std::to_string(mask[i]) + " at pixel " + std::to_string(i) +
                            " is not a palette category");
        }
    }
}

Bytes encodeRgbPng(const RgbImage& image) {
    return encodePlane(image, 8, PNG_COLOR_TYPE_RGB);
}

Bytes encodeGray8Png(const Plane<std::uint8_t>& plane) {
    return encodePlane(plane, 8, PNG_COLOR_TYPE_GRAY);
}

Bytes encodeGray16Png(const Plane<std::uint16_t>& plane) {
    return encodePlane(plane, 16, PNG_COLOR_TYPE_GRAY);
}

Plane<std::uint16_t> decodeGray16Png(std::span<const std::uint8_t> bytes) {
    if (!isPng(bytes)) {
        throw Error(ErrorCode::MalformedPng, "missing PNG signature");
    }
    PngReadHandle h(bytes);
    PngHeader header;
    if (!readPngHeader(h, PngTarget::Gray16, header) || !header.supported) {
        throw Error(ErrorCode::MalformedPng, "expected a 16-bit greyscale PNG");
    }
    std::vector<std::uint16_t> pixels(static_cast<std::size_t>(header.width) * header.height);
    auto rows = rowPointers(pixels, header.rowBytes, header.height);
    if (!readPngRows(h, rows.data())) {
        throw Error(ErrorCode::MalformedPng, std::string("PNG: ") + h.message.data());
    }
    return Plane<std::uint16_t>(static_cast<int>(header.width), static_cast<int>(header.height),
                                std::move(pixels));
}

RgbImage decodeRgbImage(std::span<const std::uint8_t> bytes) {
    if (isJpeg(bytes)) {
        return decodeJpeg(bytes);
    }
    if (!isPng(bytes)) {
        throw Error(ErrorCode::MalformedImage, "image is neither PNG nor JPEG");
    }
    PngReadHandle h(bytes);
    PngHeader header;
    if (!readPngHeader(h, PngTarget::Rgb, header) || header.channels != 3) {
        throw Error(ErrorCode::MalformedImage, std::string("PNG: ") + h.message.data());
    }
    std::vector<Rgb> pixels(static_cast<std::size_t>(header.width) * header.height);
    auto rows = rowPointers(pixels, header.rowBytes, header.height);
    if (!readPngRows(h, rows.data())) {
        throw Error(ErrorCode::MalformedImage, std::string("PNG: ") + h.message.data());
    }
    return RgbImage(static_cast<int>(header.width), static_cast<int>(header.height),
                    std::move(pixels));
}

Bytes readFile(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    }
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void writeFile(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    }
}

void writeFile(const std::filesystem::path& path, std::string_view text) {
    writeFile(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

RgbImage loadRgbImage(const std::filesystem::path& path) {
    return decodeRgbImage(readFile(path));
}

LabelMask loadMaskPng(const std::filesystem::path& path) {
    return decodeMaskPng(readFile(path));
}

std::string base64Encode(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (std::uint32_t(bytes[i]) << 16) |
                                (std::uint32_t(bytes[i + 1]) << 8) | bytes[i + 2];
        out += kBase64Alphabet[(v >> 18) & 63];
        out += kBase64Alphabet[(v >> 12) & 63];
        out += kBase64Alphabet[(v >> 6) & 63];
        out += kBase64Alphabet[v & 63];
    }
    if (i < bytes.size()) {
        std::uint32_t v = std::uint32_t(bytes[i]) << 16;
        if (i + 1 < bytes.size()) {
            v |= std::uint32_t(bytes[i + 1]) << 8;
        }
        out += kBase64Alphabet[(v >> 18) & 63];
        out += kBase64Alphabet[(v >> 12) & 63];
        out += i + 1 < bytes.size() ? kBase64Alphabet[(v >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

Bytes base64Decode(std::string_view text) {
    std::array<int, 256> lookup;
    lookup.fill(-1);
    for (int i = 0; i < 64; ++i) {
        lookup[static_cast<unsigned char>(kBase64Alphabet[i])] = i;
    }
    Bytes out;
    std::uint32_t acc = 0;
    int bits = 0;
    for (const char ch : text) {
        if (ch == '=') {
            break;
        }
        const int v = lookup[static_cast<unsigned char>(ch)];
        if (v < 0) {
            if (ch == '\n' || ch == '\r') {
                continue;
            }
            throw Error(ErrorCode::InvalidArgument, "invalid base64 character");
        }
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
        }
    }
    return out;
}

} // namespace tracegrow
