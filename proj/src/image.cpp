#include "wsipat/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace wsipat {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
    if (width < 0 || height < 0) {
        throw FormatError("image dimensions must be non-negative");
    }
    data_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i + 2 < data_.size(); i += 3) {
        data_[i] = fill.r;
        data_[i + 1] = fill.g;
        data_[i + 2] = fill.b;
    }
}

Image Image::crop(int x, int y, int w, int h) const {
    if (x < 0 || y < 0 || w < 1 || h < 1 || x + w > width_ || y + h > height_) {
        throw FormatError("crop window outside image bounds");
    }
    Image out(w, h);
    for (int row = 0; row < h; ++row) {
        const std::uint8_t* src = data_.data() + offset(x, y + row);
        std::uint8_t* dst = out.data_.data() + out.offset(0, row);
        std::memcpy(dst, src, static_cast<std::size_t>(w) * 3);
    }
    return out;
}

double Image::mean_luminance() const {
    if (empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < data_.size(); i += 3) {
        sum += 0.299 * data_[i] + 0.587 * data_[i + 1] + 0.114 * data_[i + 2];
    }
    return sum / (static_cast<double>(width_) * height_);
}

Image scale_image(const Image& src, double scale) {
    if (!(scale > 0.0 && scale <= 1.0)) {
        throw FormatError("scale must lie in (0, 1]");
    }
    if (scale == 1.0) {
        return src;
    }
    const int out_w = std::max(1, static_cast<int>(std::lround(src.width() * scale)));
    const int out_h = std::max(1, static_cast<int>(std::lround(src.height() * scale)));
    Image out(out_w, out_h);
    for (int oy = 0; oy < out_h; ++oy) {
        // Source span [y0, y1) for this output row.
        int y0 = static_cast<int>(std::floor(oy / scale));
        int y1 = static_cast<int>(std::ceil((oy + 1) / scale));
        y0 = std::clamp(y0, 0, src.height() - 1);
        y1 = std::clamp(y1, y0 + 1, src.height());
        for (int ox = 0; ox < out_w; ++ox) {
            int x0 = static_cast<int>(std::floor(ox / scale));
            int x1 = static_cast<int>(std::ceil((ox + 1) / scale));
            x0 = std::clamp(x0, 0, src.width() - 1);
            x1 = std::clamp(x1, x0 + 1, src.width());
            double r = 0.0, g = 0.0, b = 0.0;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    const Rgb c = src.pixel(x, y);
                    r += c.r;
                    g += c.g;
                    b += c.b;
                }
            }
            const double n = static_cast<double>(y1 - y0) * (x1 - x0);
            out.set_pixel(ox, oy,
                          Rgb{static_cast<std::uint8_t>(std::lround(r / n)),
                              static_cast<std::uint8_t>(std::lround(g / n)),
                              static_cast<std::uint8_t>(std::lround(b / n))});
        }
    }
    return out;
}

// =============================================================================
// PNG
// =============================================================================

namespace {

constexpr std::array<std::uint8_t, 8> kPngSignature = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t read_u32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::uint8_t* data, std::size_t size) {
    put_u32(out, static_cast<std::uint32_t>(size));
    const std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    if (size > 0) {
        out.insert(out.end(), data, data + size);
    }
    const uLong crc = crc32(crc32(0L, nullptr, 0), out.data() + type_at, static_cast<uInt>(4 + size));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

std::vector<std::uint8_t> zlib_deflate(const std::uint8_t* data, std::size_t size) {
    uLongf bound = compressBound(static_cast<uLong>(size));
    std::vector<std::uint8_t> out(bound);
    if (compress2(out.data(), &bound, data, static_cast<uLong>(size), 6) != Z_OK) {
        throw ImageIoError("deflate failed");
    }
    out.resize(bound);
    return out;
}

std::vector<std::uint8_t> zlib_inflate(const std::uint8_t* data, std::size_t size,
                                       std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) {
        throw ImageIoError("inflate init failed");
    }
    zs.next_in = const_cast<Bytef*>(data);
    zs.avail_in = static_cast<uInt>(size);
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.avail_out != 0) {
        throw ImageIoError("PNG: corrupt or truncated compressed stream");
    }
    return out;
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a);
    const int pb = std::abs(p - b);
    const int pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) {
        return a;
    }
    return pb <= pc ? b : c;
}

struct PngHeader {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    int bit_depth = 0;
    int color_type = 0;
};

int samples_per_pixel(int color_type) {
    switch (color_type) {
        case 0: return 1; // gray
        case 2: return 3; // rgb
        case 3: return 1; // palette index
        case 4: return 2; // gray + alpha
        case 6: return 4; // rgba
        default: throw ImageIoError("PNG: unsupported color type " + std::to_string(color_type));
    }
}

} // namespace

std::vector<std::uint8_t> encode_png(const Image& image) {
    if (image.empty()) {
        throw ImageIoError("cannot encode an empty image");
    }
    const int w = image.width();
    const int h = image.height();

    // Filter 0 on every scanline; simple and deterministic.
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(h) * (1 + static_cast<std::size_t>(w) * 3));
    const std::uint8_t* src = image.bytes().data();
    for (int y = 0; y < h; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), src + static_cast<std::size_t>(y) * w * 3,
                   src + (static_cast<std::size_t>(y) + 1) * w * 3);
    }
    const std::vector<std::uint8_t> compressed = zlib_deflate(raw.data(), raw.size());

    std::vector<std::uint8_t> out(kPngSignature.begin(), kPngSignature.end());
    std::uint8_t ihdr[13];
    ihdr[0] = static_cast<std::uint8_t>(w >> 24);
    ihdr[1] = static_cast<std::uint8_t>(w >> 16);
    ihdr[2] = static_cast<std::uint8_t>(w >> 8);
    ihdr[3] = static_cast<std::uint8_t>(w);
    ihdr[4] = static_cast<std::uint8_t>(h >> 24);
    ihdr[5] = static_cast<std::uint8_t>(h >> 16);
    ihdr[6] = static_cast<std::uint8_t>(h >> 8);
    ihdr[7] = static_cast<std::uint8_t>(h);
    ihdr[8] = 8;  // bit depth
    ihdr[9] = 2;  // RGB
    ihdr[10] = 0; // deflate
    ihdr[11] = 0; // adaptive filtering
    ihdr[12] = 0; // no interlace
    append_chunk(out, "IHDR", ihdr, sizeof(ihdr));
    append_chunk(out, "IDAT", compressed.data(), compressed.size());
    append_chunk(out, "IEND", nullptr, 0);
    return out;
}

Image decode_png(const std::uint8_t* data, std::size_t size) {
    if (size < 8 || !std::equal(kPngSignature.begin(), kPngSignature.end(), data)) {
        throw ImageIoError("not a PNG stream");
    }
    PngHeader hdr;
    std::vector<std::uint8_t> idat;
    std::vector<Rgb> palette;
    bool seen_ihdr = false;
    bool seen_iend = false;

    std::size_t pos = 8;
    while (pos + 8 <= size && !seen_iend) {
        const std::uint32_t len = read_u32(data + pos);
        if (pos + 12 + static_cast<std::size_t>(len) > size) {
            throw ImageIoError("PNG: truncated chunk");
        }
        const char* type = reinterpret_cast<const char*>(data + pos + 4);
        const std::uint8_t* body = data + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) {
                throw ImageIoError("PNG: bad IHDR");
            }
            hdr.width = read_u32(body);
            hdr.height = read_u32(body + 4);
            hdr.bit_depth = body[8];
            hdr.color_type = body[9];
            if (body[12] != 0) {
                throw ImageIoError("PNG: interlaced images are not supported");
            }
            if (hdr.width == 0 || hdr.height == 0) {
                throw ImageIoError("PNG: zero dimension");
            }
            seen_ihdr = true;
        } else if (std::memcmp(type, "PLTE", 4) == 0) {
            if (len % 3 != 0) {
                throw ImageIoError("PNG: bad PLTE");
            }
            for (std::uint32_t i = 0; i < len; i += 3) {
                palette.push_back(Rgb{body[i], body[i + 1], body[i + 2]});
            }
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), body, body + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            seen_iend = true;
        }
        // Ancillary chunks are skipped.
        pos += 12 + len;
    }
    if (!seen_ihdr || idat.empty()) {
        throw ImageIoError("PNG: missing IHDR or IDAT");
    }

    const int spp = samples_per_pixel(hdr.color_type);
    if (hdr.color_type == 3) {
        if (palette.empty()) {
            throw ImageIoError("PNG: palette image without PLTE");
        }
        if (hdr.bit_depth != 1 && hdr.bit_depth != 2 && hdr.bit_depth != 4 && hdr.bit_depth != 8) {
            throw ImageIoError("PNG: unsupported palette bit depth");
        }
    } else if (hdr.bit_depth != 8 && hdr.bit_depth != 16) {
        if (hdr.color_type == 0 &&
            (hdr.bit_depth == 1 || hdr.bit_depth == 2 || hdr.bit_depth == 4)) {
            // low-depth grayscale handled below
        } else {
            throw ImageIoError("PNG: unsupported bit depth " + std::to_string(hdr.bit_depth));
        }
    }

    const std::size_t bits_per_pixel = static_cast<std::size_t>(spp) * hdr.bit_depth;
    const std::size_t row_bytes = (static_cast<std::size_t>(hdr.width) * bits_per_pixel + 7) / 8;
    const std::size_t filter_bpp = std::max<std::size_t>(1, bits_per_pixel / 8);
    const std::size_t expected = (row_bytes + 1) * hdr.height;

    std::vector<std::uint8_t> raw = zlib_inflate(idat.data(), idat.size(), expected);

    // Undo per-row filters in place.
    std::vector<std::uint8_t> prev(row_bytes, 0);
    std::vector<std::uint8_t> rows(row_bytes * hdr.height);
    for (std::uint32_t y = 0; y < hdr.height; ++y) {
        const std::uint8_t filter = raw[(row_bytes + 1) * y];
        const std::uint8_t* in = raw.data() + (row_bytes + 1) * y + 1;
        std::uint8_t* out = rows.data() + row_bytes * y;
        for (std::size_t i = 0; i < row_bytes; ++i) {
            const int a = i >= filter_bpp ? out[i - filter_bpp] : 0;
            const int b = prev[i];
            const int c = i >= filter_bpp ? prev[i - filter_bpp] : 0;
            int v = in[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw ImageIoError("PNG: unknown filter type");
            }
            out[i] = static_cast<std::uint8_t>(v);
        }
        std::memcpy(prev.data(), out, row_bytes);
    }

    Image image(static_cast<int>(hdr.width), static_cast<int>(hdr.height));
    auto sample_at = [&](const std::uint8_t* row, std::size_t index) -> int {
        // index counts samples across the row, depth-aware.
        if (hdr.bit_depth == 8) {
            return row[index];
        }
        if (hdr.bit_depth == 16) {
            return row[index * 2]; // high byte
        }
        const std::size_t bit = index * hdr.bit_depth;
        const std::uint8_t byte = row[bit / 8];
        const int shift = 8 - hdr.bit_depth - static_cast<int>(bit % 8);
        const int mask = (1 << hdr.bit_depth) - 1;
        return (byte >> shift) & mask;
    };
    const int depth_max = hdr.bit_depth >= 8 ? 255 : (1 << hdr.bit_depth) - 1;

    for (std::uint32_t y = 0; y < hdr.height; ++y) {
        const std::uint8_t* row = rows.data() + row_bytes * y;
        for (std::uint32_t x = 0; x < hdr.width; ++x) {
            Rgb c;
            switch (hdr.color_type) {
                case 0: {
                    const int g = sample_at(row, x) * 255 / depth_max;
                    c = Rgb{static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(g),
                            static_cast<std::uint8_t>(g)};
                    break;
                }
                case 2: {
                    c = Rgb{static_cast<std::uint8_t>(sample_at(row, x * 3)),
                            static_cast<std::uint8_t>(sample_at(row, x * 3 + 1)),
                            static_cast<std::uint8_t>(sample_at(row, x * 3 + 2))};
                    break;
                }
                case 3: {
                    const std::size_t idx = static_cast<std::size_t>(sample_at(row, x));
                    if (idx >= palette.size()) {
                        throw ImageIoError("PNG: palette index out of range");
                    }
                    c = palette[idx];
                    break;
                }
                case 4: {
                    const int g = sample_at(row, x * 2);
                    c = Rgb{static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(g),
                            static_cast<std::uint8_t>(g)};
                    break;
                }
                case 6: {
                    c = Rgb{static_cast<std::uint8_t>(sample_at(row, x * 4)),
                            static_cast<std::uint8_t>(sample_at(row, x * 4 + 1)),
                            static_cast<std::uint8_t>(sample_at(row, x * 4 + 2))};
                    break;
                }
                default:
                    throw ImageIoError("PNG: unsupported color type");
            }
            image.set_pixel(static_cast<int>(x), static_cast<int>(y), c);
        }
    }
    return image;
}

// =============================================================================
// Baseline TIFF (uncompressed, chunky, 8-bit)
// =============================================================================

namespace {

struct TiffReader {
    const std::uint8_t* data;
    std::size_t size;
    bool little_endian;

    std::uint16_t u16(std::size_t at) const {
        check(at, 2);
        return little_endian
                   ? static_cast<std::uint16_t>(data[at] | (data[at + 1] << 8))
                   : static_cast<std::uint16_t>((data[at] << 8) | data[at + 1]);
    }
    std::uint32_t u32(std::size_t at) const {
        check(at, 4);
        if (little_endian) {
            return static_cast<std::uint32_t>(data[at]) |
                   (static_cast<std::uint32_t>(data[at + 1]) << 8) |
                   (static_cast<std::uint32_t>(data[at + 2]) << 16) |
                   (static_cast<std::uint32_t>(data[at + 3]) << 24);
        }
        return (static_cast<std::uint32_t>(data[at]) << 24) |
               (static_cast<std::uint32_t>(data[at + 1]) << 16) |
               (static_cast<std::uint32_t>(data[at + 2]) << 8) |
               static_cast<std::uint32_t>(data[at + 3]);
    }
    void check(std::size_t at, std::size_t n) const {
        if (at + n > size) {
            throw ImageIoError("TIFF: truncated file");
        }
    }
};

constexpr std::uint16_t kTagWidth = 256;
constexpr std::uint16_t kTagHeight = 257;
constexpr std::uint16_t kTagBitsPerSample = 258;
constexpr std::uint16_t kTagCompression = 259;
constexpr std::uint16_t kTagPhotometric = 262;
constexpr std::uint16_t kTagStripOffsets = 273;
constexpr std::uint16_t kTagSamplesPerPixel = 277;
constexpr std::uint16_t kTagRowsPerStrip = 278;
constexpr std::uint16_t kTagStripByteCounts = 279;
constexpr std::uint16_t kTagPlanarConfig = 284;

Image decode_tiff(const std::uint8_t* data, std::size_t size) {
    if (size < 8) {
        throw ImageIoError("TIFF: truncated header");
    }
    bool little;
    if (data[0] == 'I' && data[1] == 'I') {
        little = true;
    } else if (data[0] == 'M' && data[1] == 'M') {
        little = false;
    } else {
        throw ImageIoError("not a TIFF stream");
    }
    const TiffReader r{data, size, little};
    if (r.u16(2) != 42) {
        throw ImageIoError("TIFF: bad magic");
    }
    const std::uint32_t ifd = r.u32(4);
    const std::uint16_t entries = r.u16(ifd);

    std::uint32_t width = 0, height = 0, rows_per_strip = 0xFFFFFFFFu;
    std::uint16_t compression = 1, photometric = 2, spp = 1, planar = 1;
    std::vector<std::uint32_t> strip_offsets, strip_counts;
    std::vector<std::uint16_t> bits;

    for (std::uint16_t i = 0; i < entries; ++i) {
        const std::size_t at = ifd + 2 + static_cast<std::size_t>(i) * 12;
        const std::uint16_t tag = r.u16(at);
        const std::uint16_t type = r.u16(at + 2);
        const std::uint32_t count = r.u32(at + 4);

        auto value_at = [&](std::uint32_t index) -> std::uint32_t {
            const std::size_t unit = type == 3 ? 2 : 4; // SHORT or LONG
            const std::size_t total = unit * count;
            std::size_t base = at + 8;
            if (total > 4) {
                base = r.u32(at + 8);
            }
            return unit == 2 ? r.u16(base + index * 2) : r.u32(base + index * 4);
        };

        switch (tag) {
            case kTagWidth: width = value_at(0); break;
            case kTagHeight: height = value_at(0); break;
            case kTagBitsPerSample:
                for (std::uint32_t k = 0; k < count; ++k) {
                    bits.push_back(static_cast<std::uint16_t>(value_at(k)));
                }
                break;
            case kTagCompression: compression = static_cast<std::uint16_t>(value_at(0)); break;
            case kTagPhotometric: photometric = static_cast<std::uint16_t>(value_at(0)); break;
            case kTagStripOffsets:
                for (std::uint32_t k = 0; k < count; ++k) {
                    strip_offsets.push_back(value_at(k));
                }
                break;
            case kTagSamplesPerPixel: spp = static_cast<std::uint16_t>(value_at(0)); break;
            case kTagRowsPerStrip: rows_per_strip = value_at(0); break;
            case kTagStripByteCounts:
                for (std::uint32_t k = 0; k < count; ++k) {
                    strip_counts.push_back(value_at(k));
                }
                break;
            case kTagPlanarConfig: planar = static_cast<std::uint16_t>(value_at(0)); break;
            default: break;
        }
    }

    if (width == 0 || height == 0 || strip_offsets.empty()) {
        throw ImageIoError("TIFF: missing required tags");
    }
    if (compression != 1) {
        throw ImageIoError("TIFF: only uncompressed baseline TIFF is supported");
    }
    if (planar != 1) {
        throw ImageIoError("TIFF: planar configuration 2 is not supported");
    }
    for (std::uint16_t b : bits) {
        if (b != 8) {
            throw ImageIoError("TIFF: only 8 bits per sample is supported");
        }
    }
    if (spp != 1 && spp != 3 && spp != 4) {
        throw ImageIoError("TIFF: unsupported samples per pixel");
    }
    if (photometric != 1 && photometric != 2 && photometric != 0) {
        throw ImageIoError("TIFF: unsupported photometric interpretation");
    }

    Image image(static_cast<int>(width), static_cast<int>(height));
    const std::size_t row_bytes = static_cast<std::size_t>(width) * spp;
    std::uint32_t row = 0;
    for (std::size_t s = 0; s < strip_offsets.size() && row < height; ++s) {
        const std::uint32_t strip_rows = std::min<std::uint32_t>(rows_per_strip, height - row);
        r.check(strip_offsets[s], row_bytes * strip_rows);
        const std::uint8_t* strip = data + strip_offsets[s];
        for (std::uint32_t k = 0; k < strip_rows; ++k, ++row) {
            const std::uint8_t* line = strip + row_bytes * k;
            for (std::uint32_t x = 0; x < width; ++x) {
                Rgb c;
                if (spp == 1) {
                    std::uint8_t g = line[x];
                    if (photometric == 0) {
                        g = static_cast<std::uint8_t>(255 - g); // min-is-white
                    }
                    c = Rgb{g, g, g};
                } else {
                    c = Rgb{line[x * spp], line[x * spp + 1], line[x * spp + 2]};
                }
                image.set_pixel(static_cast<int>(x), static_cast<int>(row), c);
            }
        }
    }
    return image;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file: " + path);
    }
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    return data;
}

} // namespace

void save_png(const Image& image, const std::string& path) {
    const std::vector<std::uint8_t> bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open file for writing: " + path);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("short write: " + path);
    }
}

Image load_image(const std::string& path) {
    const std::vector<std::uint8_t> data = read_file(path);
    if (data.size() >= 8 && std::equal(kPngSignature.begin(), kPngSignature.end(), data.data())) {
        return decode_png(data.data(), data.size());
    }
    if (data.size() >= 4 && ((data[0] == 'I' && data[1] == 'I') || (data[0] == 'M' && data[1] == 'M'))) {
        return decode_tiff(data.data(), data.size());
    }
    throw ImageIoError("unrecognized image format: " + path);
}

// =============================================================================
// base64
// =============================================================================

namespace {
constexpr char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const std::uint8_t* data, std::size_t size) {
    std::string out;
    out.reserve((size + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= size; i += 3) {
        const std::uint32_t v = (static_cast<std::uint32_t>(data[i]) << 16) |
                                (static_cast<std::uint32_t>(data[i + 1]) << 8) | data[i + 2];
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back(kB64Alphabet[v & 63]);
    }
    const std::size_t rest = size - i;
    if (rest == 1) {
        const std::uint32_t v = static_cast<std::uint32_t>(data[i]) << 16;
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back('=');
        out.push_back('=');
    } else if (rest == 2) {
        const std::uint32_t v = (static_cast<std::uint32_t>(data[i]) << 16) |
                                (static_cast<std::uint32_t>(data[i + 1]) << 8);
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    std::array<int, 256> lut;
    lut.fill(-1);
    for (int i = 0; i < 64; ++i) {
        lut[static_cast<unsigned char>(kB64Alphabet[i])] = i;
    }
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    std::uint32_t acc = 0;
    int bits = 0;
    for (char ch : text) {
        if (ch == '=' || ch == '\n' || ch == '\r') {
            continue;
        }
        const int v = lut[static_cast<unsigned char>(ch)];
        if (v < 0) {
            throw FormatError("invalid base64 character");
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

} // namespace wsipat
