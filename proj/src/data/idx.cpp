#include "feddtg/data/idx.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "feddtg/error.hpp"

namespace feddtg::data {
namespace {

constexpr std::size_t kImageHeader = 16;
constexpr std::size_t kLabelHeader = 8;

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
           std::uint32_t{b[at + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::string hex32(std::uint32_t v) {
    std::ostringstream os;
    os << "0x" << std::hex;
    os.width(8);
    os.fill('0');
    os << v;
    return os.str();
}

void check_magic(std::uint32_t expected, std::uint32_t found, const char* kind) {
    if (expected != found) {
        throw FormatError(std::string("bad IDX ") + kind + " magic: expected " + hex32(expected) + ", found " + hex32(found));
    }
}

}  // namespace

std::uint8_t unit_to_pixel(double x) {
    const double v = std::round((x + 1.0) * 127.5);
    return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw LengthError("IDX image header", kImageHeader, bytes.size());
    check_magic(kIdxImageMagic, read_be32(bytes, 0), "image");
    if (bytes.size() < kImageHeader) throw LengthError("IDX image header", kImageHeader, bytes.size());
    const std::size_t count = read_be32(bytes, 4);
    const std::size_t rows = read_be32(bytes, 8);
    const std::size_t cols = read_be32(bytes, 12);
    const std::size_t payload = count * rows * cols;
    if (bytes.size() - kImageHeader < payload) {
        throw LengthError("IDX image payload", kImageHeader + payload, bytes.size());
    }
    if (bytes.size() - kImageHeader > payload) {
        throw FormatError("IDX image file has " + std::to_string(bytes.size() - kImageHeader - payload) +
                          " trailing bytes");
    }
    IdxImages out{rows, cols, nn::Tensor(count, rows * cols)};
    auto& px = out.pixels.data();
    for (std::size_t i = 0; i < payload; ++i) px[i] = pixel_to_unit(bytes[kImageHeader + i]);
    return out;
}

std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw LengthError("IDX label header", kLabelHeader, bytes.size());
    check_magic(kIdxLabelMagic, read_be32(bytes, 0), "label");
    if (bytes.size() < kLabelHeader) throw LengthError("IDX label header", kLabelHeader, bytes.size());
    const std::size_t count = read_be32(bytes, 4);
    if (bytes.size() - kLabelHeader < count) throw LengthError("IDX label payload", kLabelHeader + count, bytes.size());
    if (bytes.size() - kLabelHeader > count) {
        throw FormatError("IDX label file has " + std::to_string(bytes.size() - kLabelHeader - count) + " trailing bytes");
    }
    return {bytes.begin() + kLabelHeader, bytes.end()};
}

std::vector<std::uint8_t> serialize_idx_images(const IdxImages& images) {
    if (images.pixels.cols() != images.rows * images.cols) {
        throw DimensionError("IDX image width", images.rows * images.cols, images.pixels.cols());
    }
    std::vector<std::uint8_t> out;
    out.reserve(kImageHeader + images.pixels.size());
    write_be32(out, kIdxImageMagic);
    write_be32(out, static_cast<std::uint32_t>(images.count()));
    write_be32(out, static_cast<std::uint32_t>(images.rows));
    write_be32(out, static_cast<std::uint32_t>(images.cols));
    for (double v : images.pixels.data()) out.push_back(unit_to_pixel(v));
    return out;
}

std::vector<std::uint8_t> serialize_idx_labels(std::span<const int> labels) {
    std::vector<std::uint8_t> out;
    out.reserve(kLabelHeader + labels.size());
    write_be32(out, kIdxLabelMagic);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    for (int l : labels) {
        if (l < 0 || l > 255) throw ParameterError("IDX label " + std::to_string(l) + " does not fit in a byte");
        out.push_back(static_cast<std::uint8_t>(l));
    }
    return out;
}

bool is_gzip(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw FormatError("zlib initialisation failed");
    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    std::vector<std::uint8_t> out;
    std::uint8_t buf[1 << 16];
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = buf;
        zs.avail_out = sizeof(buf);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw FormatError("corrupt gzip stream (zlib code " + std::to_string(rc) + ")");
        }
        out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw LengthError("gzip stream", bytes.size() + 1, bytes.size());
        }
    }
    inflateEnd(&zs);
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (is_gzip(bytes)) return gunzip(bytes);
    return bytes;
}

}  // namespace feddtg::data
