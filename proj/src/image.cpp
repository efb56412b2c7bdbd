#include "auprobe/image.hpp"

#include "auprobe/error.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace auprobe {

namespace {

enum class Format { pgm, png, unknown };

Format sniff(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image " + path.string());
    std::array<unsigned char, 8> magic{};
    in.read(reinterpret_cast<char*>(magic.data()), magic.size());
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got >= 8 && png_sig_cmp(magic.data(), 0, 8) == 0) return Format::png;
    if (got >= 2 && magic[0] == 'P' && (magic[1] == '5' || magic[1] == '2')) return Format::pgm;
    return Format::unknown;
}

// Next whitespace-delimited token of a PGM header, skipping '#' comments.
bool pgm_token(std::istream& in, std::string& token) {
    token.clear();
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (!std::isspace(c)) break;
    }
    if (c == EOF) return false;
    token.push_back(static_cast<char>(c));
    while ((c = in.peek()) != EOF && !std::isspace(c) && c != '#') token.push_back(static_cast<char>(in.get()));
    return true;
}

struct PgmHeader {
    bool binary = true;
    std::size_t width = 0, height = 0;
    unsigned maxval = 255;
};

PgmHeader read_pgm_header(std::istream& in, const std::filesystem::path& path) {
    std::string magic, w, h, m;
    if (!pgm_token(in, magic) || !pgm_token(in, w) || !pgm_token(in, h) || !pgm_token(in, m))
        throw DataError("truncated PGM header in " + path.string());
    PgmHeader header;
    if (magic == "P5")
        header.binary = true;
    else if (magic == "P2")
        header.binary = false;
    else
        throw DataError("not a grayscale PGM: " + path.string());
    try {
        header.width = std::stoul(w);
        header.height = std::stoul(h);
        header.maxval = static_cast<unsigned>(std::stoul(m));
    } catch (const std::exception&) {
        throw DataError("malformed PGM header in " + path.string());
    }
    if (header.width == 0 || header.height == 0 || header.maxval == 0 || header.maxval > 65535)
        throw DataError("invalid PGM dimensions in " + path.string());
    return header;
}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* file = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (file) std::fclose(file);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* file = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (file) std::fclose(file);
    }
};

thread_local std::string png_last_error;

[[noreturn]] void png_error_capture(png_structp png, png_const_charp message) {
    png_last_error = message ? message : "unknown error";
    png_longjmp(png, 1);
}
void png_warning_ignore(png_structp, png_const_charp) {}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image " + path.string());
    const PgmHeader header = read_pgm_header(in, path);
    GrayImage image(header.width, header.height);
    const std::size_t count = header.width * header.height;
    auto rescale = [&](unsigned v) {
        return static_cast<std::uint8_t>(std::lround(255.0 * std::min(v, header.maxval) / header.maxval));
    };
    if (header.binary) {
        in.get();  // single whitespace after maxval
        const std::size_t bytes = header.maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(count * bytes);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw DataError("truncated PGM data in " + path.string());
        for (std::size_t i = 0; i < count; ++i) {
            const unsigned v = bytes == 2 ? (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
            image.pixels[i] = header.maxval == 255 ? static_cast<std::uint8_t>(v) : rescale(v);
        }
    } else {
        std::string token;
        for (std::size_t i = 0; i < count; ++i) {
            if (!pgm_token(in, token)) throw DataError("truncated PGM data in " + path.string());
            image.pixels[i] = rescale(static_cast<unsigned>(std::stoul(token)));
        }
    }
    return image;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image " + path.string());
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw DataError("failed writing " + path.string());
}

GrayImage read_png(const std::filesystem::path& path) {
    PngReader r;
    r.file = std::fopen(path.string().c_str(), "rb");
    if (!r.file) throw DataError("cannot open image " + path.string());
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_capture, png_warning_ignore);
    if (!r.png) throw DataError("png: out of memory");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw DataError("png: out of memory");
    GrayImage image;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(r.png))) throw DataError("png: " + png_last_error + " in " + path.string());
    png_init_io(r.png, r.file);
    png_read_info(r.png, r.info);

    const auto color = png_get_color_type(r.png, r.info);
    const auto depth = png_get_bit_depth(r.png, r.info);
    if (depth == 16) png_set_strip_16(r.png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(r.png, 1, -1, -1);
    png_read_update_info(r.png, r.info);

    image = GrayImage(png_get_image_width(r.png, r.info), png_get_image_height(r.png, r.info));
    if (png_get_rowbytes(r.png, r.info) != image.width) png_error(r.png, "unsupported pixel layout");
    rows.resize(image.height);
    for (std::size_t y = 0; y < image.height; ++y) rows[y] = image.pixels.data() + y * image.width;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return image;
}

void write_png(const GrayImage& image, const std::filesystem::path& path) {
    PngWriter w;
    w.file = std::fopen(path.string().c_str(), "wb");
    if (!w.file) throw DataError("cannot write image " + path.string());
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_capture, png_warning_ignore);
    if (!w.png) throw DataError("png: out of memory");
    w.info = png_create_info_struct(w.png);
    if (!w.info) throw DataError("png: out of memory");
    if (setjmp(png_jmpbuf(w.png))) throw DataError("png: " + png_last_error + " writing " + path.string());
    png_init_io(w.png, w.file);
    png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    for (std::size_t y = 0; y < image.height; ++y)
        png_write_row(w.png, const_cast<png_bytep>(image.pixels.data() + y * image.width));
    png_write_end(w.png, nullptr);
}

GrayImage read_image(const std::filesystem::path& path) {
    switch (sniff(path)) {
        case Format::png: return read_png(path);
        case Format::pgm: return read_pgm(path);
        default: throw DataError("unsupported image format: " + path.string());
    }
}

void write_image(const GrayImage& image, const std::filesystem::path& path) {
    if (path.extension() == ".png")
        write_png(image, path);
    else
        write_pgm(image, path);
}

ImageInfo probe_image(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw DataError("image not found: " + path.string());
    switch (sniff(path)) {
        case Format::pgm: {
            std::ifstream in(path, std::ios::binary);
            const auto header = read_pgm_header(in, path);
            return {header.width, header.height};
        }
        case Format::png: {
            std::ifstream in(path, std::ios::binary);
            std::array<unsigned char, 24> head{};
            in.read(reinterpret_cast<char*>(head.data()), head.size());
            if (in.gcount() != 24) throw DataError("truncated PNG header in " + path.string());
            auto be32 = [&](std::size_t at) {
                return (std::size_t(head[at]) << 24) | (std::size_t(head[at + 1]) << 16) |
                       (std::size_t(head[at + 2]) << 8) | std::size_t(head[at + 3]);
            };
            return {be32(16), be32(20)};
        }
        default: throw DataError("unsupported image format: " + path.string());
    }
}

Tensor to_plane(const GrayImage& image) {
    Tensor plane({image.height, image.width});
    for (std::size_t i = 0; i < image.pixels.size(); ++i) plane[i] = image.pixels[i];
    return plane;
}

GrayImage normalize_to_gray(const Tensor& plane) {
    const auto& s = plane.shape();
    std::size_t h = 0, w = 0;
    if (s.size() == 2) {
        h = s[0];
        w = s[1];
    } else if (s.size() == 3 && s[0] == 1) {
        h = s[1];
        w = s[2];
    } else {
        throw ShapeError("normalize_to_gray: expected [H,W] or [1,H,W], got " + shape_string(s));
    }
    auto v = plane.values();
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const real range = *hi - *lo;
    GrayImage image(w, h);
    for (std::size_t i = 0; i < v.size(); ++i)
        image.pixels[i] = range > 0 ? static_cast<std::uint8_t>(std::lround(255.0 * (v[i] - *lo) / range)) : 0;
    return image;
}

}  // namespace auprobe
