#pragma once

// Raster I/O (PNG via libpng, binary and ASCII PGM/PPM), colour conversion,
// resampling and exact quarter-turn rotation.

#include <png.h>

#include <array>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "error.hpp"
#include "image.hpp"
#include "scale_space.hpp"

namespace qqnet {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::vector<unsigned char> read_all_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image: " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Decoded PNG samples. Filled inside the setjmp scope, so it lives in the caller.
struct PngRaw {
    png_uint_32 width = 0, height = 0;
    int bit_depth = 0, channels = 0;
    std::vector<png_byte> bytes;
    std::vector<png_bytep> rows;
    char error[256] = {};
};

inline void png_error_to_buffer(png_structp png, png_const_charp msg) {
    auto* raw = static_cast<PngRaw*>(png_get_error_ptr(png));
    std::snprintf(raw->error, sizeof raw->error, "%s", msg);
    png_longjmp(png, 1);
}
inline void png_warning_ignore(png_structp, png_const_charp) {}

// No C++ objects with destructors are created between setjmp and the end of
// this function.
inline bool decode_png(std::FILE* fp, PngRaw& raw) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &raw, png_error_to_buffer, png_warning_ignore);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png), png_set_strip_alpha(png);
    png_read_update_info(png, info);
    raw.width = png_get_image_width(png, info);
    raw.height = png_get_image_height(png, info);
    raw.bit_depth = png_get_bit_depth(png, info);
    raw.channels = png_get_channels(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    raw.bytes.resize(rowbytes * raw.height);
    raw.rows.resize(raw.height);
    for (png_uint_32 y = 0; y < raw.height; ++y) raw.rows[y] = raw.bytes.data() + y * rowbytes;
    png_read_image(png, raw.rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

inline Image load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open image: " + path);
    PngRaw raw;
    if (!decode_png(fp.get(), raw)) throw FormatError("invalid PNG " + path + ": " + raw.error);
    if (raw.bit_depth != 8 && raw.bit_depth != 16) throw FormatError("unsupported PNG bit depth in " + path);
    if (raw.channels != 1 && raw.channels != 3) throw FormatError("unsupported PNG channel layout in " + path);
    Image img(static_cast<int>(raw.width), static_cast<int>(raw.height), raw.channels);
    auto out = img.data();
    const std::size_t n = out.size();
    if (raw.bit_depth == 8) {
        for (std::size_t i = 0; i < n; ++i) out[i] = raw.bytes[i] / 255.0;
    } else {
        for (std::size_t i = 0; i < n; ++i) out[i] = ((raw.bytes[2 * i] << 8) | raw.bytes[2 * i + 1]) / 65535.0;
    }
    return img;
}

class PnmReader {
public:
    PnmReader(const std::vector<unsigned char>& b, const std::string& path) : b_(b), path_(path) {}

    unsigned long next_int() {
        skip_space_and_comments();
        if (pos_ >= b_.size() || !std::isdigit(b_[pos_])) fail();
        unsigned long v = 0;
        while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
            v = v * 10 + (b_[pos_++] - '0');
            if (v > 1u << 30) fail();
        }
        return v;
    }
    void single_whitespace() {
        if (pos_ >= b_.size() || !std::isspace(b_[pos_])) fail();
        ++pos_;
    }
    unsigned byte() {
        if (pos_ >= b_.size()) fail();
        return b_[pos_++];
    }
    [[noreturn]] void fail() const { throw FormatError("truncated or malformed PNM file: " + path_); }

private:
    void skip_space_and_comments() {
        while (pos_ < b_.size()) {
            if (std::isspace(b_[pos_])) {
                ++pos_;
            } else if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }
    const std::vector<unsigned char>& b_;
    std::string path_;
    std::size_t pos_ = 2;
};

inline Image load_pnm(const std::vector<unsigned char>& bytes, const std::string& path) {
    const char kind = static_cast<char>(bytes[1]);
    const bool ascii = kind == '2' || kind == '3';
    const int channels = (kind == '3' || kind == '6') ? 3 : 1;
    PnmReader rd(bytes, path);
    const unsigned long w = rd.next_int(), h = rd.next_int(), maxval = rd.next_int();
    if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw FormatError("unsupported PNM header in " + path);
    Image img(static_cast<int>(w), static_cast<int>(h), channels);
    auto out = img.data();
    const double scale = 1.0 / static_cast<double>(maxval);
    if (ascii) {
        for (double& v : out) {
            const unsigned long x = rd.next_int();
            if (x > maxval) rd.fail();
            v = x * scale;
        }
    } else {
        rd.single_whitespace();
        for (double& v : out) {
            unsigned x = rd.byte();
            if (maxval > 255) x = (x << 8) | rd.byte();
            if (x > maxval) rd.fail();
            v = x * scale;
        }
    }
    return img;
}

}  // namespace detail

/// Loads PNG (8/16-bit grey or RGB) or PGM/PPM (P2, P3, P5, P6) with samples in [0, 1].
inline Image load_image(const std::string& path) {
    const auto bytes = detail::read_all_bytes(path);
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return detail::load_png(path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '3' || bytes[1] == '5' || bytes[1] == '6'))
        return detail::load_pnm(bytes, path);
    throw FormatError("unrecognized image format: " + path);
}

namespace detail {

inline bool encode_png(std::FILE* fp, int w, int h, int color_type, png_bytep* rows, char* err, std::size_t errn) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        std::snprintf(err, errn, "libpng write failure");
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

}  // namespace detail

/// Writes an 8-bit PNG. With `normalize`, each image is min-max stretched to
/// [0, 255] (constant images map to 0); otherwise samples are clamped to [0, 1].
inline void save_png(const Image& img, const std::string& path, bool normalize = true) {
    double lo = 0.0, hi = 1.0;
    if (normalize) {
        lo = std::numeric_limits<double>::infinity();
        hi = -lo;
        for (double v : img.data()) lo = std::min(lo, v), hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    std::vector<png_byte> bytes(img.data().size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const double t = std::clamp((img.data()[i] - lo) / span, 0.0, 1.0);
        bytes[i] = static_cast<png_byte>(std::lround(255.0 * t));
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height()));
    const std::size_t stride = static_cast<std::size_t>(img.width()) * img.channels();
    for (int y = 0; y < img.height(); ++y) rows[static_cast<std::size_t>(y)] = bytes.data() + y * stride;

    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write image: " + path);
    char err[128] = {};
    const int ct = img.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
    if (!detail::encode_png(fp.get(), img.width(), img.height(), ct, rows.data(), err, sizeof err))
        throw IoError("cannot write PNG " + path + ": " + err);
}

/// Rec. 601 luma; single-channel input is returned unchanged.
inline Image to_grey(const Image& img) {
    if (img.channels() == 1) return img;
    detail::require(img.channels() == 3, "to_grey: expects 1 or 3 channels");
    Image out(img.width(), img.height(), 1);
    const auto in = img.data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = 0.299 * in[3 * i] + 0.587 * in[3 * i + 1] + 0.114 * in[3 * i + 2];
    return out;
}

namespace detail {

inline double srgb_to_linear(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

// sRGB primaries, D65 white. The white point is the matrix applied to
// (1, 1, 1), so achromatic inputs land exactly on the neutral axis.
inline constexpr std::array<double, 9> kRgbToXyz{0.4124564, 0.3575761, 0.1804375, 0.2126729, 0.7151522,
                                                 0.0721750, 0.0193339, 0.1191920, 0.9503041};

}  // namespace detail

/// CIE 1976 L*u*v* (D65) from sRGB, each channel divided by 100.
inline Image to_luv(const Image& img) {
    detail::require(img.channels() == 3, "to_luv: expects a 3-channel sRGB image");
    const auto& m = detail::kRgbToXyz;
    const double xn = m[0] + m[1] + m[2], yn = m[3] + m[4] + m[5], zn = m[6] + m[7] + m[8];
    const double dn = xn + 15.0 * yn + 3.0 * zn;
    const double un = 4.0 * xn / dn, vn = 9.0 * yn / dn;
    constexpr double kEpsilon = 216.0 / 24389.0;  // (6/29)^3
    constexpr double kKappa = 24389.0 / 27.0;     // (29/3)^3

    Image out(img.width(), img.height(), 3);
    const auto in = img.data();
    auto o = out.data();
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const double r = detail::srgb_to_linear(in[3 * i]);
        const double g = detail::srgb_to_linear(in[3 * i + 1]);
        const double b = detail::srgb_to_linear(in[3 * i + 2]);
        const double X = m[0] * r + m[1] * g + m[2] * b;
        const double Y = m[3] * r + m[4] * g + m[5] * b;
        const double Z = m[6] * r + m[7] * g + m[8] * b;
        const double yr = Y / yn;
        const double L = yr > kEpsilon ? 116.0 * std::cbrt(yr) - 16.0 : kKappa * yr;
        const double d = X + 15.0 * Y + 3.0 * Z;
        double u = 0.0, v = 0.0;
        if (d > 0.0) {
            u = 13.0 * L * (4.0 * X / d - un);
            v = 13.0 * L * (9.0 * Y / d - vn);
        }
        o[3 * i] = L / 100.0;
        o[3 * i + 1] = u / 100.0;
        o[3 * i + 2] = v / 100.0;
    }
    return out;
}

namespace detail {

// Keys cubic convolution kernel, a = -1/2.
inline double cubic_weight(double t) {
    t = std::abs(t);
    if (t < 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
    if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
    return 0.0;
}

struct CubicTaps {
    std::array<int, 4> index;
    std::array<double, 4> weight;
};

// Output sample i sits at input coordinate i / factor.
inline std::vector<CubicTaps> cubic_taps(int out_n, int in_n, double factor) {
    std::vector<CubicTaps> taps(static_cast<std::size_t>(out_n));
    for (int i = 0; i < out_n; ++i) {
        const double x = i / factor;
        const double fl = std::floor(x);
        const double t = x - fl;
        auto& tp = taps[static_cast<std::size_t>(i)];
        for (int j = 0; j < 4; ++j) {
            tp.index[static_cast<std::size_t>(j)] = mirror_index(static_cast<int>(fl) - 1 + j, in_n);
            tp.weight[static_cast<std::size_t>(j)] = cubic_weight(t - (j - 1));
        }
    }
    return taps;
}

inline Image bicubic_scale_channel(const Image& src, int out_w, int out_h, double factor) {
    const auto tx = cubic_taps(out_w, src.width(), factor);
    const auto ty = cubic_taps(out_h, src.height(), factor);
    Image tmp(out_w, src.height(), 1);
    for (int y = 0; y < src.height(); ++y) {
        const auto row = src.row(y);
        for (int x = 0; x < out_w; ++x) {
            const auto& t = tx[static_cast<std::size_t>(x)];
            double acc = 0.0;
            for (int j = 0; j < 4; ++j) acc += t.weight[j] * row[static_cast<std::size_t>(t.index[j])];
            tmp(x, y) = acc;
        }
    }
    Image out(out_w, out_h, 1);
    for (int y = 0; y < out_h; ++y) {
        const auto& t = ty[static_cast<std::size_t>(y)];
        for (int x = 0; x < out_w; ++x) {
            double acc = 0.0;
            for (int j = 0; j < 4; ++j) acc += t.weight[j] * tmp(x, t.index[j]);
            out(x, y) = acc;
        }
    }
    return out;
}

inline Image merge_channels(const std::vector<Image>& chans) {
    if (chans.size() == 1) return chans.front();
    Image out(chans[0].width(), chans[0].height(), 3);
    auto o = out.data();
    for (std::size_t i = 0; i < chans[0].pixel_count(); ++i)
        for (std::size_t c = 0; c < 3; ++c) o[3 * i + c] = chans[c].data()[i];
    return out;
}

}  // namespace detail

/// Rescales by `factor` with the sample grids aligned at pixel 0: output pixel
/// x' samples the input at x'/factor. Downscaling first applies a Gaussian
/// anti-alias filter of variance (1/factor^2 - 1)/4 input pixels^2.
inline Image resample(const Image& img, double factor) {
    detail::require(factor > 0.0 && std::isfinite(factor), "resample: factor must be > 0");
    if (factor == 1.0) return img;
    const int out_w = static_cast<int>(std::lround(img.width() * factor));
    const int out_h = static_cast<int>(std::lround(img.height() * factor));
    detail::require(out_w >= 8 && out_h >= 8, "resample: output would be smaller than 8x8");
    std::vector<Image> chans;
    for (int c = 0; c < img.channels(); ++c) {
        Image ch = img.channels() == 1 ? img : img.channel(c);
        if (factor < 1.0) ch = smooth(ch, (1.0 / (factor * factor) - 1.0) / 4.0);
        chans.push_back(detail::bicubic_scale_channel(ch, out_w, out_h, factor));
    }
    return detail::merge_channels(chans);
}

/// Lossless rotation by quarter_turns * 90 degrees: one turn maps pixel (x, y)
/// to (H-1-y, x), i.e. (x, y) -> (-y, x) about the centre.
inline Image rotate90(const Image& img, int quarter_turns) {
    const int q = ((quarter_turns % 4) + 4) % 4;
    if (q == 0) return img;
    const int w = img.width(), h = img.height(), nc = img.channels();
    const bool swap = q % 2 == 1;
    Image out(swap ? h : w, swap ? w : h, nc);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int xo = x, yo = y;
            switch (q) {
                case 1: xo = h - 1 - y, yo = x; break;
                case 2: xo = w - 1 - x, yo = h - 1 - y; break;
                default: xo = y, yo = w - 1 - x; break;
            }
            for (int c = 0; c < nc; ++c) out(xo, yo, c) = img(x, y, c);
        }
    return out;
}

/// Bilinear lookup at a real-valued position, clamped to the raster.
inline double sample_bilinear(const Image& img, double x, double y, int c = 0) {
    x = std::clamp(x, 0.0, img.width() - 1.0);
    y = std::clamp(y, 0.0, img.height() - 1.0);
    const int x0 = std::min(static_cast<int>(x), img.width() - 1);
    const int y0 = std::min(static_cast<int>(y), img.height() - 1);
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fx = x - x0, fy = y - y0;
    return (1 - fy) * ((1 - fx) * img(x0, y0, c) + fx * img(x1, y0, c)) +
           fy * ((1 - fx) * img(x0, y1, c) + fx * img(x1, y1, c));
}

}  // namespace qqnet
