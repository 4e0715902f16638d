#ifndef ASDA_FEATURE_MAP_HPP
#define ASDA_FEATURE_MAP_HPP

#include "asda/core.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace asda {

/// Activation grid of a convolutional layer. Values are stored as a
/// (height*width) x channels matrix; position p = y*width + x, so iterating
/// rows then columns matches row-major (H, W, C) order.
template <typename Scalar>
struct FeatureMap {
    Index height = 0;
    Index width = 0;
    Matrix<Scalar> values;  // (height*width) x channels

    Index channels() const { return values.cols(); }
    Index positions() const { return values.rows(); }
    Index pos(Index y, Index x) const { return y * width + x; }
};

template <typename Scalar>
void validate_feature_map(const FeatureMap<Scalar>& f, const std::string& context = "feature map") {
    require(f.height >= 1 && f.width >= 1, context + ": spatial dims must be positive");
    require(f.channels() >= 1, context + ": channel count must be positive");
    require(f.values.rows() == f.height * f.width, context + ": value rows must equal H*W");
    require(all_finite(f.values), context + ": contains non-finite values");
    require((f.values.array() >= Scalar(0)).all(), context + ": contains negative values");
}

namespace detail {

inline void write_u32le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32le(std::istream& in, const std::string& context) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    require(in.good(), context + ": truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f64le(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline double read_f64le(std::istream& in, const std::string& context) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    require(in.good(), context + ": truncated payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace detail

constexpr char kFeatureMapMagic[] = "ASDAFM1";  // 7 bytes on the wire

/// Container: magic "ASDAFM1", then H, W, C as u32 LE, then H*W*C doubles LE
/// in row-major (H, W, C) order.
template <typename Scalar>
void write_feature_map(const FeatureMap<Scalar>& f, const std::string& path) {
    validate_feature_map(f, path);
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open for writing: " + path);
    out.write(kFeatureMapMagic, 7);
    detail::write_u32le(out, static_cast<std::uint32_t>(f.height));
    detail::write_u32le(out, static_cast<std::uint32_t>(f.width));
    detail::write_u32le(out, static_cast<std::uint32_t>(f.channels()));
    for (Index p = 0; p < f.positions(); ++p)
        for (Index c = 0; c < f.channels(); ++c)
            detail::write_f64le(out, static_cast<double>(f.values(p, c)));
    require(out.good(), "write failed: " + path);
}

/// Loads a serialized feature map. Makes no assumption about which backbone
/// layer produced the grid; only the container invariants are checked.
template <typename Scalar>
FeatureMap<Scalar> read_feature_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open feature map: " + path);
    char magic[7];
    in.read(magic, 7);
    require(in.good() && std::memcmp(magic, kFeatureMapMagic, 7) == 0,
            path + ": bad magic, not an ASDAFM1 file");
    const std::uint32_t h = detail::read_u32le(in, path);
    const std::uint32_t w = detail::read_u32le(in, path);
    const std::uint32_t c = detail::read_u32le(in, path);
    require(h >= 1 && w >= 1 && c >= 1, path + ": degenerate dimensions");
    FeatureMap<Scalar> f;
    f.height = h;
    f.width = w;
    f.values.resize(static_cast<Index>(h) * w, c);
    for (Index p = 0; p < f.positions(); ++p)
        for (Index ch = 0; ch < f.channels(); ++ch)
            f.values(p, ch) = static_cast<Scalar>(detail::read_f64le(in, path));
    validate_feature_map(f, path);
    return f;
}

}  // namespace asda

#endif
