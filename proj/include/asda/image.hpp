#ifndef ASDA_IMAGE_HPP
#define ASDA_IMAGE_HPP

#include "asda/core.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace asda {

constexpr Index kMinImageSide = 16;

/// RGB image with values in [0, 1], stored as per-channel H x W planes.
template <typename Scalar>
struct ImageTensor {
    std::vector<Matrix<Scalar>> planes;  // 3 planes, each height x width

    Index height() const { return planes.empty() ? 0 : planes[0].rows(); }
    Index width() const { return planes.empty() ? 0 : planes[0].cols(); }
    Index channels() const { return static_cast<Index>(planes.size()); }
};

template <typename Scalar>
ImageTensor<Scalar> make_image(Index height, Index width, Scalar fill = Scalar(0)) {
    require(height >= kMinImageSide && width >= kMinImageSide,
            "image dimensions must be at least 16x16");
    ImageTensor<Scalar> img;
    img.planes.assign(3, Matrix<Scalar>::Constant(height, width, fill));
    return img;
}

template <typename Scalar>
void validate_image(const ImageTensor<Scalar>& img) {
    require(img.channels() == 3, "image must have exactly 3 channels");
    require(img.height() >= kMinImageSide && img.width() >= kMinImageSide,
            "image dimensions must be at least 16x16");
    for (const auto& p : img.planes) {
        require(p.rows() == img.height() && p.cols() == img.width(),
                "image planes must share dimensions");
        require(all_finite(p), "image contains non-finite values");
        require((p.array() >= Scalar(0)).all() && (p.array() <= Scalar(1)).all(),
                "image values must lie in [0,1]");
    }
}

/// Bilinear resize with half-pixel centers; output values stay in the hull
/// of the input values.
template <typename Scalar>
ImageTensor<Scalar> resize_bilinear(const ImageTensor<Scalar>& src, Index out_h, Index out_w) {
    require(out_h >= 1 && out_w >= 1, "resize target must be positive");
    const Index in_h = src.height(), in_w = src.width();
    ImageTensor<Scalar> dst;
    dst.planes.assign(src.planes.size(), Matrix<Scalar>(out_h, out_w));
    const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);
    for (std::size_t c = 0; c < src.planes.size(); ++c) {
        const Matrix<Scalar>& in = src.planes[c];
        Matrix<Scalar>& out = dst.planes[c];
        for (Index y = 0; y < out_h; ++y) {
            const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(in_h - 1));
            const Index y0 = static_cast<Index>(fy);
            const Index y1 = std::min(y0 + 1, in_h - 1);
            const Scalar wy = static_cast<Scalar>(fy - static_cast<double>(y0));
            for (Index x = 0; x < out_w; ++x) {
                const double fx =
                    std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(in_w - 1));
                const Index x0 = static_cast<Index>(fx);
                const Index x1 = std::min(x0 + 1, in_w - 1);
                const Scalar wx = static_cast<Scalar>(fx - static_cast<double>(x0));
                const Scalar top = in(y0, x0) * (Scalar(1) - wx) + in(y0, x1) * wx;
                const Scalar bot = in(y1, x0) * (Scalar(1) - wx) + in(y1, x1) * wx;
                out(y, x) = top * (Scalar(1) - wy) + bot * wy;
            }
        }
    }
    return dst;
}

// ---------------------------------------------------------------------------
// Portable pixmap (binary P6, 8-bit) import/export.

template <typename Scalar>
void write_ppm(const ImageTensor<Scalar>& img, const std::string& path) {
    validate_image(img);
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open for writing: " + path);
    out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width()) * 3);
    for (Index y = 0; y < img.height(); ++y) {
        for (Index x = 0; x < img.width(); ++x) {
            for (Index c = 0; c < 3; ++c) {
                const double v = std::clamp(static_cast<double>(img.planes[c](y, x)), 0.0, 1.0);
                row[static_cast<std::size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    require(out.good(), "write failed: " + path);
}

template <typename Scalar>
ImageTensor<Scalar> read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open image: " + path);
    std::string magic;
    in >> magic;
    require(magic == "P6", path + ": not a binary PPM (P6) file");
    auto next_int = [&in, &path]() {
        // skip whitespace and '#' comments
        for (;;) {
            int ch = in.peek();
            if (ch == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(ch)) {
                in.get();
            } else {
                break;
            }
        }
        long v = -1;
        in >> v;
        require(in.good() && v >= 0, path + ": malformed PPM header");
        return v;
    };
    const long w = next_int();
    const long h = next_int();
    const long maxval = next_int();
    require(maxval == 255, path + ": only 8-bit PPM supported");
    in.get();  // single whitespace after maxval
    ImageTensor<Scalar> img;
    img.planes.assign(3, Matrix<Scalar>(h, w));
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
    for (long y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        require(in.good(), path + ": truncated pixel data");
        for (long x = 0; x < w; ++x) {
            for (Index c = 0; c < 3; ++c) {
                img.planes[c](y, x) =
                    static_cast<Scalar>(row[static_cast<std::size_t>(x) * 3 + c]) / Scalar(255);
            }
        }
    }
    validate_image(img);
    return img;
}

}  // namespace asda

#endif
