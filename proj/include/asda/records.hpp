#ifndef ASDA_RECORDS_HPP
#define ASDA_RECORDS_HPP

#include "asda/core.hpp"
#include "asda/feature_map.hpp"  // little-endian primitives

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace asda {

constexpr char kRecordMagic[] = "ASDACKPT1";  // 9 bytes on the wire
constexpr std::uint32_t kRecordVersion = 1;

struct TensorRecord {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<double> data;
};

/// Versioned container of named f64 tensors with a config hash and an epoch
/// counter. Serves as the checkpoint format and the whitening projection
/// file.
struct RecordFile {
    std::uint64_t config_hash = 0;
    std::uint32_t epoch = 0;
    std::vector<TensorRecord> records;

    bool has(const std::string& name) const {
        for (const auto& r : records)
            if (r.name == name) return true;
        return false;
    }
    const TensorRecord& get(const std::string& name) const {
        for (const auto& r : records)
            if (r.name == name) return r;
        throw std::invalid_argument("checkpoint: missing tensor record '" + name + "'");
    }

    void add_scalar(const std::string& name, double v) {
        records.push_back({name, {}, {v}});
    }
    template <typename Scalar>
    void add_vector(const std::string& name, const Vector<Scalar>& v) {
        TensorRecord r;
        r.name = name;
        r.dims = {static_cast<std::uint32_t>(v.size())};
        r.data.resize(static_cast<std::size_t>(v.size()));
        for (Index i = 0; i < v.size(); ++i) r.data[static_cast<std::size_t>(i)] = static_cast<double>(v(i));
        records.push_back(std::move(r));
    }
    template <typename Scalar>
    void add_matrix(const std::string& name, const Matrix<Scalar>& m) {
        TensorRecord r;
        r.name = name;
        r.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
        r.data.reserve(static_cast<std::size_t>(m.size()));
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = 0; j < m.cols(); ++j) r.data.push_back(static_cast<double>(m(i, j)));
        records.push_back(std::move(r));
    }

    double scalar(const std::string& name) const {
        const TensorRecord& r = get(name);
        require(r.dims.empty() && r.data.size() == 1, "checkpoint: '" + name + "' is not a scalar");
        return r.data[0];
    }
    template <typename Scalar>
    Vector<Scalar> vector(const std::string& name) const {
        const TensorRecord& r = get(name);
        require(r.dims.size() == 1, "checkpoint: '" + name + "' is not a vector");
        Vector<Scalar> v(static_cast<Index>(r.dims[0]));
        for (Index i = 0; i < v.size(); ++i) v(i) = static_cast<Scalar>(r.data[static_cast<std::size_t>(i)]);
        return v;
    }
    template <typename Scalar>
    Matrix<Scalar> matrix(const std::string& name) const {
        const TensorRecord& r = get(name);
        require(r.dims.size() == 2, "checkpoint: '" + name + "' is not a matrix");
        Matrix<Scalar> m(static_cast<Index>(r.dims[0]), static_cast<Index>(r.dims[1]));
        std::size_t q = 0;
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<Scalar>(r.data[q++]);
        return m;
    }
};

/// Atomic write: the file appears either complete or not at all.
inline void write_records(const RecordFile& file, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        require(out.good(), "cannot open for writing: " + tmp);
        out.write(kRecordMagic, 9);
        detail::write_u32le(out, kRecordVersion);
        detail::write_f64le(out, 0.0);  // reserved
        for (int i = 0; i < 8; ++i) out.put(static_cast<char>((file.config_hash >> (8 * i)) & 0xff));
        detail::write_u32le(out, file.epoch);
        detail::write_u32le(out, static_cast<std::uint32_t>(file.records.size()));
        for (const auto& r : file.records) {
            detail::write_u32le(out, static_cast<std::uint32_t>(r.name.size()));
            out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
            detail::write_u32le(out, static_cast<std::uint32_t>(r.dims.size()));
            std::size_t n = 1;
            for (std::uint32_t d : r.dims) {
                detail::write_u32le(out, d);
                n *= d;
            }
            require(r.data.size() == n, "record '" + r.name + "': dims do not match payload");
            for (double v : r.data) detail::write_f64le(out, v);
        }
        require(out.good(), "write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline RecordFile read_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open checkpoint: " + path);
    char magic[9];
    in.read(magic, 9);
    require(in.good() && std::memcmp(magic, kRecordMagic, 9) == 0,
            path + ": bad magic, not an ASDACKPT1 file");
    const std::uint32_t version = detail::read_u32le(in, path);
    require(version == kRecordVersion, path + ": unsupported version");
    detail::read_f64le(in, path);  // reserved
    RecordFile file;
    file.config_hash = 0;
    for (int i = 0; i < 8; ++i) {
        const int b = in.get();
        require(b != EOF, path + ": truncated header");
        file.config_hash |= static_cast<std::uint64_t>(static_cast<unsigned char>(b)) << (8 * i);
    }
    file.epoch = detail::read_u32le(in, path);
    const std::uint32_t count = detail::read_u32le(in, path);
    file.records.resize(count);
    for (auto& r : file.records) {
        const std::uint32_t name_len = detail::read_u32le(in, path);
        r.name.resize(name_len);
        in.read(r.name.data(), name_len);
        require(in.good(), path + ": truncated record name");
        const std::uint32_t rank = detail::read_u32le(in, path);
        require(rank <= 4, path + ": implausible tensor rank");
        r.dims.resize(rank);
        std::size_t n = 1;
        for (auto& d : r.dims) {
            d = detail::read_u32le(in, path);
            n *= d;
        }
        r.data.resize(n);
        for (auto& v : r.data) v = detail::read_f64le(in, path);
    }
    return file;
}

// ---------------------------------------------------------------------------
// Descriptor export: "ASDADSC1", D as u32 LE, D doubles LE; or a CSV line.

constexpr char kDescriptorMagic[] = "ASDADSC1";  // 8 bytes on the wire

template <typename Scalar>
void write_descriptor(const Descriptor<Scalar>& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open for writing: " + path);
    out.write(kDescriptorMagic, 8);
    detail::write_u32le(out, static_cast<std::uint32_t>(d.size()));
    for (Index i = 0; i < d.size(); ++i) detail::write_f64le(out, static_cast<double>(d(i)));
    require(out.good(), "write failed: " + path);
}

template <typename Scalar>
Descriptor<Scalar> read_descriptor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open descriptor: " + path);
    char magic[8];
    in.read(magic, 8);
    require(in.good() && std::memcmp(magic, kDescriptorMagic, 8) == 0,
            path + ": bad magic, not an ASDADSC1 file");
    const std::uint32_t dim = detail::read_u32le(in, path);
    require(dim >= 1, path + ": empty descriptor");
    Descriptor<Scalar> d(static_cast<Index>(dim));
    for (Index i = 0; i < d.size(); ++i) d(i) = static_cast<Scalar>(detail::read_f64le(in, path));
    return d;
}

template <typename Scalar>
void write_descriptor_csv(const Descriptor<Scalar>& d, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot open for writing: " + path);
    out.precision(17);
    for (Index i = 0; i < d.size(); ++i) out << (i ? "," : "") << static_cast<double>(d(i));
    out << "\n";
    require(out.good(), "write failed: " + path);
}

}  // namespace asda

#endif
