#include "mrf/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "mrf/error.hpp"

namespace mrf {

namespace {

constexpr const char *kModule = "io";
constexpr std::array<char, 4> kMagic{'H', 'Y', 'T', '1'};

void put_u64(std::vector<std::uint8_t> &buf, std::uint64_t v) {
    for (int b = 0; b < 8; ++b)
        buf.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint64_t get_u64(const std::uint8_t *p) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b)
        v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    return v;
}

void read_exact(std::istream &is, void *dst, std::size_t n, const std::string &source) {
    is.read(static_cast<char *>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw IoError(kModule, "truncated tensor in " + source);
}

} // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
        crc = ::crc32(crc, bytes.data() + off, chunk);
        off += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::uint64_t Tensor::element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims)
        n *= d;
    return n;
}

Tensor Tensor::from(const MatrixXd &m) {
    Tensor t;
    t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    std::vector<double> v(static_cast<std::size_t>(m.size()));
    Eigen::Map<RowMatrixXd>(v.data(), m.rows(), m.cols()) = m;
    t.values = std::move(v);
    return t;
}

Tensor Tensor::from(const MatrixXcd &m) {
    Tensor t;
    t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    std::vector<cplx> v(static_cast<std::size_t>(m.size()));
    Eigen::Map<RowMatrixXcd>(v.data(), m.rows(), m.cols()) = m;
    t.values = std::move(v);
    return t;
}

Tensor Tensor::from(std::span<const double> v) {
    Tensor t;
    t.dims = {static_cast<std::uint64_t>(v.size())};
    t.values = std::vector<double>(v.begin(), v.end());
    return t;
}

MatrixXd Tensor::to_real_matrix() const {
    if (dtype() != DType::Real64)
        throw IoError(kModule, "expected a real tensor");
    if (dims.empty() || dims.size() > 2)
        throw IoError(kModule, "expected a 1D or 2D tensor");
    const auto rows = static_cast<Index>(dims[0]);
    const auto cols = dims.size() == 2 ? static_cast<Index>(dims[1]) : 1;
    const auto &v = std::get<0>(values);
    return Eigen::Map<const RowMatrixXd>(v.data(), rows, cols);
}

MatrixXcd Tensor::to_complex_matrix() const {
    if (dtype() != DType::Complex128)
        throw IoError(kModule, "expected a complex tensor");
    if (dims.empty() || dims.size() > 2)
        throw IoError(kModule, "expected a 1D or 2D tensor");
    const auto rows = static_cast<Index>(dims[0]);
    const auto cols = dims.size() == 2 ? static_cast<Index>(dims[1]) : 1;
    const auto &v = std::get<1>(values);
    return Eigen::Map<const RowMatrixXcd>(v.data(), rows, cols);
}

void write_tensor(std::ostream &os, const Tensor &t) {
    if (t.dims.size() > 255)
        throw IoError(kModule, "tensor rank exceeds 255");
    const std::uint64_t n = t.element_count();
    const std::size_t scalars = t.dtype() == DType::Real64 ? n : 2 * n;
    const double *src = t.dtype() == DType::Real64
                            ? std::get<0>(t.values).data()
                            : reinterpret_cast<const double *>(std::get<1>(t.values).data());
    const std::size_t have = t.dtype() == DType::Real64 ? std::get<0>(t.values).size() : std::get<1>(t.values).size();
    if (have != n)
        throw IoError(kModule, "tensor payload does not match dims");

    std::vector<std::uint8_t> header(kMagic.begin(), kMagic.end());
    header.push_back(static_cast<std::uint8_t>(t.dtype()));
    header.push_back(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims)
        put_u64(header, d);

    std::vector<std::uint8_t> payload;
    payload.reserve(scalars * 8);
    for (std::size_t i = 0; i < scalars; ++i)
        put_u64(payload, std::bit_cast<std::uint64_t>(src[i]));
    const std::uint32_t crc = crc32(payload);
    std::array<std::uint8_t, 4> tail{};
    for (int b = 0; b < 4; ++b)
        tail[static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(crc >> (8 * b));

    os.write(reinterpret_cast<const char *>(header.data()), static_cast<std::streamsize>(header.size()));
    os.write(reinterpret_cast<const char *>(payload.data()), static_cast<std::streamsize>(payload.size()));
    os.write(reinterpret_cast<const char *>(tail.data()), 4);
    if (!os)
        throw IoError(kModule, "tensor write failed");
}

Tensor read_tensor(std::istream &is, const std::string &source) {
    std::array<char, 4> magic{};
    read_exact(is, magic.data(), 4, source);
    if (magic != kMagic)
        throw IoError(kModule, "bad magic in " + source);
    std::uint8_t code = 0, ndim = 0;
    read_exact(is, &code, 1, source);
    read_exact(is, &ndim, 1, source);
    if (code != 1 && code != 2)
        throw IoError(kModule, "unknown dtype code " + std::to_string(code) + " in " + source);

    std::vector<std::uint8_t> dimbuf(8u * ndim);
    read_exact(is, dimbuf.data(), dimbuf.size(), source);
    Tensor t;
    std::uint64_t n = 1;
    for (std::size_t d = 0; d < ndim; ++d) {
        t.dims.push_back(get_u64(dimbuf.data() + 8 * d));
        if (t.dims.back() != 0 && n > (std::uint64_t{1} << 40) / t.dims.back())
            throw IoError(kModule, "implausible tensor size in " + source);
        n *= t.dims.back();
    }
    const std::size_t scalars = code == 1 ? n : 2 * n;
    std::vector<std::uint8_t> payload(scalars * 8);
    read_exact(is, payload.data(), payload.size(), source);
    std::array<std::uint8_t, 4> tail{};
    read_exact(is, tail.data(), 4, source);
    std::uint32_t stored = 0;
    for (int b = 0; b < 4; ++b)
        stored |= static_cast<std::uint32_t>(tail[static_cast<std::size_t>(b)]) << (8 * b);
    if (stored != crc32(payload))
        throw IoError(kModule, "CRC mismatch in " + source);

    std::vector<double> flat(scalars);
    for (std::size_t i = 0; i < scalars; ++i)
        flat[i] = std::bit_cast<double>(get_u64(payload.data() + 8 * i));
    if (code == 1) {
        t.values = std::move(flat);
    } else {
        std::vector<cplx> c(n);
        for (std::size_t i = 0; i < n; ++i)
            c[i] = cplx(flat[2 * i], flat[2 * i + 1]);
        t.values = std::move(c);
    }
    return t;
}

void write_tensor(const std::filesystem::path &path, const Tensor &t) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw IoError(kModule, "cannot open " + path.string() + " for writing");
    write_tensor(os, t);
}

Tensor read_tensor(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError(kModule, "cannot open " + path.string());
    return read_tensor(is, path.string());
}

void write_pgm(const std::filesystem::path &path, const MatrixXd &image, double lo, double hi) {
    if (!(hi > lo))
        throw ParameterError(kModule, "write_pgm requires hi > lo");
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw IoError(kModule, "cannot open " + path.string() + " for writing");
    os << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
    std::vector<std::uint8_t> px(static_cast<std::size_t>(image.size()));
    std::size_t p = 0;
    for (Index r = 0; r < image.rows(); ++r) {
        for (Index c = 0; c < image.cols(); ++c) {
            const double v = std::floor((image(r, c) - lo) / (hi - lo) * 255.0);
            px[p++] = static_cast<std::uint8_t>(std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 255.0));
        }
    }
    os.write(reinterpret_cast<const char *>(px.data()), static_cast<std::streamsize>(px.size()));
    if (!os)
        throw IoError(kModule, "write failed for " + path.string());
}

void write_pbm(const std::filesystem::path &path, Index height, Index width, std::span<const std::uint8_t> cells) {
    if (static_cast<Index>(cells.size()) != height * width)
        throw ParameterError(kModule, "bitmap size does not match geometry");
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw IoError(kModule, "cannot open " + path.string() + " for writing");
    os << "P4\n" << width << ' ' << height << '\n';
    const Index stride = (width + 7) / 8;
    std::vector<std::uint8_t> row(static_cast<std::size_t>(stride));
    for (Index r = 0; r < height; ++r) {
        std::fill(row.begin(), row.end(), 0);
        for (Index c = 0; c < width; ++c)
            if (cells[static_cast<std::size_t>(r * width + c)])
                row[static_cast<std::size_t>(c / 8)] |= static_cast<std::uint8_t>(0x80u >> (c % 8));
        os.write(reinterpret_cast<const char *>(row.data()), stride);
    }
    if (!os)
        throw IoError(kModule, "write failed for " + path.string());
}

std::vector<std::uint8_t> read_pbm(const std::filesystem::path &path, Index &height, Index &width) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError(kModule, "cannot open " + path.string());
    std::string magic;
    is >> magic >> width >> height;
    is.get();
    if (magic != "P4" || !is || width <= 0 || height <= 0)
        throw IoError(kModule, "not a binary PBM: " + path.string());
    const Index stride = (width + 7) / 8;
    std::vector<std::uint8_t> row(static_cast<std::size_t>(stride));
    std::vector<std::uint8_t> cells(static_cast<std::size_t>(height * width));
    for (Index r = 0; r < height; ++r) {
        read_exact(is, row.data(), row.size(), path.string());
        for (Index c = 0; c < width; ++c)
            cells[static_cast<std::size_t>(r * width + c)] =
                (row[static_cast<std::size_t>(c / 8)] >> (7 - c % 8)) & 1u;
    }
    return cells;
}

void write_text(const std::filesystem::path &path, const std::string &contents) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw IoError(kModule, "cannot open " + path.string() + " for writing");
    os << contents;
    if (!os)
        throw IoError(kModule, "write failed for " + path.string());
}

std::string read_text(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError(kModule, "cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace mrf
