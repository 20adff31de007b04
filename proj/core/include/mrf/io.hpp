#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mrf/types.hpp"

namespace mrf {

enum class DType : std::uint8_t { Real64 = 1, Complex128 = 2 };

/// Dense row-major tensor of doubles or complex doubles.
struct Tensor {
    std::vector<std::uint64_t> dims;
    std::variant<std::vector<double>, std::vector<cplx>> values;

    DType dtype() const { return values.index() == 0 ? DType::Real64 : DType::Complex128; }
    std::uint64_t element_count() const;

    static Tensor from(const MatrixXd &m);
    static Tensor from(const MatrixXcd &m);
    static Tensor from(std::span<const double> v);

    /// Throws IoError when the dtype or rank does not match.
    MatrixXd to_real_matrix() const;
    MatrixXcd to_complex_matrix() const;

    friend bool operator==(const Tensor &, const Tensor &) = default;
};

/// On-disk layout: "HYT1", u8 dtype, u8 ndim, ndim x u64 dims, payload of
/// little-endian doubles (complex as re, im pairs), then CRC32 of the payload.
void write_tensor(std::ostream &os, const Tensor &t);
Tensor read_tensor(std::istream &is, const std::string &source = "<stream>");

void write_tensor(const std::filesystem::path &path, const Tensor &t);
Tensor read_tensor(const std::filesystem::path &path);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Binary P5 graymap; values scaled linearly from [lo, hi] to [0, 255] with
/// clamping and floor rounding.
void write_pgm(const std::filesystem::path &path, const MatrixXd &image, double lo, double hi);

/// Binary P4 bitmap; 1 bits (black) mark true cells.
void write_pbm(const std::filesystem::path &path, Index height, Index width, std::span<const std::uint8_t> cells);
std::vector<std::uint8_t> read_pbm(const std::filesystem::path &path, Index &height, Index &width);

/// Writes a text file, raising IoError on failure.
void write_text(const std::filesystem::path &path, const std::string &contents);
std::string read_text(const std::filesystem::path &path);

} // namespace mrf
