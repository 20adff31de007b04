#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "mrf/kspace.hpp"
#include "mrf/types.hpp"

namespace mrf {

/// Singular value soft-thresholding: the proximal operator of tau * ||.||_*.
struct SvtResult {
    MatrixXcd value;
    VectorXd singular_values;  ///< of the input, descending
    double nuclear_norm = 0;   ///< of the output
};

enum class SvtMethod {
    Auto,   ///< Gram eigendecomposition when rows >= 2*cols, Jacobi otherwise
    Gram,   ///< eigendecomposition of Z^H Z (falls back to Jacobi when ill-conditioned)
    Jacobi, ///< direct Jacobi SVD
};

SvtResult svt(const MatrixXcd &z, double tau, SvtMethod method = SvtMethod::Auto);

/// Orthogonal projector onto the row space of `d` (L x L), pinv(D) * D.
/// Singular values below 1e-10 * sigma_max count as zero.
MatrixXcd dictionary_projector(const MatrixXcd &d);

struct RestoreConfig {
    double mu = 1.0;
    double lambda = 5.0;
    double tol = 1e-4;
    int max_iters = 200;
    /// Optional dictionary-subspace projector; empty
    /// for the dictionary-free restoration.
    std::optional<MatrixXcd> projector;

    void check() const;
};

struct IterationRecord {
    int iter = 0;
    double rel_change = 0;
    double nuclear_norm = 0;
    double data_fidelity = 0;  ///< 1/2 sum_i |Y_i - F_u X_i|^2 at the new iterate

    double objective(double lambda) const { return data_fidelity + lambda * nuclear_norm; }
};

struct RestoreResult {
    ContrastStack stack;
    std::vector<IterationRecord> log;
    bool converged = false;

    int iterations() const { return static_cast<int>(log.size()); }
    double final_rel_change() const { return log.empty() ? 0.0 : log.back().rel_change; }
};

/// Proximal gradient restoration of the contrast stack from subsampled k-space:
/// gradient step on the data term, optional projection, then SVT with
/// threshold lambda * mu. Starts from zero.
RestoreResult restore(const KSpaceData &y, const RestoreConfig &cfg);

/// 1/2 sum_i |Y_i - F_u{X_i}|^2
double data_fidelity(const KSpaceData &y, const ContrastStack &x);

/// `iter,rel_change,nuclear_norm,data_fidelity`
void write_iteration_log(const std::filesystem::path &path, const std::vector<IterationRecord> &log);

} // namespace mrf
