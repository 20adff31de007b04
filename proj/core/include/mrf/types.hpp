#pragma once

#include <complex>
#include <cstdint>

#include <Eigen/Core>

namespace mrf {

using Index = Eigen::Index;
using cplx = std::complex<double>;

using VectorXd = Eigen::VectorXd;
using VectorXcd = Eigen::VectorXcd;
using MatrixXd = Eigen::MatrixXd;
using MatrixXcd = Eigen::MatrixXcd;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXcd = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Relaxation pair in milliseconds.
struct TissueParams {
    double t1_ms = 0;
    double t2_ms = 0;

    friend bool operator==(const TissueParams &, const TissueParams &) = default;
};

/// N x L contrast matrix: row j is the temporal signature of pixel j,
/// column i is frame i vectorised in row-major (y, x) order.
struct ContrastStack {
    MatrixXcd data;
    Index height = 0;
    Index width = 0;

    Index pixels() const { return data.rows(); }
    Index frames() const { return data.cols(); }
    /// Throws ParameterError when geometry and data disagree or entries are non-finite.
    void check() const;
};

} // namespace mrf
