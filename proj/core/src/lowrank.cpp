#include "mrf/lowrank.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "mrf/error.hpp"
#include "mrf/io.hpp"
#include "mrf/parallel.hpp"

namespace mrf {

namespace {

constexpr const char *kModule = "lowrank";

SvtResult svt_jacobi(const MatrixXcd &z, double tau) {
    Eigen::JacobiSVD<MatrixXcd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success)
        throw NumericalError(kModule, "SVD failed");
    const VectorXd s = svd.singularValues();
    const VectorXd shrunk = (s.array() - tau).cwiseMax(0.0);
    SvtResult r;
    r.value = svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().adjoint();
    r.singular_values = s;
    r.nuclear_norm = shrunk.sum();
    return r;
}

// Z = U S V^H  =>  Z^H Z = V S^2 V^H  and  U S' V^H = Z V diag(s'/s) V^H,
// so only the L x L Gram matrix is decomposed. Returns nullopt when a kept
// singular value is too small relative to sigma_max to be resolved through
// the squared spectrum.
std::optional<SvtResult> svt_gram(const MatrixXcd &z, double tau) {
    MatrixXcd gram = MatrixXcd::Zero(z.cols(), z.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(z.adjoint());
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(gram.selfadjointView<Eigen::Lower>());
    if (eig.info() != Eigen::Success)
        return std::nullopt;

    const Index n = gram.cols();
    VectorXd s(n), ratio(n);
    const double lmax = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    for (Index j = 0; j < n; ++j) {
        // Eigen sorts ascending; report singular values descending.
        const double lam = std::max(eig.eigenvalues()[n - 1 - j], 0.0);
        s[j] = std::sqrt(lam);
    }
    for (Index j = 0; j < n; ++j) {
        const double sj = std::sqrt(std::max(eig.eigenvalues()[j], 0.0));
        if (sj > tau) {
            if (tau > 0.0 && sj * sj < 1e-8 * lmax)
                return std::nullopt;
            ratio[j] = (sj - tau) / sj;
        } else {
            ratio[j] = 0.0;
        }
    }
    const MatrixXcd &v = eig.eigenvectors();
    const MatrixXcd w = v * ratio.asDiagonal() * v.adjoint();
    SvtResult r;
    r.value = z * w;
    r.singular_values = s;
    r.nuclear_norm = (s.array() - tau).cwiseMax(0.0).sum();
    return r;
}

} // namespace

void ContrastStack::check() const {
    if (data.rows() != height * width)
        throw ParameterError(kModule, "contrast stack has " + std::to_string(data.rows()) + " rows but geometry " +
                                          std::to_string(height) + "x" + std::to_string(width));
    if (!data.allFinite())
        throw NumericalError(kModule, "contrast stack has non-finite entries");
}

SvtResult svt(const MatrixXcd &z, double tau, SvtMethod method) {
    if (!(tau >= 0.0))
        throw ParameterError(kModule, "svt threshold must be >= 0");
    if (!z.allFinite())
        throw NumericalError(kModule, "svt input has non-finite entries");
    if (z.size() == 0)
        return {z, VectorXd(), 0.0};
    if (method == SvtMethod::Auto)
        method = z.rows() >= 2 * z.cols() ? SvtMethod::Gram : SvtMethod::Jacobi;
    if (method == SvtMethod::Gram) {
        if (auto r = svt_gram(z, tau))
            return std::move(*r);
    }
    return svt_jacobi(z, tau);
}

MatrixXcd dictionary_projector(const MatrixXcd &d) {
    if (d.rows() < 1)
        throw ParameterError(kModule, "projector needs at least one dictionary row");
    Eigen::BDCSVD<MatrixXcd> svd(d, Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success)
        throw NumericalError(kModule, "dictionary SVD failed");
    const VectorXd &s = svd.singularValues();
    const double cut = 1e-10 * (s.size() ? s[0] : 0.0);
    Index rank = 0;
    while (rank < s.size() && s[rank] > cut)
        ++rank;
    const MatrixXcd vr = svd.matrixV().leftCols(rank);
    // pinv(D) D = V S^+ U^H U S V^H = V_r V_r^H
    return vr * vr.adjoint();
}

void RestoreConfig::check() const {
    if (!(mu > 0.0))
        throw ParameterError(kModule, "mu must be > 0");
    if (!(lambda >= 0.0))
        throw ParameterError(kModule, "lambda must be >= 0");
    if (!(tol > 0.0))
        throw ParameterError(kModule, "tol must be > 0");
    if (max_iters < 1)
        throw ParameterError(kModule, "max_iters must be >= 1");
}

double data_fidelity(const KSpaceData &y, const ContrastStack &x) {
    std::vector<double> per_frame(static_cast<std::size_t>(y.length()));
    parallel_for(y.length(), [&](std::ptrdiff_t i) {
        const auto &f = y.frames[static_cast<std::size_t>(i)];
        per_frame[static_cast<std::size_t>(i)] = (forward(x.data.col(i), f.mask) - f.samples).squaredNorm();
    });
    double total = 0;
    for (double v : per_frame)
        total += v;
    return 0.5 * total;
}

RestoreResult restore(const KSpaceData &y, const RestoreConfig &cfg) {
    cfg.check();
    y.check();
    const Index n = y.height * y.width;
    const Index frames = y.length();
    if (cfg.projector && (cfg.projector->rows() != frames || cfg.projector->cols() != frames))
        throw ParameterError(kModule, "projector must be L x L");

    RestoreResult out;
    out.stack = {MatrixXcd::Zero(n, frames), y.height, y.width};
    MatrixXcd &x = out.stack.data;
    MatrixXcd z(n, frames);
    std::vector<double> residual(static_cast<std::size_t>(frames));
    double baseline = -1;
    int growth_streak = 0;

    for (int it = 1; it <= cfg.max_iters; ++it) {
        parallel_for(frames, [&](std::ptrdiff_t i) {
            const auto &f = y.frames[static_cast<std::size_t>(i)];
            const VectorXcd r = forward(x.col(i), f.mask) - f.samples;
            z.col(i) = x.col(i) - cfg.mu * adjoint(r, f.mask);
        });
        if (cfg.projector)
            z = z * (*cfg.projector);

        SvtResult s = svt(z, cfg.lambda * cfg.mu);
        if (!s.value.allFinite())
            throw NumericalError(kModule, "non-finite iterate at iteration " + std::to_string(it));

        const double prev_norm = x.norm();
        const double change = (s.value - x).norm();
        const double rel = change / std::max(prev_norm, std::numeric_limits<double>::min());
        x = std::move(s.value);

        IterationRecord rec;
        rec.iter = it;
        rec.rel_change = rel;
        rec.nuclear_norm = s.nuclear_norm;
        rec.data_fidelity = data_fidelity(y, out.stack);
        out.log.push_back(rec);

        if (rel < cfg.tol) {
            out.converged = true;
            break;
        }
        // Iteration 1 starts from zero, so its relative change is not a
        // meaningful baseline; divergence is judged from iteration 2 on.
        if (it == 2)
            baseline = rel;
        if (baseline > 0 && it > 2) {
            growth_streak = rel > 10.0 * baseline ? growth_streak + 1 : 0;
            if (growth_streak >= 5)
                throw NumericalError(kModule, "restoration diverging: relative change " + std::to_string(rel) +
                                                  " exceeded 10x its initial value for 5 iterations");
        }
    }
    return out;
}

void write_iteration_log(const std::filesystem::path &path, const std::vector<IterationRecord> &log) {
    std::ostringstream os;
    os << "iter,rel_change,nuclear_norm,data_fidelity\n" << std::setprecision(17);
    for (const auto &r : log)
        os << r.iter << ',' << r.rel_change << ',' << r.nuclear_norm << ',' << r.data_fidelity << '\n';
    write_text(path, os.str());
}

} // namespace mrf
