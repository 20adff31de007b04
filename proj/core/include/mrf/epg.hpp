#pragma once

#include <span>
#include <vector>

#include "mrf/sequence.hpp"
#include "mrf/types.hpp"

namespace mrf {

/// Extended phase graph configuration state truncated at order k_max.
///
/// Storage follows the Weigel convention: `f_plus[k]` holds F_k, while
/// `f_minus[k]` holds conj(F_{-k}). With that convention the RF transition
/// acts on (F+_k, F-_k, Z_k) as a plain 3x3 complex matrix, and the
/// zero-order states satisfy F+_0 = conj(F-_0).
class EpgState {
public:
    explicit EpgState(Index k_max, double m0 = 1.0);

    Index order() const { return k_max_; }
    double m0() const { return m0_; }

    const std::vector<cplx> &f_plus() const { return fp_; }
    const std::vector<cplx> &f_minus() const { return fm_; }
    const std::vector<cplx> &z() const { return z_; }

    /// Ideal 180 degree inversion of the longitudinal magnetisation (z[0] <- -z[0]
    /// for an equilibrium start; higher orders negate as well).
    void invert();

    /// RF rotation by `alpha_rad` about an axis at phase `phase_rad`. Only the
    /// first `active` orders are touched (higher ones are known to be zero).
    void rf(double alpha_rad, double phase_rad = 0.0, Index active = -1);

    /// Free relaxation over `tau_ms`; z[0] regrows toward m0.
    void relax(double tau_ms, double t1_ms, double t2_ms, Index active = -1);

    /// One unit of gradient dephasing; the highest order falls off the end.
    void dephase(Index active = -1);

    /// Echo signal F0+.
    cplx signal() const { return fp_[0]; }

    bool finite() const;

private:
    Index span(Index active) const { return active < 0 ? k_max_ + 1 : std::min(active, k_max_ + 1); }

    Index k_max_;
    double m0_;
    std::vector<cplx> fp_, fm_, z_;
};

/// Default truncation order: min(L, 100).
Index default_k_max(const SequenceParams &seq);

/// Recorded observables of one simulated sequence.
struct SignatureTrace {
    VectorXcd signal;  ///< F0+ at each TE
    VectorXd z0;       ///< Re z[0] at each TE, after the TE relaxation
};

/// Complex signature of length L for one tissue. k_max < 0 selects the default.
VectorXcd simulate_signature(const TissueParams &tissue, const SequenceParams &seq, Index k_max = -1,
                             double m0 = 1.0);

SignatureTrace simulate_trace(const TissueParams &tissue, const SequenceParams &seq, Index k_max = -1,
                              double m0 = 1.0);

/// Row k is simulate_signature(tissues[k], seq). Rows are computed
/// independently and in parallel; results do not depend on the thread count.
MatrixXcd simulate_batch(std::span<const TissueParams> tissues, const SequenceParams &seq, Index k_max = -1);

/// Throws ParameterError unless 0 < t2 <= t1 and both are finite.
void validate(const TissueParams &tissue);

} // namespace mrf
