#include "mrf/epg.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mrf/error.hpp"
#include "mrf/parallel.hpp"

namespace mrf {

namespace {
constexpr const char *kModule = "epg";
constexpr double kDegToRad = std::numbers::pi / 180.0;
} // namespace

EpgState::EpgState(Index k_max, double m0) : k_max_(k_max), m0_(m0) {
    if (k_max < 1)
        throw ParameterError(kModule, "k_max must be >= 1");
    const auto n = static_cast<std::size_t>(k_max + 1);
    fp_.assign(n, 0.0);
    fm_.assign(n, 0.0);
    z_.assign(n, 0.0);
    z_[0] = m0;
}

void EpgState::invert() {
    for (auto &v : z_)
        v = -v;
    // A perfect 180 about x maps F+_k <-> conj(F-_k); states are empty at
    // the start of a train so this only matters for mid-train use.
    for (std::size_t k = 0; k < fp_.size(); ++k) {
        const cplx a = fp_[k];
        fp_[k] = std::conj(fm_[k]);
        fm_[k] = std::conj(a);
    }
}

void EpgState::rf(double alpha, double phase, Index active) {
    const double c2 = std::cos(alpha / 2) * std::cos(alpha / 2);
    const double s2 = std::sin(alpha / 2) * std::sin(alpha / 2);
    const double sa = std::sin(alpha);
    const double ca = std::cos(alpha);
    const cplx i1(0.0, 1.0);
    const cplx e1 = std::polar(1.0, phase);
    const cplx e2 = std::polar(1.0, 2.0 * phase);

    const cplx t00 = c2, t01 = e2 * s2, t02 = -i1 * e1 * sa;
    const cplx t10 = std::conj(e2) * s2, t11 = c2, t12 = i1 * std::conj(e1) * sa;
    const cplx t20 = -0.5 * i1 * std::conj(e1) * sa, t21 = 0.5 * i1 * e1 * sa, t22 = ca;

    const Index n = span(active);
    for (Index k = 0; k < n; ++k) {
        const cplx a = fp_[k], b = fm_[k], c = z_[k];
        fp_[k] = t00 * a + t01 * b + t02 * c;
        fm_[k] = t10 * a + t11 * b + t12 * c;
        z_[k] = t20 * a + t21 * b + t22 * c;
    }
}

void EpgState::relax(double tau, double t1, double t2, Index active) {
    const double e1 = std::exp(-tau / t1);
    const double e2 = std::exp(-tau / t2);
    const Index n = span(active);
    for (Index k = 0; k < n; ++k) {
        fp_[k] *= e2;
        fm_[k] *= e2;
        z_[k] *= e1;
    }
    z_[0] += m0_ * (1.0 - e1);
}

void EpgState::dephase(Index active) {
    // Shifting moves one order further, bounded by the truncation.
    const Index top = std::min(span(active), k_max_);
    for (Index k = top; k >= 1; --k)
        fp_[k] = fp_[k - 1];
    for (Index k = 0; k < top; ++k)
        fm_[k] = fm_[k + 1];
    fm_[top] = 0.0;
    fp_[0] = std::conj(fm_[0]);
}

bool EpgState::finite() const {
    for (std::size_t k = 0; k < fp_.size(); ++k) {
        if (!std::isfinite(fp_[k].real()) || !std::isfinite(fp_[k].imag()) || !std::isfinite(fm_[k].real()) ||
            !std::isfinite(fm_[k].imag()) || !std::isfinite(z_[k].real()) || !std::isfinite(z_[k].imag()))
            return false;
    }
    return true;
}

Index default_k_max(const SequenceParams &seq) { return std::min<Index>(seq.length(), 100); }

void validate(const TissueParams &t) {
    if (!std::isfinite(t.t1_ms) || !std::isfinite(t.t2_ms) || !(t.t2_ms > 0.0))
        throw ParameterError(kModule, "tissue T1/T2 must be finite and positive");
    if (t.t1_ms < t.t2_ms)
        throw ParameterError(kModule, "tissue T1 < T2 (T1=" + std::to_string(t.t1_ms) +
                                          ", T2=" + std::to_string(t.t2_ms) + ")");
}

SignatureTrace simulate_trace(const TissueParams &tissue, const SequenceParams &seq, Index k_max, double m0) {
    validate(tissue);
    validate(seq);
    if (k_max < 0)
        k_max = default_k_max(seq);
    EpgState state(k_max, m0);

    const Index L = seq.length();
    SignatureTrace out{VectorXcd(L), VectorXd(L)};
    const double t1 = tissue.t1_ms, t2 = tissue.t2_ms;

    if (seq.inversion) {
        state.invert();
        state.relax(seq.ti_ms, t1, t2, 1);
    }
    for (Index i = 0; i < L; ++i) {
        // Before pulse i at most orders 0..i are populated.
        const Index active = i + 1;
        state.rf(seq.fa_deg[i] * kDegToRad, 0.0, active);
        state.relax(seq.te_ms[i], t1, t2, active);
        out.signal[i] = state.signal();
        out.z0[i] = state.z()[0].real();
        state.relax(seq.tr_ms[i] - seq.te_ms[i], t1, t2, active);
        state.dephase(active);
    }
    if (!state.finite() || !out.signal.allFinite())
        throw NumericalError(kModule, "non-finite EPG state");
    return out;
}

VectorXcd simulate_signature(const TissueParams &tissue, const SequenceParams &seq, Index k_max, double m0) {
    return simulate_trace(tissue, seq, k_max, m0).signal;
}

MatrixXcd simulate_batch(std::span<const TissueParams> tissues, const SequenceParams &seq, Index k_max) {
    if (tissues.empty())
        throw ParameterError(kModule, "simulate_batch needs at least one tissue");
    validate(seq);
    MatrixXcd out(static_cast<Index>(tissues.size()), seq.length());
    parallel_for(static_cast<std::ptrdiff_t>(tissues.size()), [&](std::ptrdiff_t k) {
        try {
            out.row(k) = simulate_signature(tissues[static_cast<std::size_t>(k)], seq, k_max).transpose();
        } catch (const ParameterError &e) {
            throw ParameterError(kModule, "row " + std::to_string(k) + ": " + e.what());
        } catch (const NumericalError &e) {
            throw NumericalError(kModule, "row " + std::to_string(k) + ": " + e.what());
        }
    });
    return out;
}

} // namespace mrf
