#include <cmath>

#include <Eigen/SVD>
#include <gtest/gtest.h>

#include "mrf/epg.hpp"
#include "mrf/error.hpp"
#include "mrf/io.hpp"
#include "mrf/lowrank.hpp"
#include "test_util.hpp"

using namespace mrf;
using mrf::test::random_complex;

namespace {

double nuclear(const MatrixXcd &m) {
    Eigen::JacobiSVD<MatrixXcd> s(m);
    return s.singularValues().sum();
}

double prox_objective(const MatrixXcd &x, const MatrixXcd &z, double tau) {
    return 0.5 * (x - z).squaredNorm() + tau * nuclear(x);
}

/// Rank-1 stack u v^H with O(1) pixel entries.
ContrastStack rank_one_stack(Index h, Index w, Index frames, std::uint64_t seed) {
    Rng rng(seed);
    const MatrixXcd u = random_complex(h * w, 1, rng);
    const MatrixXcd v = random_complex(frames, 1, rng);
    return {u * v.adjoint(), h, w};
}

} // namespace

TEST(Svt, ZeroThresholdIsIdentity) {
    Rng rng(1);
    const MatrixXcd z = random_complex(30, 8, rng);
    for (auto m : {SvtMethod::Gram, SvtMethod::Jacobi, SvtMethod::Auto})
        EXPECT_LT((svt(z, 0.0, m).value - z).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Svt, DiagonalHandExample) {
    MatrixXcd z = MatrixXcd::Zero(2, 2);
    z(0, 0) = 7;
    z(1, 1) = 3;
    const auto r = svt(z, 5.0, SvtMethod::Jacobi);
    EXPECT_NEAR(r.value(0, 0).real(), 2.0, 1e-14);
    EXPECT_NEAR(std::abs(r.value(1, 1)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(r.value(0, 1)) + std::abs(r.value(1, 0)), 0.0, 1e-14);
    EXPECT_NEAR(r.nuclear_norm, 2.0, 1e-14);
    EXPECT_NEAR(r.singular_values[0], 7.0, 1e-14);
    EXPECT_NEAR(r.singular_values[1], 3.0, 1e-14);
}

TEST(Svt, OutputSpectrumIsShrunkInputSpectrum) {
    Rng rng(2);
    const MatrixXcd z = random_complex(40, 10, rng);
    const double tau = 4.0;
    const auto r = svt(z, tau);
    Eigen::JacobiSVD<MatrixXcd> in(z), out(r.value);
    for (Index i = 0; i < 10; ++i)
        EXPECT_NEAR(out.singularValues()[i], std::max(in.singularValues()[i] - tau, 0.0), 1e-10);
    EXPECT_NEAR(r.nuclear_norm, out.singularValues().sum(), 1e-9);
}

TEST(Svt, GramAndJacobiAgree) {
    Rng rng(3);
    const MatrixXcd z = random_complex(200, 12, rng);
    const auto a = svt(z, 6.0, SvtMethod::Gram);
    const auto b = svt(z, 6.0, SvtMethod::Jacobi);
    EXPECT_LT((a.value - b.value).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(a.nuclear_norm, b.nuclear_norm, 1e-9);
}

TEST(Svt, GramHandlesRankDeficientInput) {
    Rng rng(4);
    const MatrixXcd z = random_complex(100, 2, rng) * random_complex(2, 10, rng);
    const auto a = svt(z, 1.0, SvtMethod::Gram);
    const auto b = svt(z, 1.0, SvtMethod::Jacobi);
    EXPECT_LT((a.value - b.value).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Svt, ProximalOptimalityUnderRandomPerturbations) {
    Rng rng(5);
    const MatrixXcd z = random_complex(5, 4, rng);
    const double tau = 0.3;
    const MatrixXcd x = svt(z, tau).value;
    const double f0 = prox_objective(x, z, tau);
    for (int trial = 0; trial < 10000; ++trial) {
        const double eps = trial % 2 ? 1e-3 : 1e-1;
        const MatrixXcd e = eps * random_complex(5, 4, rng);
        ASSERT_GE(prox_objective(x + e, z, tau) - f0, -1e-8) << "trial " << trial;
    }
}

TEST(Svt, MatchesSubgradientDescent) {
    Rng rng(6);
    const MatrixXcd z = random_complex(8, 5, rng);
    const double tau = 1.5;
    // Subgradient descent on 1/2|X-Z|^2 + tau |X|_* with diminishing steps.
    MatrixXcd x = z;
    MatrixXcd best = x;
    double best_f = prox_objective(x, z, tau);
    for (int k = 1; k <= 20000; ++k) {
        Eigen::JacobiSVD<MatrixXcd> s(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const MatrixXcd g = (x - z) + tau * s.matrixU() * s.matrixV().adjoint();
        x -= (0.5 / std::sqrt(static_cast<double>(k))) * g;
        const double f = prox_objective(x, z, tau);
        if (f < best_f) {
            best_f = f;
            best = x;
        }
    }
    const double f_svt = prox_objective(svt(z, tau).value, z, tau);
    EXPECT_LE(f_svt, best_f + 1e-12);
    EXPECT_NEAR(f_svt, best_f, 1e-2 * best_f);
}

TEST(Svt, InvalidInputsThrow) {
    MatrixXcd z = MatrixXcd::Identity(3, 3);
    EXPECT_THROW(svt(z, -1.0), ParameterError);
    z(1, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(svt(z, 1.0), NumericalError);
}

TEST(Projector, FullRankDictionaryGivesIdentity) {
    Rng rng(7);
    const MatrixXcd d = random_complex(30, 6, rng);
    EXPECT_LT((dictionary_projector(d) - MatrixXcd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Projector, IdempotentAndFixesRows) {
    Rng rng(8);
    const MatrixXcd d = random_complex(3, 10, rng);
    const MatrixXcd p = dictionary_projector(d);
    EXPECT_LT((p * p - p).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((d * p - d).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((p - p.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(p.trace().real(), 3.0, 1e-10);
}

TEST(Restore, FullSamplingWithoutRegularisationRecoversStack) {
    const auto x = rank_one_stack(8, 8, 6, 9);
    std::vector<SamplingMask> masks(6, SamplingMask::full(8, 8));
    const auto y = subsample_stack(x, masks);

    RestoreConfig one;
    one.lambda = 0;
    one.max_iters = 1;
    const auto r1 = restore(y, one);
    EXPECT_EQ(r1.iterations(), 1);
    EXPECT_LT((r1.stack.data - x.data).cwiseAbs().maxCoeff(), 1e-12);

    RestoreConfig def;
    def.lambda = 0;
    const auto r = restore(y, def);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations(), 2);
    EXPECT_LT((r.stack.data - x.data).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Restore, ZeroDataConvergesImmediately) {
    KSpaceData y;
    y.height = 8;
    y.width = 8;
    for (const auto &m : make_gaussian_masks(8, 8, 4, 0.5, 0.25, 1))
        y.frames.push_back({m, VectorXcd::Zero(m.count())});
    const auto r = restore(y, RestoreConfig{});
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations(), 1);
    EXPECT_EQ(r.stack.data.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Restore, RecoversRankOneFromSubsampledData) {
    // Smooth map times one tissue signature; the amplitude puts the leading
    // singular value near 240, so the lambda * mu shrinkage bias stays small.
    FispOptions o;
    o.length = 100;
    o.seed = 3;
    const VectorXcd s = simulate_signature({1000, 100}, generate_fisp(o));
    const Index n = 32;
    VectorXcd m(n * n);
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < n; ++c) {
            const double dy = static_cast<double>(r) - 16.0, dx = static_cast<double>(c) - 16.0;
            m[r * n + c] = 20.0 * (0.3 + std::exp(-(dx * dx + dy * dy) / (2 * 6.4 * 6.4)));
        }
    const ContrastStack x{m * s.transpose(), n, n};
    const auto y = subsample_stack(x, make_gaussian_masks(n, n, 100, 0.3, 0.25, 11));
    RestoreConfig cfg;
    cfg.lambda = 5.0;
    cfg.mu = 1.0;
    cfg.max_iters = 200;
    const auto r = restore(y, cfg);
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.iterations(), 200);
    EXPECT_LT((r.stack.data - x.data).norm() / x.data.norm(), 0.05);
}

TEST(Restore, ObjectiveIsMonotone) {
    const auto x = rank_one_stack(16, 16, 20, 12);
    const auto y = subsample_stack(x, make_gaussian_masks(16, 16, 20, 0.25, 0.25, 13));
    RestoreConfig cfg;
    cfg.lambda = 2.0;
    cfg.max_iters = 80;
    const auto r = restore(y, cfg);
    ASSERT_GE(r.iterations(), 3);
    for (std::size_t i = 1; i < r.log.size(); ++i) {
        const double prev = r.log[i - 1].objective(cfg.lambda), cur = r.log[i].objective(cfg.lambda);
        EXPECT_LE(cur, prev * (1 + 1e-12) + 1e-12) << "iteration " << r.log[i].iter;
    }
}

TEST(Restore, DataFidelityMatchesDirectSum) {
    const auto x = rank_one_stack(8, 8, 3, 14);
    const auto masks = make_gaussian_masks(8, 8, 3, 0.5, 0.25, 15);
    auto y = subsample_stack(x, masks);
    EXPECT_NEAR(data_fidelity(y, x), 0.0, 1e-20);
    double expected = 0;
    for (auto &f : y.frames) {
        f.samples.array() += cplx(1.0, 0.0);
        expected += 0.5 * static_cast<double>(f.samples.size());
    }
    EXPECT_NEAR(data_fidelity(y, x), expected, 1e-9);
}

TEST(Restore, DeterministicAcrossRuns) {
    const auto x = rank_one_stack(16, 16, 10, 16);
    const auto y = subsample_stack(x, make_gaussian_masks(16, 16, 10, 0.3, 0.25, 17));
    RestoreConfig cfg;
    cfg.max_iters = 20;
    const auto a = restore(y, cfg), b = restore(y, cfg);
    EXPECT_EQ(a.stack.data, b.stack.data);
    ASSERT_EQ(a.log.size(), b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i)
        EXPECT_EQ(a.log[i].rel_change, b.log[i].rel_change);
}

TEST(Restore, ProjectorRestrictsTemporalSubspace) {
    Rng rng(18);
    const auto x = rank_one_stack(8, 8, 6, 19);
    const auto y = subsample_stack(x, std::vector<SamplingMask>(6, SamplingMask::full(8, 8)));
    RestoreConfig cfg;
    cfg.lambda = 0;
    const MatrixXcd d = random_complex(2, 6, rng);
    cfg.projector = dictionary_projector(d);
    const auto r = restore(y, cfg);
    EXPECT_LT((r.stack.data * *cfg.projector - r.stack.data).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Restore, InvalidConfigThrows) {
    const auto y = subsample_stack(rank_one_stack(8, 8, 2, 1), std::vector<SamplingMask>(2, SamplingMask::full(8, 8)));
    RestoreConfig c;
    c.mu = 0;
    EXPECT_THROW(restore(y, c), ParameterError);
    c = {};
    c.lambda = -1;
    EXPECT_THROW(restore(y, c), ParameterError);
    c = {};
    c.max_iters = 0;
    EXPECT_THROW(restore(y, c), ParameterError);
    c = {};
    c.projector = MatrixXcd::Identity(3, 3);
    EXPECT_THROW(restore(y, c), ParameterError);
}

TEST(Restore, IterationLogCsv) {
    mrf::test::TempDir dir;
    std::vector<IterationRecord> log{{1, 1.0, 2.0, 3.0}, {2, 0.5, 1.5, 0.25}};
    write_iteration_log(dir / "log.csv", log);
    EXPECT_EQ(read_text(dir / "log.csv"), "iter,rel_change,nuclear_norm,data_fidelity\n1,1,2,3\n2,0.5,1.5,0.25\n");
}
