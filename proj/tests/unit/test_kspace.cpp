#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "mrf/error.hpp"
#include "mrf/kspace.hpp"
#include "test_util.hpp"

using namespace mrf;
using mrf::test::random_complex;

namespace {

/// Direct O(n^2) centred unitary DFT: DC sits at index n/2 in both domains.
VectorXcd direct_dft2c(const VectorXcd &x, Index h, Index w, double sign) {
    VectorXcd out = VectorXcd::Zero(h * w);
    const Index ch = h / 2, cw = w / 2;
    const double norm = 1.0 / std::sqrt(static_cast<double>(h * w));
    for (Index u = 0; u < h; ++u)
        for (Index v = 0; v < w; ++v) {
            cplx acc = 0;
            for (Index m = 0; m < h; ++m)
                for (Index n = 0; n < w; ++n) {
                    const double phase = sign * 2.0 * std::numbers::pi *
                                         (static_cast<double>((u - ch) * (m - ch)) / static_cast<double>(h) +
                                          static_cast<double>((v - cw) * (n - cw)) / static_cast<double>(w));
                    acc += x[m * w + n] * std::polar(1.0, phase);
                }
            out[u * w + v] = acc * norm;
        }
    return out;
}

ContrastStack random_stack(Index h, Index w, Index frames, std::uint64_t seed) {
    Rng rng(seed);
    return {random_complex(h * w, frames, rng), h, w};
}

} // namespace

TEST(Transform, MatchesDirectDftEvenAndOddSizes) {
    Rng rng(3);
    for (auto [h, w] : {std::pair<Index, Index>{4, 6}, {5, 3}, {7, 8}}) {
        const VectorXcd x = random_complex(h * w, 1, rng).col(0);
        EXPECT_LT((fft2c(x, h, w) - direct_dft2c(x, h, w, -1.0)).cwiseAbs().maxCoeff(), 1e-12) << h << "x" << w;
        EXPECT_LT((ifft2c(x, h, w) - direct_dft2c(x, h, w, +1.0)).cwiseAbs().maxCoeff(), 1e-12) << h << "x" << w;
    }
}

TEST(Transform, Parseval) {
    Rng rng(5);
    const VectorXcd x = random_complex(32 * 24, 1, rng).col(0);
    EXPECT_NEAR(fft2c(x, 32, 24).squaredNorm(), x.squaredNorm(), 1e-10 * x.squaredNorm());
}

TEST(Transform, ZeroMapsToZero) {
    const VectorXcd z = VectorXcd::Zero(16);
    EXPECT_EQ(fft2c(z, 4, 4).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(ifft2c(z, 4, 4).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Transform, DeltaGivesFlatSpectrum) {
    VectorXcd d = VectorXcd::Zero(16);
    d[2 * 4 + 2] = 1.0;
    const VectorXcd k = fft2c(d, 4, 4);
    for (Index i = 0; i < 16; ++i)
        EXPECT_NEAR(std::abs(k[i]), 0.25, 1e-15);
}

TEST(Transform, InverseRoundTrip) {
    Rng rng(8);
    const VectorXcd x = random_complex(20 * 12, 1, rng).col(0);
    EXPECT_LT((ifft2c(fft2c(x, 20, 12), 20, 12) - x).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Transform, ForwardAdjointPairing) {
    Rng rng(9);
    const auto masks = make_gaussian_masks(16, 12, 1, 0.3, 0.25, 4);
    const VectorXcd x = random_complex(16 * 12, 1, rng).col(0);
    const VectorXcd y = random_complex(masks[0].count(), 1, rng).col(0);
    const cplx lhs = forward(x, masks[0]).dot(y);
    const cplx rhs = x.dot(adjoint(y, masks[0]));
    EXPECT_LT(std::abs(lhs - rhs), 1e-12 * (1.0 + std::abs(lhs)));
}

TEST(Transform, FullMaskForwardEqualsFft) {
    Rng rng(10);
    const VectorXcd x = random_complex(8 * 8, 1, rng).col(0);
    const auto full = SamplingMask::full(8, 8);
    EXPECT_LT((forward(x, full) - fft2c(x, 8, 8)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((adjoint(forward(x, full), full) - x).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Transform, SizeMismatchThrows) {
    const auto full = SamplingMask::full(4, 4);
    EXPECT_THROW(forward(VectorXcd::Zero(15), full), ParameterError);
    EXPECT_THROW(adjoint(VectorXcd::Zero(3), full), ParameterError);
}

TEST(Masks, ExactBudgetAt128) {
    const auto masks = make_gaussian_masks(128, 128, 6, 0.15, 0.25, 1);
    ASSERT_EQ(masks.size(), 6u);
    for (const auto &m : masks) {
        EXPECT_EQ(m.count(), 2458);
        EXPECT_NEAR(m.ratio(), 0.15, 1.0 / (128.0 * 128.0));
    }
}

TEST(Masks, CentreBlockAlwaysKept) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto masks = make_gaussian_masks(33, 20, 3, 0.05, 0.1, seed);
        for (const auto &m : masks)
            for (Index r = 33 / 2 - 2; r < 33 / 2 + 2; ++r)
                for (Index c = 20 / 2 - 2; c < 20 / 2 + 2; ++c)
                    EXPECT_EQ(m.keep[static_cast<std::size_t>(r * 20 + c)], 1);
    }
}

TEST(Masks, FullBetaKeepsEverything) {
    const auto m = make_gaussian_masks(12, 9, 1, 1.0, 0.25, 2)[0];
    EXPECT_EQ(m.count(), 12 * 9);
}

TEST(Masks, DeterministicPerSeedAndVaryAcrossFrames) {
    const auto a = make_gaussian_masks(64, 64, 4, 0.2, 0.25, 77);
    const auto b = make_gaussian_masks(64, 64, 4, 0.2, 0.25, 77);
    const auto c = make_gaussian_masks(64, 64, 4, 0.2, 0.25, 78);
    for (std::size_t f = 0; f < a.size(); ++f)
        EXPECT_EQ(a[f].keep, b[f].keep);
    EXPECT_NE(a[0].keep, c[0].keep);
    EXPECT_NE(a[0].keep, a[1].keep);
}

TEST(Masks, DensityFallsWithRadius) {
    const auto masks = make_gaussian_masks(64, 64, 20, 0.15, 0.25, 5);
    double inner = 0, inner_n = 0, outer = 0, outer_n = 0;
    for (const auto &m : masks)
        for (Index r = 0; r < 64; ++r)
            for (Index c = 0; c < 64; ++c) {
                const double rad = std::hypot(r - 32.0, c - 32.0);
                const double kept = m.keep[static_cast<std::size_t>(r * 64 + c)];
                if (rad > 4 && rad < 10) {
                    inner += kept;
                    inner_n += 1;
                } else if (rad > 24) {
                    outer += kept;
                    outer_n += 1;
                }
            }
    EXPECT_GT(inner / inner_n, 4.0 * outer / outer_n);
}

TEST(Masks, InvalidSettingsThrow) {
    EXPECT_THROW(make_gaussian_masks(8, 8, 1, 0.0, 0.25, 1), ParameterError);
    EXPECT_THROW(make_gaussian_masks(8, 8, 1, 1.5, 0.25, 1), ParameterError);
    EXPECT_THROW(make_gaussian_masks(8, 8, 1, 0.5, 0.0, 1), ParameterError);
    EXPECT_THROW(make_gaussian_masks(3, 8, 1, 0.5, 0.25, 1), ParameterError);
    EXPECT_THROW(make_gaussian_masks(8, 8, 0, 0.5, 0.25, 1), ParameterError);
    EXPECT_THROW(make_gaussian_masks(8, 8, 1, 0.2, 0.25, 1), ParameterError);  // 0.2*64 rounds to 13
}

TEST(Stack, FullMaskRoundTrip) {
    const auto x = random_stack(8, 6, 5, 11);
    std::vector<SamplingMask> masks(5, SamplingMask::full(8, 6));
    const auto back = zero_fill_stack(subsample_stack(x, masks));
    EXPECT_EQ(back.height, 8);
    EXPECT_EQ(back.width, 6);
    EXPECT_LT((back.data - x.data).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Stack, SampleShapeAt128) {
    const auto x = random_stack(128, 128, 200, 12);
    const auto masks = make_gaussian_masks(128, 128, 200, 0.15, 0.25, 3);
    const auto y = subsample_stack(x, masks);
    ASSERT_EQ(y.length(), 200);
    for (const auto &f : y.frames)
        EXPECT_EQ(f.samples.size(), 2458);
    // Per-frame equality with the single-frame operator.
    EXPECT_LT((y.frames[17].samples - forward(x.data.col(17), masks[17])).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Stack, ProjectionIsIdempotentAndContracts) {
    const auto x = random_stack(16, 16, 4, 13);
    const auto masks = make_gaussian_masks(16, 16, 4, 0.3, 0.25, 6);
    const auto p1 = zero_fill_stack(subsample_stack(x, masks));
    const auto p2 = zero_fill_stack(subsample_stack(p1, masks));
    EXPECT_LT((p1.data - p2.data).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LE(p1.data.squaredNorm(), x.data.squaredNorm() * (1 + 1e-12));
}

TEST(Stack, MaskCountMismatchThrows) {
    const auto x = random_stack(8, 8, 3, 14);
    EXPECT_THROW(subsample_stack(x, make_gaussian_masks(8, 8, 2, 0.5, 0.25, 1)), ParameterError);
    EXPECT_THROW(subsample_stack(x, make_gaussian_masks(8, 6, 3, 0.5, 0.25, 1)), ParameterError);
}

TEST(Stack, SaveLoadRoundTrip) {
    mrf::test::TempDir dir;
    const auto x = random_stack(16, 12, 3, 15);
    const auto y = subsample_stack(x, make_gaussian_masks(16, 12, 3, 0.4, 0.25, 9));
    save_kspace(dir.path(), y, MaskSettings{0.4, 0.25, 9});
    const auto z = load_kspace(dir.path());
    ASSERT_EQ(z.height, 16);
    ASSERT_EQ(z.width, 12);
    ASSERT_EQ(z.length(), 3);
    for (Index f = 0; f < 3; ++f) {
        EXPECT_EQ(z.frames[f].mask.keep, y.frames[f].mask.keep);
        EXPECT_EQ(z.frames[f].samples, y.frames[f].samples);
    }
}

TEST(Stack, SaveLoadUnequalCounts) {
    mrf::test::TempDir dir;
    const auto x = random_stack(8, 8, 2, 16);
    std::vector<SamplingMask> masks{SamplingMask::full(8, 8), make_gaussian_masks(8, 8, 1, 0.5, 0.25, 2)[0]};
    const auto y = subsample_stack(x, masks);
    save_kspace(dir.path(), y);
    const auto z = load_kspace(dir.path());
    ASSERT_EQ(z.length(), 2);
    EXPECT_EQ(z.frames[0].samples, y.frames[0].samples);
    EXPECT_EQ(z.frames[1].samples, y.frames[1].samples);
}
