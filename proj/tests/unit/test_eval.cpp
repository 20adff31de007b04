#include <cmath>
#include <set>

#include <Eigen/SVD>
#include <gtest/gtest.h>

#include "mrf/epg.hpp"
#include "mrf/error.hpp"
#include "mrf/eval.hpp"
#include "test_util.hpp"

using namespace mrf;

TEST(Metrics, HandComputedValues) {
    const MatrixXd truth = MatrixXd::Ones(10, 1);
    const MatrixXd est = truth.array() + 0.1;
    EXPECT_NEAR(rmse(truth, est), 0.1, 1e-12);
    // |X|_F^2 = 10 and RMSE = 0.1 give 20 log10(100).
    EXPECT_NEAR(snr_db(truth, est, SnrConvention::Energy), 40.0, 1e-12);
    EXPECT_NEAR(snr_db(truth, est, SnrConvention::Standard), 20.0 * std::log10(std::sqrt(10.0) / 0.1), 1e-12);
    EXPECT_NEAR(psnr_db(truth, est, 1.0), 20.0, 1e-12);
}

TEST(Metrics, SymmetricErrorsGiveSameRmse) {
    MatrixXd truth(2, 2), est(2, 2);
    truth << 1, 1, 1, 1;
    est << 1.1, 0.9, 1.1, 0.9;
    EXPECT_NEAR(rmse(truth, est), 0.1, 1e-15);
    EXPECT_NEAR(snr_db(truth, est, SnrConvention::Energy), 20.0 * std::log10(40.0), 1e-12);
}

TEST(Metrics, RmseOfConstantOffset) {
    const MatrixXd a = MatrixXd::Constant(3, 5, 10.0);
    EXPECT_NEAR(rmse(a, a.array() + 4.0), 4.0, 1e-14);
}

TEST(Metrics, ExactEstimateGivesInfiniteSnr) {
    const MatrixXd a = MatrixXd::Constant(2, 2, 3.0);
    EXPECT_TRUE(std::isinf(snr_db(a, a)));
    EXPECT_TRUE(std::isinf(psnr_db(a, a, 3.0)));
    EXPECT_EQ(rmse(a, a), 0.0);
}

TEST(Metrics, ShapeMismatchAndEmptyThrow) {
    EXPECT_THROW(rmse(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 3)), ParameterError);
    EXPECT_THROW(rmse(MatrixXd(0, 0), MatrixXd(0, 0)), ParameterError);
}

TEST(Correlation, PerfectAndAnti) {
    MatrixXd a(2, 3);
    a << 1, 2, 3, 4, 5, 7;
    EXPECT_NEAR(corrcoef(a, 3.0 * a.array() + 2.0), 1.0, 1e-15);
    EXPECT_NEAR(corrcoef(a, -a), -1.0, 1e-15);
}

TEST(Correlation, ConstantMapThrows) {
    EXPECT_THROW(corrcoef(MatrixXd::Constant(2, 2, 1.0), MatrixXd::Identity(2, 2)), ParameterError);
    const auto m = evaluate_map(MatrixXd::Constant(2, 2, 1.0), MatrixXd::Identity(2, 2));
    EXPECT_TRUE(std::isnan(m.corrcoef));
}

TEST(Correlation, IndependentNoiseIsUncorrelated) {
    Rng rng(1);
    const MatrixXd a = mrf::test::random_real(100, 100, rng);
    const MatrixXd b = mrf::test::random_real(100, 100, rng);
    EXPECT_LT(std::abs(corrcoef(a, b)), 0.05);
}

TEST(Metrics, EvaluateMapUsesTruthPeak) {
    MatrixXd truth(1, 2), est(1, 2);
    truth << 100, 200;
    est << 110, 190;
    const auto m = evaluate_map(truth, est);
    EXPECT_NEAR(m.rmse_ms, 10.0, 1e-12);
    EXPECT_NEAR(m.psnr_db, 20.0 * std::log10(200.0 / 10.0), 1e-12);
    EXPECT_NEAR(m.corrcoef, 1.0, 1e-12);
}

TEST(Report, JsonAndCsv) {
    MetricsReport r;
    r.maps["t1"] = {1.5, 30.0, std::numeric_limits<double>::infinity(), 0.9};
    r.maps["t2"] = {0.5, 20.0, 25.0, std::numeric_limits<double>::quiet_NaN()};
    r.timings_s["restore"] = 2.0;
    const auto j = r.to_json();
    EXPECT_EQ(j["maps"]["t1"]["rmse_ms"], 1.5);
    EXPECT_TRUE(j["maps"]["t2"]["corrcoef"].is_null());
    EXPECT_GT(j["maps"]["t1"]["psnr_db"].get<double>(), 1e300);
    EXPECT_EQ(j["timings_s"]["restore"], 2.0);
    const auto csv = r.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "map,rmse_ms,snr_db,psnr_db,corrcoef");
    EXPECT_NE(csv.find("\nt1,1.5,30,"), std::string::npos);
    EXPECT_NE(csv.find("\nt2,0.5,20,25,"), std::string::npos);
}

TEST(Phantom, DeskHasFourTissues) {
    const auto maps = make_phantom(PhantomSpec::desk());
    ASSERT_EQ(maps.t1.rows(), 32);
    ASSERT_EQ(maps.t1.cols(), 32);
    std::set<std::pair<double, double>> tissues;
    for (Index r = 0; r < 32; ++r)
        for (Index c = 0; c < 32; ++c)
            tissues.insert({maps.t1(r, c), maps.t2(r, c)});
    EXPECT_EQ(tissues.size(), 4u);
    EXPECT_EQ(maps.t1(0, 0), 500.0);
    EXPECT_EQ(maps.t1(16, 16), 800.0);
}

TEST(Phantom, LaterRegionsOverwrite) {
    PhantomSpec p;
    p.height = 9;
    p.width = 9;
    p.regions = {{4, 4, 3, 3, 0, {900, 90}}, {4, 4, 1, 1, 0, {1500, 150}}};
    const auto maps = make_phantom(p);
    EXPECT_EQ(maps.t1(4, 4), 1500.0);
    EXPECT_EQ(maps.t1(4, 6), 900.0);
    EXPECT_EQ(maps.t1(0, 0), 500.0);
}

TEST(Phantom, OutOfBoundsRegionThrows) {
    PhantomSpec p;
    p.height = 8;
    p.width = 8;
    p.regions = {{1, 4, 3, 2, 0, {900, 90}}};
    EXPECT_THROW(make_phantom(p), ParameterError);
    p.regions = {{4, 4, 2, 2, 0, {90, 900}}};
    EXPECT_THROW(make_phantom(p), ParameterError);
}

TEST(Phantom, StackEqualsPerPixelSimulation) {
    PhantomSpec p;
    p.height = 6;
    p.width = 7;
    p.regions = {{3, 3, 2, 1.5, 30, {1100, 70}}};
    const auto maps = make_phantom(p);
    FispOptions o;
    o.length = 24;
    o.seed = 2;
    const auto seq = generate_fisp(o);
    const auto x = phantom_to_stack(maps, seq);
    ASSERT_EQ(x.pixels(), 42);
    ASSERT_EQ(x.frames(), 24);
    for (Index r = 0; r < 6; ++r)
        for (Index c = 0; c < 7; ++c) {
            const VectorXcd s = simulate_signature({maps.t1(r, c), maps.t2(r, c)}, seq);
            EXPECT_EQ(x.data.row(r * 7 + c), s.transpose());
        }
}

TEST(Phantom, ConstantMapsGiveRankOneStack) {
    const ParameterMaps maps{MatrixXd::Constant(5, 5, 1000), MatrixXd::Constant(5, 5, 100)};
    FispOptions o;
    o.length = 30;
    const auto x = phantom_to_stack(maps, generate_fisp(o));
    Eigen::JacobiSVD<MatrixXcd> s(x.data);
    EXPECT_LT(s.singularValues()[1], 1e-12 * s.singularValues()[0]);
}

TEST(Phantom, MapsParamsRoundTrip) {
    const auto maps = make_phantom(PhantomSpec::desk());
    const MatrixXd p = to_params(maps);
    ASSERT_EQ(p.rows(), 1024);
    EXPECT_EQ(p(16 * 32 + 16, 0), 800.0);
    const auto back = to_maps(p, 32, 32);
    EXPECT_EQ(back.t1, maps.t1);
    EXPECT_EQ(back.t2, maps.t2);
    EXPECT_THROW(to_maps(p, 31, 32), ParameterError);
}
