#include "mrf/eval.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "mrf/epg.hpp"
#include "mrf/error.hpp"

namespace mrf {

namespace {

constexpr const char *kModule = "eval";

void same_shape(const MatrixXd &a, const MatrixXd &b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ParameterError(kModule, "shape mismatch: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                          " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    if (a.size() == 0)
        throw ParameterError(kModule, "empty maps");
}

double json_number(double v) { return std::isfinite(v) ? v : (v > 0 ? 1e308 : -1e308); }

} // namespace

double rmse(const MatrixXd &truth, const MatrixXd &estimate) {
    same_shape(truth, estimate);
    return std::sqrt((truth - estimate).squaredNorm() / static_cast<double>(truth.size()));
}

double snr_db(const MatrixXd &truth, const MatrixXd &estimate, SnrConvention convention) {
    const double e = rmse(truth, estimate);
    if (e == 0.0)
        return std::numeric_limits<double>::infinity();
    const double num = convention == SnrConvention::Energy ? truth.squaredNorm() : truth.norm();
    return 20.0 * std::log10(num / e);
}

double psnr_db(const MatrixXd &truth, const MatrixXd &estimate, double peak) {
    const double e = rmse(truth, estimate);
    if (e == 0.0)
        return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(peak / e);
}

double corrcoef(const MatrixXd &truth, const MatrixXd &estimate) {
    same_shape(truth, estimate);
    const auto n = static_cast<double>(truth.size());
    const Eigen::ArrayXd a = truth.reshaped().array() - truth.sum() / n;
    const Eigen::ArrayXd b = estimate.reshaped().array() - estimate.sum() / n;
    const double sa = std::sqrt((a * a).sum()), sb = std::sqrt((b * b).sum());
    if (sa == 0.0 || sb == 0.0)
        throw ParameterError(kModule, "correlation undefined for a constant map");
    return std::clamp((a * b).sum() / (sa * sb), -1.0, 1.0);
}

MapMetrics evaluate_map(const MatrixXd &truth, const MatrixXd &estimate, SnrConvention convention) {
    MapMetrics m;
    m.rmse_ms = rmse(truth, estimate);
    m.snr_db = snr_db(truth, estimate, convention);
    m.psnr_db = psnr_db(truth, estimate, truth.maxCoeff());
    try {
        m.corrcoef = corrcoef(truth, estimate);
    } catch (const ParameterError &) {
        m.corrcoef = std::numeric_limits<double>::quiet_NaN();
    }
    return m;
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json j;
    for (const auto &[name, m] : maps) {
        j["maps"][name] = {{"rmse_ms", m.rmse_ms},
                           {"snr_db", json_number(m.snr_db)},
                           {"psnr_db", json_number(m.psnr_db)},
                           {"corrcoef", std::isnan(m.corrcoef) ? nlohmann::json() : nlohmann::json(m.corrcoef)}};
    }
    for (const auto &[stage, t] : timings_s)
        j["timings_s"][stage] = t;
    return j;
}

std::string MetricsReport::to_csv() const {
    std::ostringstream os;
    os << "map,rmse_ms,snr_db,psnr_db,corrcoef\n" << std::setprecision(10);
    for (const auto &[name, m] : maps)
        os << name << ',' << m.rmse_ms << ',' << m.snr_db << ',' << m.psnr_db << ',' << m.corrcoef << '\n';
    return os.str();
}

PhantomSpec PhantomSpec::desk() {
    PhantomSpec p;
    p.regions = {
        {16.0, 16.0, 12.0, 9.0, 0.0, {800, 80}},
        {11.5, 14.0, 4.0, 6.0, 20.0, {1200, 110}},
        {21.0, 19.0, 4.0, 3.0, -30.0, {2000, 300}},
    };
    return p;
}

ParameterMaps make_phantom(const PhantomSpec &spec) {
    if (spec.height < 1 || spec.width < 1)
        throw ParameterError(kModule, "phantom needs positive dimensions");
    validate(spec.background);
    ParameterMaps maps{MatrixXd::Constant(spec.height, spec.width, spec.background.t1_ms),
                       MatrixXd::Constant(spec.height, spec.width, spec.background.t2_ms)};
    const auto h = static_cast<double>(spec.height), w = static_cast<double>(spec.width);
    for (std::size_t n = 0; n < spec.regions.size(); ++n) {
        const auto &e = spec.regions[n];
        validate(e.tissue);
        const double rad = e.angle_deg * std::numbers::pi / 180.0;
        const double c = std::cos(rad), s = std::sin(rad);
        // Half-extents of the rotated ellipse's bounding box.
        const double ex = std::sqrt(e.ax * e.ax * c * c + e.ay * e.ay * s * s);
        const double ey = std::sqrt(e.ax * e.ax * s * s + e.ay * e.ay * c * c);
        if (!(e.ax > 0 && e.ay > 0) || e.cx - ex < -0.5 || e.cx + ex > w - 0.5 || e.cy - ey < -0.5 ||
            e.cy + ey > h - 0.5)
            throw ParameterError(kModule, "region " + std::to_string(n) + " exceeds the frame bounds");
        for (Index r = 0; r < spec.height; ++r) {
            for (Index col = 0; col < spec.width; ++col) {
                const double dx = static_cast<double>(col) - e.cx, dy = static_cast<double>(r) - e.cy;
                const double u = (dx * c + dy * s) / e.ax, v = (-dx * s + dy * c) / e.ay;
                if (u * u + v * v <= 1.0) {
                    maps.t1(r, col) = e.tissue.t1_ms;
                    maps.t2(r, col) = e.tissue.t2_ms;
                }
            }
        }
    }
    return maps;
}

ContrastStack phantom_to_stack(const ParameterMaps &maps, const SequenceParams &seq) {
    if (maps.t1.rows() != maps.t2.rows() || maps.t1.cols() != maps.t2.cols())
        throw ParameterError(kModule, "T1 and T2 maps differ in shape");
    const Index h = maps.t1.rows(), w = maps.t1.cols();
    std::map<std::pair<double, double>, Index> slot;
    std::vector<TissueParams> distinct;
    std::vector<Index> pixel_slot(static_cast<std::size_t>(h * w));
    for (Index r = 0; r < h; ++r) {
        for (Index c = 0; c < w; ++c) {
            const auto key = std::make_pair(maps.t1(r, c), maps.t2(r, c));
            auto [it, inserted] = slot.emplace(key, static_cast<Index>(distinct.size()));
            if (inserted)
                distinct.push_back({key.first, key.second});
            pixel_slot[static_cast<std::size_t>(r * w + c)] = it->second;
        }
    }
    const MatrixXcd sigs = simulate_batch(distinct, seq);
    ContrastStack x{MatrixXcd(h * w, seq.length()), h, w};
    for (Index j = 0; j < h * w; ++j)
        x.data.row(j) = sigs.row(pixel_slot[static_cast<std::size_t>(j)]);
    return x;
}

ParameterMaps to_maps(const MatrixXd &params, Index height, Index width) {
    if (params.rows() != height * width || params.cols() != 2)
        throw ParameterError(kModule, "parameter matrix does not match map geometry");
    ParameterMaps m{MatrixXd(height, width), MatrixXd(height, width)};
    for (Index j = 0; j < height * width; ++j) {
        m.t1(j / width, j % width) = params(j, 0);
        m.t2(j / width, j % width) = params(j, 1);
    }
    return m;
}

MatrixXd to_params(const ParameterMaps &maps) {
    const Index h = maps.t1.rows(), w = maps.t1.cols();
    MatrixXd p(h * w, 2);
    for (Index j = 0; j < h * w; ++j) {
        p(j, 0) = maps.t1(j / w, j % w);
        p(j, 1) = maps.t2(j / w, j % w);
    }
    return p;
}

} // namespace mrf
