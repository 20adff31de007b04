#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrf/sequence.hpp"
#include "mrf/types.hpp"

namespace mrf {

/// sqrt(|X - Xhat|_F^2 / N), N the element count.
double rmse(const MatrixXd &truth, const MatrixXd &estimate);

enum class SnrConvention {
    Energy,    ///< 20 log10(|X|_F^2 / RMSE)
    Standard,  ///< 20 log10(|X|_F / RMSE)
};

/// +infinity when the estimate is exact.
double snr_db(const MatrixXd &truth, const MatrixXd &estimate, SnrConvention convention = SnrConvention::Energy);
double psnr_db(const MatrixXd &truth, const MatrixXd &estimate, double peak);

/// Pearson correlation of the vectorised maps.
double corrcoef(const MatrixXd &truth, const MatrixXd &estimate);

struct MapMetrics {
    double rmse_ms = 0;
    double snr_db = 0;
    double psnr_db = 0;
    double corrcoef = 0;
};

struct MetricsReport {
    std::map<std::string, MapMetrics> maps;        ///< keyed "t1", "t2"
    std::map<std::string, double> timings_s;       ///< per pipeline stage

    nlohmann::json to_json() const;
    /// `map,rmse_ms,snr_db,psnr_db,corrcoef` rows.
    std::string to_csv() const;
};

/// Metrics for one map; PSNR uses the truth map's peak value. Correlation
/// is reported as NaN when either map is constant.
MapMetrics evaluate_map(const MatrixXd &truth, const MatrixXd &estimate,
                        SnrConvention convention = SnrConvention::Energy);

struct Ellipse {
    double cx = 0, cy = 0;      ///< centre in pixel coordinates (x = column, y = row)
    double ax = 1, ay = 1;      ///< semi-axes in pixels
    double angle_deg = 0;
    TissueParams tissue;
};

struct PhantomSpec {
    Index height = 32;
    Index width = 32;
    TissueParams background{500, 50};
    std::vector<Ellipse> regions;

    /// 32 x 32 desk phantom: background plus three ellipses.
    static PhantomSpec desk();
};

struct ParameterMaps {
    MatrixXd t1;  ///< h x w
    MatrixXd t2;
};

/// Rasterises regions in order; later regions overwrite earlier ones.
ParameterMaps make_phantom(const PhantomSpec &spec);

/// Row j is the signature of pixel j (row-major). Each distinct tissue is
/// simulated once.
ContrastStack phantom_to_stack(const ParameterMaps &maps, const SequenceParams &seq);

/// N x 2 parameter matrix <-> h x w maps (row-major pixel order).
ParameterMaps to_maps(const MatrixXd &params, Index height, Index width);
MatrixXd to_params(const ParameterMaps &maps);

} // namespace mrf
