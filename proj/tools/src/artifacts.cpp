#include "artifacts.hpp"

#include "mrf/error.hpp"
#include "mrf/io.hpp"

namespace mrf::cli {

void save_stack(const std::filesystem::path &path, const ContrastStack &stack) {
    stack.check();
    Tensor t;
    t.dims = {static_cast<std::uint64_t>(stack.height), static_cast<std::uint64_t>(stack.width),
              static_cast<std::uint64_t>(stack.frames())};
    std::vector<cplx> v(static_cast<std::size_t>(stack.data.size()));
    const RowMatrixXcd rows = stack.data;
    std::copy(rows.data(), rows.data() + rows.size(), v.begin());
    t.values = std::move(v);
    write_tensor(path, t);
}

ContrastStack load_stack(const std::filesystem::path &path) {
    const Tensor t = read_tensor(path);
    if (t.dtype() != DType::Complex128 || t.dims.size() != 3)
        throw IoError("io", path.string() + ": expected a complex [height][width][frames] tensor");
    const auto h = static_cast<Index>(t.dims[0]), w = static_cast<Index>(t.dims[1]),
               l = static_cast<Index>(t.dims[2]);
    const auto &v = std::get<1>(t.values);
    ContrastStack s;
    s.height = h;
    s.width = w;
    s.data = Eigen::Map<const RowMatrixXcd>(v.data(), h * w, l);
    s.check();
    return s;
}

void save_map(const std::filesystem::path &path, const MatrixXd &map) { write_tensor(path, Tensor::from(map)); }

MatrixXd load_map(const std::filesystem::path &path) { return read_tensor(path).to_real_matrix(); }

void save_maps(const std::filesystem::path &dir, const ParameterMaps &maps, double t1_display_max,
               double t2_display_max) {
    save_map(dir / "t1_map.hyt", maps.t1);
    save_map(dir / "t2_map.hyt", maps.t2);
    write_pgm(dir / "t1_map.pgm", maps.t1, 0.0, t1_display_max);
    write_pgm(dir / "t2_map.pgm", maps.t2, 0.0, t2_display_max);
}

void save_metrics(const std::filesystem::path &dir, const MetricsReport &report) {
    write_text(dir / "metrics.json", report.to_json().dump(2) + "\n");
    write_text(dir / "metrics.csv", report.to_csv());
}

} // namespace mrf::cli
