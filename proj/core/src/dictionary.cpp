#include "mrf/dictionary.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mrf/epg.hpp"
#include "mrf/error.hpp"
#include "mrf/io.hpp"
#include "mrf/parallel.hpp"

namespace mrf {

namespace {
constexpr const char *kModule = "dict";

void check_range(const GridRange &r, const char *name) {
    if (!(r.step > 0.0) || !std::isfinite(r.step))
        throw ParameterError(kModule, std::string(name) + " step must be > 0");
    if (!(r.min >= 1.0) || !std::isfinite(r.min) || !std::isfinite(r.max))
        throw ParameterError(kModule, std::string(name) + " min must be >= 1");
}
} // namespace

std::vector<double> GridRange::values() const {
    std::vector<double> v;
    const double slack = 1e-9 * step;
    for (long n = 0;; ++n) {
        const double x = min + static_cast<double>(n) * step;
        if (x > max + slack)
            break;
        v.push_back(x);
    }
    return v;
}

LookupTable build_lut(const GridRange &t1, const GridRange &t2) {
    check_range(t1, "T1");
    check_range(t2, "T2");
    LookupTable lut;
    const auto t1v = t1.values();
    for (double b : t2.values())
        for (double a : t1v)
            if (a >= b)
                lut.entries.push_back({a, b});
    if (lut.entries.empty())
        throw ParameterError(kModule, "grid contains no T1 >= T2 combination");
    lut.grid = GridDescriptor{t1, t2};
    return lut;
}

Dictionary::Dictionary(RowMatrixXcd signatures, LookupTable lut, std::uint64_t fp)
    : re_(signatures.real()), im_(signatures.imag()), lut_(std::move(lut)), fingerprint_(fp) {
    if (signatures.rows() != lut_.size())
        throw ParameterError(kModule, "signature rows do not match lookup table size");
    if (signatures.rows() < 1)
        throw ParameterError(kModule, "dictionary is empty");
    norms_sq_ = signatures.rowwise().squaredNorm();
    for (Index k = 0; k < norms_sq_.size(); ++k)
        if (!(norms_sq_[k] > 0.0))
            throw NumericalError(kModule, "dictionary row " + std::to_string(k) + " is zero");
    norms_ = norms_sq_.cwiseSqrt();
}

VectorXcd Dictionary::signature(Index k) const {
    VectorXcd v(length());
    v.real() = re_.row(k).transpose();
    v.imag() = im_.row(k).transpose();
    return v;
}

MatrixXcd Dictionary::signatures() const {
    MatrixXcd m(size(), length());
    m.real() = re_;
    m.imag() = im_;
    return m;
}

VectorXd Dictionary::scores(const VectorXcd &q, MatchNorm norm) const {
    // Re<D_k, q> with D conjugated: Re(conj(d) q) = d_re q_re + d_im q_im.
    VectorXd s = re_ * q.real() + im_ * q.imag();
    if (norm == MatchNorm::Squared)
        s.array() /= norms_sq_.array();
    else
        s.array() /= norms_.array();
    return s;
}

std::vector<Index> Dictionary::best_matches(const MatrixXcd &queries, MatchNorm norm) const {
    constexpr Index kBlock = 32;
    constexpr Index kTile = 512;
    const Index n = queries.rows();
    const Index blocks = (n + kBlock - 1) / kBlock;
    const VectorXd &scale = norm == MatchNorm::Squared ? norms_sq_ : norms_;
    std::vector<Index> best(static_cast<std::size_t>(n), 0);
    parallel_for(blocks, [&](std::ptrdiff_t b) {
        const Index j0 = b * kBlock;
        const Index width = std::min(kBlock, n - j0);
        MatrixXd q_re = MatrixXd::Zero(length(), kBlock), q_im = MatrixXd::Zero(length(), kBlock);
        q_re.leftCols(width) = queries.middleRows(j0, width).real().transpose();
        q_im.leftCols(width) = queries.middleRows(j0, width).imag().transpose();
        std::vector<double> top(static_cast<std::size_t>(width), -std::numeric_limits<double>::infinity());
        MatrixXd s(kTile, kBlock);
        for (Index k0 = 0; k0 < size(); k0 += kTile) {
            const Index rows = std::min(kTile, size() - k0);
            auto tile = s.topRows(rows);
            tile.noalias() = re_.middleRows(k0, rows) * q_re;
            tile.noalias() += im_.middleRows(k0, rows) * q_im;
            for (Index j = 0; j < width; ++j) {
                auto &t = top[static_cast<std::size_t>(j)];
                auto &idx = best[static_cast<std::size_t>(j0 + j)];
                for (Index k = 0; k < rows; ++k) {
                    const double v = tile(k, j) / scale[k0 + k];
                    if (v > t) {
                        t = v;
                        idx = k0 + k;
                    }
                }
            }
        }
    });
    return best;
}

Dictionary build_dictionary(const LookupTable &lut, const SequenceParams &seq) {
    if (lut.size() < 1)
        throw ParameterError(kModule, "lookup table is empty");
    RowMatrixXcd d = simulate_batch(lut.entries, seq);
    return Dictionary(std::move(d), lut, fingerprint(seq));
}

MatchResult match(const Dictionary &dict, const VectorXcd &query, MatchNorm norm) {
    if (query.size() != dict.length())
        throw ParameterError(kModule, "query length " + std::to_string(query.size()) +
                                          " != dictionary length " + std::to_string(dict.length()));
    if (query.cwiseAbs2().sum() == 0.0)
        throw ParameterError(kModule, "query signature is all zero");
    const Index best = dict.best_matches(query.transpose(), norm).front();
    return {best, dict.lut()[best]};
}

MatrixXd match_batch(const Dictionary &dict, const MatrixXcd &signatures, MatchNorm norm) {
    if (signatures.cols() != dict.length())
        throw ParameterError(kModule, "query length " + std::to_string(signatures.cols()) +
                                          " != dictionary length " + std::to_string(dict.length()));
    for (Index j = 0; j < signatures.rows(); ++j)
        if (signatures.row(j).cwiseAbs2().sum() == 0.0)
            throw ParameterError(kModule, "row " + std::to_string(j) + ": query signature is all zero");
    const auto best = dict.best_matches(signatures, norm);
    MatrixXd out(signatures.rows(), 2);
    for (Index j = 0; j < signatures.rows(); ++j) {
        const auto &t = dict.lut()[best[static_cast<std::size_t>(j)]];
        out(j, 0) = t.t1_ms;
        out(j, 1) = t.t2_ms;
    }
    return out;
}

MatrixXd match_batch(const Dictionary &dict, const ContrastStack &stack, MatchNorm norm) {
    return match_batch(dict, stack.data, norm);
}

void save_lut(const std::filesystem::path &csv_path, const LookupTable &lut) {
    std::ostringstream os;
    os << "t1_ms,t2_ms\n" << std::setprecision(17);
    for (const auto &e : lut.entries)
        os << e.t1_ms << ',' << e.t2_ms << '\n';
    write_text(csv_path, os.str());
}

LookupTable load_lut(const std::filesystem::path &csv_path) {
    std::istringstream is(read_text(csv_path));
    std::string line;
    std::getline(is, line);
    if (line.rfind("t1_ms,t2_ms", 0) != 0)
        throw IoError(kModule, "unexpected LUT header in " + csv_path.string());
    LookupTable lut;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        const auto comma = line.find(',');
        try {
            lut.entries.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
        } catch (const std::logic_error &) {
            throw IoError(kModule, "malformed LUT row in " + csv_path.string());
        }
    }
    return lut;
}

void save_dictionary(const std::filesystem::path &dir, const Dictionary &dict) {
    std::filesystem::create_directories(dir);
    write_tensor(dir / "dictionary.hyt", Tensor::from(dict.signatures()));
    save_lut(dir / "lut.csv", dict.lut());
    nlohmann::json meta;
    meta["sequence_fingerprint"] = dict.sequence_fingerprint();
    meta["entries"] = dict.size();
    meta["frames"] = dict.length();
    if (dict.lut().grid) {
        const auto &g = *dict.lut().grid;
        meta["grid"] = {{"t1_min", g.t1.min}, {"t1_max", g.t1.max}, {"t1_step", g.t1.step},
                        {"t2_min", g.t2.min}, {"t2_max", g.t2.max}, {"t2_step", g.t2.step}};
    }
    write_text(dir / "dictionary.json", meta.dump(2) + "\n");
}

Dictionary load_dictionary(const std::filesystem::path &dir) {
    auto lut = load_lut(dir / "lut.csv");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_text(dir / "dictionary.json"));
        if (meta.contains("grid")) {
            const auto &g = meta["grid"];
            lut.grid = GridDescriptor{{g.at("t1_min"), g.at("t1_max"), g.at("t1_step")},
                                      {g.at("t2_min"), g.at("t2_max"), g.at("t2_step")}};
        }
    } catch (const nlohmann::json::exception &e) {
        throw IoError(kModule, std::string("bad dictionary sidecar: ") + e.what());
    }
    RowMatrixXcd d = read_tensor(dir / "dictionary.hyt").to_complex_matrix();
    return Dictionary(std::move(d), std::move(lut), meta.value("sequence_fingerprint", std::uint64_t{0}));
}

} // namespace mrf
