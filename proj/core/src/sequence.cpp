#include "mrf/sequence.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mrf/error.hpp"
#include "mrf/random.hpp"

namespace mrf {

namespace {

constexpr const char *kModule = "sequence";

double lattice_gradient(std::uint64_t seed, Index k) {
    Rng rng(substream_seed(seed, static_cast<std::uint64_t>(k)));
    return 2.0 * rng.uniform() - 1.0;
}

std::string frame_msg(const char *field, Index i, const std::string &detail) {
    std::ostringstream os;
    os << field << " at frame " << i << ": " << detail;
    return os.str();
}

} // namespace

double gradient_noise(std::uint64_t seed, Index i, Index spacing) {
    const double x = static_cast<double>(i) / static_cast<double>(spacing);
    const auto k0 = static_cast<Index>(std::floor(x));
    const double t = x - static_cast<double>(k0);
    const double d0 = lattice_gradient(seed, k0) * t;
    const double d1 = lattice_gradient(seed, k0 + 1) * (t - 1.0);
    const double fade = t * t * (3.0 - 2.0 * t);
    // Raw 1D gradient noise lies in [-0.5, 0.5].
    return std::clamp(2.0 * (d0 + fade * (d1 - d0)), -1.0, 1.0);
}

SequenceParams generate_fisp(const FispOptions &o) {
    if (o.length < 1)
        throw ParameterError(kModule, "length must be >= 1");
    if (!(o.fa_amplitude_deg > 0.0 && o.fa_amplitude_deg <= 180.0))
        throw ParameterError(kModule, "fa_amplitude_deg must lie in (0, 180]");
    if (o.fa_period < 1)
        throw ParameterError(kModule, "fa_period must be >= 1");
    if (!(o.tr_halfspan_ms >= 0.0))
        throw ParameterError(kModule, "tr_halfspan_ms must be >= 0");
    if (!(o.te_ms > 0.0))
        throw ParameterError(kModule, "te_ms must be > 0");
    if (!(o.te_ms < o.tr_center_ms - o.tr_halfspan_ms))
        throw ParameterError(kModule, "te_ms must be < tr_center_ms - tr_halfspan_ms");
    if (o.noise_spacing < 1)
        throw ParameterError(kModule, "noise_spacing must be >= 1");
    if (o.inversion && !(o.ti_ms >= 0.0))
        throw ParameterError(kModule, "ti_ms must be >= 0");

    SequenceParams seq;
    const auto n = static_cast<std::size_t>(o.length);
    seq.tr_ms.resize(n);
    seq.te_ms.assign(n, o.te_ms);
    seq.fa_deg.resize(n);
    seq.inversion = o.inversion;
    seq.ti_ms = o.ti_ms;
    seq.seed = o.seed;

    const double w = 2.0 * std::numbers::pi / static_cast<double>(o.fa_period);
    for (std::size_t i = 0; i < n; ++i) {
        seq.fa_deg[i] = o.fa_amplitude_deg * std::abs(std::sin(w * static_cast<double>(i)));
        seq.tr_ms[i] = o.tr_center_ms +
                       o.tr_halfspan_ms * gradient_noise(o.seed, static_cast<Index>(i), o.noise_spacing);
    }
    return seq;
}

void validate(const SequenceParams &seq) {
    const auto n = seq.fa_deg.size();
    if (n == 0)
        throw ParameterError(kModule, "sequence has no frames");
    if (seq.tr_ms.size() != n || seq.te_ms.size() != n)
        throw ParameterError(kModule, "tr_ms, te_ms and fa_deg must have equal length");
    for (std::size_t i = 0; i < n; ++i) {
        const auto idx = static_cast<Index>(i);
        if (!std::isfinite(seq.tr_ms[i]) || !std::isfinite(seq.te_ms[i]) || !std::isfinite(seq.fa_deg[i]))
            throw ParameterError(kModule, frame_msg("tr_ms/te_ms/fa_deg", idx, "non-finite value"));
        if (!(seq.te_ms[i] > 0.0))
            throw ParameterError(kModule, frame_msg("te_ms", idx, "must be > 0"));
        if (!(seq.tr_ms[i] > seq.te_ms[i]))
            throw ParameterError(kModule, frame_msg("te_ms", idx, "must be < tr_ms"));
        if (seq.fa_deg[i] < 0.0 || seq.fa_deg[i] > 180.0)
            throw ParameterError(kModule, frame_msg("fa_deg", idx, "out of range [0, 180]"));
    }
    if (seq.inversion && !(seq.ti_ms >= 0.0 && std::isfinite(seq.ti_ms)))
        throw ParameterError(kModule, "ti_ms must be finite and >= 0");
}

std::uint64_t fingerprint(const SequenceParams &seq) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xFFu;
            h *= 0x100000001b3ULL;
        }
    };
    feed(static_cast<std::uint64_t>(seq.length()));
    for (Index i = 0; i < seq.length(); ++i) {
        feed(std::bit_cast<std::uint64_t>(seq.tr_ms[i]));
        feed(std::bit_cast<std::uint64_t>(seq.te_ms[i]));
        feed(std::bit_cast<std::uint64_t>(seq.fa_deg[i]));
    }
    feed(seq.inversion ? 1 : 0);
    feed(std::bit_cast<std::uint64_t>(seq.inversion ? seq.ti_ms : 0.0));
    return h;
}

void save_sequence(const std::filesystem::path &csv_path, const SequenceParams &seq) {
    std::ofstream csv(csv_path);
    if (!csv)
        throw IoError(kModule, "cannot write " + csv_path.string());
    csv << "frame,tr_ms,te_ms,fa_deg\n" << std::setprecision(17);
    for (Index i = 0; i < seq.length(); ++i)
        csv << i << ',' << seq.tr_ms[i] << ',' << seq.te_ms[i] << ',' << seq.fa_deg[i] << '\n';
    if (!csv)
        throw IoError(kModule, "write failed for " + csv_path.string());

    auto sidecar = csv_path;
    sidecar.replace_extension(".json");
    std::ofstream js(sidecar);
    if (!js)
        throw IoError(kModule, "cannot write " + sidecar.string());
    const nlohmann::json meta = {{"seed", seq.seed}, {"inversion", seq.inversion}, {"ti_ms", seq.ti_ms}};
    js << meta.dump(2) << '\n';
}

SequenceParams load_sequence(const std::filesystem::path &csv_path) {
    std::ifstream csv(csv_path);
    if (!csv)
        throw IoError(kModule, "cannot read " + csv_path.string());
    std::string line;
    std::getline(csv, line);
    if (line.rfind("frame,tr_ms,te_ms,fa_deg", 0) != 0)
        throw IoError(kModule, "unexpected header in " + csv_path.string());

    SequenceParams seq;
    Index expected = 0;
    while (std::getline(csv, line)) {
        if (line.empty())
            continue;
        std::istringstream row(line);
        std::string cell[4];
        for (auto &c : cell)
            std::getline(row, c, ',');
        try {
            if (std::stoll(cell[0]) != expected)
                throw IoError(kModule, "frames out of order in " + csv_path.string());
            seq.tr_ms.push_back(std::stod(cell[1]));
            seq.te_ms.push_back(std::stod(cell[2]));
            seq.fa_deg.push_back(std::stod(cell[3]));
        } catch (const std::logic_error &) {
            throw IoError(kModule, "malformed row " + std::to_string(expected) + " in " + csv_path.string());
        }
        ++expected;
    }

    auto sidecar = csv_path;
    sidecar.replace_extension(".json");
    std::ifstream js(sidecar);
    if (!js)
        throw IoError(kModule, "missing sidecar " + sidecar.string());
    try {
        const auto meta = nlohmann::json::parse(js);
        seq.seed = meta.at("seed").get<std::uint64_t>();
        seq.inversion = meta.at("inversion").get<bool>();
        seq.ti_ms = meta.at("ti_ms").get<double>();
    } catch (const nlohmann::json::exception &e) {
        throw IoError(kModule, "bad sidecar " + sidecar.string() + ": " + e.what());
    }
    validate(seq);
    return seq;
}

} // namespace mrf
