#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mrf/types.hpp"

namespace mrf {

/// Per-frame FISP acquisition schedule.
struct SequenceParams {
    std::vector<double> tr_ms;
    std::vector<double> te_ms;
    std::vector<double> fa_deg;
    bool inversion = true;
    double ti_ms = 20.0;
    /// Seed the schedule was generated from; carried to the JSON sidecar.
    std::uint64_t seed = 0;

    Index length() const { return static_cast<Index>(fa_deg.size()); }
};

struct FispOptions {
    Index length = 200;
    std::uint64_t seed = 0;
    double fa_amplitude_deg = 70.0;
    Index fa_period = 500;
    double tr_center_ms = 13.0;
    double tr_halfspan_ms = 1.5;
    double te_ms = 2.0;
    bool inversion = true;
    double ti_ms = 20.0;
    /// Lattice spacing of the TR gradient noise, in frames.
    Index noise_spacing = 32;
};

/// Rectified-sine flip angles with gradient-noise TR jitter. Pure function
/// of its options.
SequenceParams generate_fisp(const FispOptions &opts);

/// Seedable 1D gradient noise in [-1, 1] evaluated at integer frame `i`.
double gradient_noise(std::uint64_t seed, Index i, Index spacing);

/// Throws ParameterError naming the first violated invariant (and frame).
void validate(const SequenceParams &seq);

/// FNV-1a hash over every field that influences simulated signatures.
std::uint64_t fingerprint(const SequenceParams &seq);

/// `frame,tr_ms,te_ms,fa_deg` CSV plus `<stem>.json` sidecar with seed,
/// inversion and ti_ms.
void save_sequence(const std::filesystem::path &csv_path, const SequenceParams &seq);
SequenceParams load_sequence(const std::filesystem::path &csv_path);

} // namespace mrf
