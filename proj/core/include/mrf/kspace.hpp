#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "mrf/types.hpp"

namespace mrf {

/// Boolean h x w k-space sampling pattern, row-major, DC at (h/2, w/2).
struct SamplingMask {
    Index height = 0;
    Index width = 0;
    std::vector<std::uint8_t> keep;

    Index count() const;
    double ratio() const { return static_cast<double>(count()) / static_cast<double>(height * width); }
    /// Row-major indices of kept cells.
    std::vector<Index> kept_indices() const;

    static SamplingMask full(Index height, Index width);
};

struct KSpaceFrame {
    SamplingMask mask;
    VectorXcd samples;  ///< kept cells in row-major order
};

struct KSpaceData {
    Index height = 0;
    Index width = 0;
    std::vector<KSpaceFrame> frames;

    Index length() const { return static_cast<Index>(frames.size()); }
    void check() const;
};

/// Generation parameters recorded in the mask manifest.
struct MaskSettings {
    double beta = 0.15;
    double sigma_frac = 0.25;
    std::uint64_t seed = 0;
};

/// One variable-density mask per frame, each keeping exactly round(beta*h*w)
/// cells. Cells are drawn without replacement with weight
/// exp(-(r / (sigma_frac * min(h, w)))^2 / 2); the 4x4 block around DC is
/// always kept. Frame i uses an independent substream of `seed`.
std::vector<SamplingMask> make_gaussian_masks(Index height, Index width, Index frames, double beta,
                                              double sigma_frac, std::uint64_t seed);

/// Unitary, centred 2D DFT of a row-major frame followed by a gather of the
/// kept cells.
VectorXcd forward(const VectorXcd &frame, const SamplingMask &mask);

/// Zero-filled scatter followed by the inverse unitary centred 2D DFT.
VectorXcd adjoint(const VectorXcd &samples, const SamplingMask &mask);

/// Full centred unitary transforms (no masking), row-major h x w.
VectorXcd fft2c(const VectorXcd &image, Index height, Index width);
VectorXcd ifft2c(const VectorXcd &kspace, Index height, Index width);

KSpaceData subsample_stack(const ContrastStack &x, const std::vector<SamplingMask> &masks);
ContrastStack zero_fill_stack(const KSpaceData &y);

/// Writes masks/frame_XXXX.pbm, masks.json and kspace.hyt (Q x L when every
/// frame keeps the same number of cells, otherwise a flat concatenation).
void save_kspace(const std::filesystem::path &dir, const KSpaceData &y,
                 const std::optional<MaskSettings> &settings = std::nullopt);
KSpaceData load_kspace(const std::filesystem::path &dir);

} // namespace mrf
