#include "mrf/kspace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <iomanip>

#include <fftw3.h>
#include <nlohmann/json.hpp>

#include "mrf/error.hpp"
#include "mrf/io.hpp"
#include "mrf/parallel.hpp"
#include "mrf/random.hpp"

namespace mrf {

namespace {

constexpr const char *kModule = "kspace";

// FFTW planning is not thread-safe; executing an existing plan on new
// arrays is. Plans are cached per (h, w, direction) and never destroyed.
fftw_plan plan_for(Index h, Index w, int sign) {
    static std::mutex guard;
    static std::map<std::tuple<Index, Index, int>, fftw_plan> plans;
    std::lock_guard lock(guard);
    auto key = std::make_tuple(h, w, sign);
    if (auto it = plans.find(key); it != plans.end())
        return it->second;
    std::vector<cplx> a(static_cast<std::size_t>(h * w)), b(a.size());
    fftw_plan p = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w),
                                   reinterpret_cast<fftw_complex *>(a.data()),
                                   reinterpret_cast<fftw_complex *>(b.data()), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p)
        throw NumericalError(kModule, "FFTW planning failed");
    plans.emplace(key, p);
    return p;
}

// out[(r + sh) % h][(c + sw) % w] = in[r][c]
void circshift(const cplx *in, cplx *out, Index h, Index w, Index sh, Index sw) {
    for (Index r = 0; r < h; ++r) {
        const Index rr = (r + sh) % h;
        for (Index c = 0; c < w; ++c)
            out[rr * w + (c + sw) % w] = in[r * w + c];
    }
}

VectorXcd centred_transform(const VectorXcd &x, Index h, Index w, int sign) {
    if (x.size() != h * w)
        throw ParameterError(kModule, "frame size does not match geometry");
    // ifftshift moves the centre (h/2, w/2) to the origin; fftshift undoes it.
    VectorXcd a(h * w), b(h * w);
    circshift(x.data(), a.data(), h, w, h - h / 2, w - w / 2);
    fftw_execute_dft(plan_for(h, w, sign), reinterpret_cast<fftw_complex *>(a.data()),
                     reinterpret_cast<fftw_complex *>(b.data()));
    circshift(b.data(), a.data(), h, w, h / 2, w / 2);
    a /= std::sqrt(static_cast<double>(h * w));
    return a;
}

} // namespace

Index SamplingMask::count() const {
    return static_cast<Index>(std::count(keep.begin(), keep.end(), std::uint8_t{1}));
}

std::vector<Index> SamplingMask::kept_indices() const {
    std::vector<Index> idx;
    idx.reserve(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i)
        if (keep[i])
            idx.push_back(static_cast<Index>(i));
    return idx;
}

SamplingMask SamplingMask::full(Index height, Index width) {
    return {height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height * width), 1)};
}

void KSpaceData::check() const {
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto &f = frames[i];
        if (f.mask.height != height || f.mask.width != width ||
            static_cast<Index>(f.mask.keep.size()) != height * width)
            throw ParameterError(kModule, "mask geometry mismatch at frame " + std::to_string(i));
        if (f.samples.size() != f.mask.count())
            throw ParameterError(kModule, "sample count mismatch at frame " + std::to_string(i));
    }
}

std::vector<SamplingMask> make_gaussian_masks(Index h, Index w, Index frames, double beta, double sigma_frac,
                                              std::uint64_t seed) {
    if (!(beta > 0.0 && beta <= 1.0))
        throw ParameterError(kModule, "beta must lie in (0, 1]");
    if (!(sigma_frac > 0.0))
        throw ParameterError(kModule, "sigma_frac must be > 0");
    if (h < 4 || w < 4 || frames < 1)
        throw ParameterError(kModule, "masks need h, w >= 4 and at least one frame");
    const auto budget = static_cast<Index>(std::llround(beta * static_cast<double>(h * w)));
    if (budget < 16)
        throw ParameterError(kModule, "beta*h*w < 16: the 4x4 centre block does not fit");

    const Index cy = h / 2, cx = w / 2;
    const double sigma = sigma_frac * static_cast<double>(std::min(h, w));
    std::vector<double> log_weight(static_cast<std::size_t>(h * w));
    std::vector<std::uint8_t> centre(static_cast<std::size_t>(h * w), 0);
    for (Index r = 0; r < h; ++r) {
        for (Index c = 0; c < w; ++c) {
            const double dy = static_cast<double>(r - cy), dx = static_cast<double>(c - cx);
            const double rr = std::sqrt(dx * dx + dy * dy) / sigma;
            log_weight[static_cast<std::size_t>(r * w + c)] = -0.5 * rr * rr;
            if (r >= cy - 2 && r < cy + 2 && c >= cx - 2 && c < cx + 2)
                centre[static_cast<std::size_t>(r * w + c)] = 1;
        }
    }

    std::vector<SamplingMask> masks(static_cast<std::size_t>(frames));
    for (Index f = 0; f < frames; ++f) {
        // Weighted sampling without replacement (Efraimidis-Spirakis): keep
        // the cells with the largest log(u) / weight keys.
        Rng rng(substream_seed(seed, static_cast<std::uint64_t>(f)));
        std::vector<std::pair<double, Index>> keys;
        keys.reserve(log_weight.size());
        for (Index i = 0; i < h * w; ++i) {
            const double u = rng.uniform_open0();
            if (centre[static_cast<std::size_t>(i)])
                continue;
            keys.emplace_back(std::log(u) * std::exp(-log_weight[static_cast<std::size_t>(i)]), i);
        }
        const auto extra = static_cast<std::size_t>(budget - 16);
        std::nth_element(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(extra), keys.end(),
                         [](const auto &a, const auto &b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
        SamplingMask m{h, w, centre};
        for (std::size_t k = 0; k < extra; ++k)
            m.keep[static_cast<std::size_t>(keys[k].second)] = 1;
        masks[static_cast<std::size_t>(f)] = std::move(m);
    }
    return masks;
}

VectorXcd fft2c(const VectorXcd &image, Index h, Index w) { return centred_transform(image, h, w, FFTW_FORWARD); }

VectorXcd ifft2c(const VectorXcd &kspace, Index h, Index w) { return centred_transform(kspace, h, w, FFTW_BACKWARD); }

VectorXcd forward(const VectorXcd &frame, const SamplingMask &mask) {
    if (frame.size() != mask.height * mask.width)
        throw ParameterError(kModule, "frame size does not match mask geometry");
    const VectorXcd k = fft2c(frame, mask.height, mask.width);
    VectorXcd out(mask.count());
    Index q = 0;
    for (Index i = 0; i < k.size(); ++i)
        if (mask.keep[static_cast<std::size_t>(i)])
            out[q++] = k[i];
    return out;
}

VectorXcd adjoint(const VectorXcd &samples, const SamplingMask &mask) {
    if (samples.size() != mask.count())
        throw ParameterError(kModule, "sample count " + std::to_string(samples.size()) + " != mask count " +
                                          std::to_string(mask.count()));
    VectorXcd k = VectorXcd::Zero(mask.height * mask.width);
    Index q = 0;
    for (Index i = 0; i < k.size(); ++i)
        if (mask.keep[static_cast<std::size_t>(i)])
            k[i] = samples[q++];
    return ifft2c(k, mask.height, mask.width);
}

KSpaceData subsample_stack(const ContrastStack &x, const std::vector<SamplingMask> &masks) {
    if (static_cast<Index>(masks.size()) != x.frames())
        throw ParameterError(kModule, "need one mask per frame");
    if (x.pixels() != x.height * x.width)
        throw ParameterError(kModule, "stack geometry mismatch");
    KSpaceData y{x.height, x.width, std::vector<KSpaceFrame>(masks.size())};
    for (std::size_t i = 0; i < masks.size(); ++i)
        if (masks[i].height != x.height || masks[i].width != x.width)
            throw ParameterError(kModule, "mask geometry mismatch at frame " + std::to_string(i));
    parallel_for(x.frames(), [&](std::ptrdiff_t i) {
        auto &f = y.frames[static_cast<std::size_t>(i)];
        f.mask = masks[static_cast<std::size_t>(i)];
        f.samples = forward(x.data.col(i), f.mask);
    });
    return y;
}

ContrastStack zero_fill_stack(const KSpaceData &y) {
    y.check();
    ContrastStack x{MatrixXcd(y.height * y.width, y.length()), y.height, y.width};
    parallel_for(y.length(), [&](std::ptrdiff_t i) {
        const auto &f = y.frames[static_cast<std::size_t>(i)];
        x.data.col(i) = adjoint(f.samples, f.mask);
    });
    return x;
}

void save_kspace(const std::filesystem::path &dir, const KSpaceData &y, const std::optional<MaskSettings> &settings) {
    y.check();
    std::filesystem::create_directories(dir / "masks");
    nlohmann::json manifest;
    manifest["height"] = y.height;
    manifest["width"] = y.width;
    manifest["frames"] = y.length();
    if (settings) {
        manifest["beta"] = settings->beta;
        manifest["sigma_frac"] = settings->sigma_frac;
        manifest["seed"] = settings->seed;
    }
    std::vector<Index> counts;
    std::vector<std::string> files;
    for (Index i = 0; i < y.length(); ++i) {
        std::ostringstream name;
        name << "frame_" << std::setw(4) << std::setfill('0') << i << ".pbm";
        const auto &m = y.frames[static_cast<std::size_t>(i)].mask;
        write_pbm(dir / "masks" / name.str(), m.height, m.width, m.keep);
        files.push_back("masks/" + name.str());
        counts.push_back(m.count());
    }
    manifest["counts"] = counts;
    manifest["files"] = files;

    const bool uniform = std::adjacent_find(counts.begin(), counts.end(), std::not_equal_to<>()) == counts.end();
    manifest["layout"] = uniform ? "QxL" : "concatenated";
    if (uniform && !counts.empty()) {
        MatrixXcd q(counts.front(), y.length());
        for (Index i = 0; i < y.length(); ++i)
            q.col(i) = y.frames[static_cast<std::size_t>(i)].samples;
        write_tensor(dir / "kspace.hyt", Tensor::from(q));
    } else {
        const Index total = std::accumulate(counts.begin(), counts.end(), Index{0});
        MatrixXcd flat(total, 1);
        Index off = 0;
        for (const auto &f : y.frames) {
            flat.block(off, 0, f.samples.size(), 1) = f.samples;
            off += f.samples.size();
        }
        write_tensor(dir / "kspace.hyt", Tensor::from(flat));
    }
    write_text(dir / "masks.json", manifest.dump(2) + "\n");
}

KSpaceData load_kspace(const std::filesystem::path &dir) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_text(dir / "masks.json"));
    } catch (const nlohmann::json::exception &e) {
        throw IoError(kModule, std::string("bad mask manifest: ") + e.what());
    }
    KSpaceData y;
    y.height = manifest.at("height");
    y.width = manifest.at("width");
    const auto files = manifest.at("files").get<std::vector<std::string>>();
    const MatrixXcd data = read_tensor(dir / "kspace.hyt").to_complex_matrix();
    const bool uniform = manifest.at("layout") == "QxL";
    Index off = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        KSpaceFrame f;
        Index h = 0, w = 0;
        f.mask.keep = read_pbm(dir / files[i], h, w);
        f.mask.height = h;
        f.mask.width = w;
        const Index q = f.mask.count();
        if (uniform) {
            if (data.rows() != q || data.cols() != static_cast<Index>(files.size()))
                throw IoError(kModule, "k-space tensor shape does not match masks");
            f.samples = data.col(static_cast<Index>(i));
        } else {
            if (off + q > data.rows())
                throw IoError(kModule, "k-space tensor shorter than masks require");
            f.samples = data.block(off, 0, q, 1);
            off += q;
        }
        y.frames.push_back(std::move(f));
    }
    try {
        y.check();
    } catch (const ParameterError &e) {
        throw IoError(kModule, e.what());
    }
    return y;
}

} // namespace mrf
