#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "mrf/sequence.hpp"
#include "mrf/types.hpp"

namespace mrf {

struct GridRange {
    double min = 1;
    double max = 1;
    double step = 1;

    /// min, min + step, ... up to max (inclusive when on the lattice).
    std::vector<double> values() const;
};

struct GridDescriptor {
    GridRange t1;
    GridRange t2;
};

/// K x 2 table of (T1, T2) generators.
struct LookupTable {
    std::vector<TissueParams> entries;
    std::optional<GridDescriptor> grid;

    Index size() const { return static_cast<Index>(entries.size()); }
    const TissueParams &operator[](Index k) const { return entries[static_cast<std::size_t>(k)]; }
};

/// Cartesian grid filtered to T1 >= T2, ordered T2-major then T1 ascending.
LookupTable build_lut(const GridRange &t1, const GridRange &t2);

enum class MatchNorm {
    Squared,  ///< Re<D_k, x> / |D_k|^2
    Unit,     ///< Re<D_k, x> / |D_k|
};

struct MatchResult {
    Index index = 0;
    TissueParams tissue;
};

/// Simulated signatures paired with their lookup table. Immutable after build.
class Dictionary {
public:
    Dictionary(RowMatrixXcd signatures, LookupTable lut, std::uint64_t sequence_fingerprint);

    Index size() const { return re_.rows(); }
    Index length() const { return re_.cols(); }
    const LookupTable &lut() const { return lut_; }
    const VectorXd &norms_sq() const { return norms_sq_; }
    std::uint64_t sequence_fingerprint() const { return fingerprint_; }

    VectorXcd signature(Index k) const;
    MatrixXcd signatures() const;

    /// Matching scores for one query (length K).
    VectorXd scores(const VectorXcd &query, MatchNorm norm = MatchNorm::Unit) const;

    /// Best-scoring index for each row of `queries` (N x length). Queries are
    /// scored in zero-padded blocks of fixed width against row tiles of the
    /// dictionary, so a query's result does not depend on its batch.
    std::vector<Index> best_matches(const MatrixXcd &queries, MatchNorm norm = MatchNorm::Unit) const;

private:
    RowMatrixXd re_, im_;
    VectorXd norms_sq_, norms_;
    LookupTable lut_;
    std::uint64_t fingerprint_;
};

Dictionary build_dictionary(const LookupTable &lut, const SequenceParams &seq);

/// argmax_k of the score; ties go to the lowest k.
MatchResult match(const Dictionary &dict, const VectorXcd &query, MatchNorm norm = MatchNorm::Unit);

/// Row j of the result is (T1, T2) of match(dict, stack row j).
MatrixXd match_batch(const Dictionary &dict, const ContrastStack &stack, MatchNorm norm = MatchNorm::Unit);
MatrixXd match_batch(const Dictionary &dict, const MatrixXcd &signatures, MatchNorm norm = MatchNorm::Unit);

/// Directory layout: dictionary.hyt (complex K x L), lut.csv, dictionary.json.
void save_dictionary(const std::filesystem::path &dir, const Dictionary &dict);
Dictionary load_dictionary(const std::filesystem::path &dir);

void save_lut(const std::filesystem::path &csv_path, const LookupTable &lut);
LookupTable load_lut(const std::filesystem::path &csv_path);

} // namespace mrf
