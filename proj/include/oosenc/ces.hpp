#pragma once

#include "oosenc/encodings.hpp"
#include "oosenc/metrics.hpp"
#include "oosenc/model.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace oosenc {

// Componentwise mean of equal-dimension vectors.
Vector mean_vector(const std::vector<Vector>& xs);

// One repulsion step: r_i += lambda * sum_{j != i} unit(r_i - r_j), then
// clamped to [-1,1]. Coincident pairs are separated along a direction drawn
// from `seed`.
ClassEncodingSet repulsion_update(const ClassEncodingSet& enc, double lambda, std::uint64_t seed = 0);

// r_i += weight * (target_i - r_i), clamped. Used for the optional pull of
// each class vector toward the mean projection of its training samples.
ClassEncodingSet attraction_update(const ClassEncodingSet& enc, const std::vector<Vector>& targets, double weight);

struct CesConfig {
    std::size_t iterations = 1000;
    double lambda = 0.0001;
    bool restart_weights = true;
    // 0 selects the default: 50 with restarts, 1 without.
    std::size_t inner_epochs = 0;
    std::uint64_t seed = 0;
    bool attraction_enabled = false;
    // When set, FAR is measured at this fixed distance threshold instead of
    // the per-iteration EER threshold.
    std::optional<double> fixed_theta;
    // Network shape and optimiser settings; dims and loss are filled in by the search.
    NetworkConfig network;

    void validate() const;
    std::size_t effective_inner_epochs() const;
};

struct CesRecord {
    std::size_t iteration = 0;  // 1-based
    double far = 0.0;
    double iser = 0.0;
    double eer = 0.0;
    std::uint64_t encoding_hash = 0;
};

struct CesBest {
    double value = 0.0;
    std::size_t iteration = 0;
    std::optional<ClassEncodingSet> encoding;
};

struct CesTrace {
    std::vector<CesRecord> records;
    CesBest best_far;
    CesBest best_iser;
    // Set when training diverged; records hold the iterations completed before it.
    std::optional<std::string> aborted;

    // Best-so-far FAR after each iteration.
    std::vector<double> best_far_so_far() const;
};

// Alternates MSE fitting of the network toward the current class vectors
// with repulsion updates of the vectors, evaluating FAR and ISER on `eval`
// after every iteration. Deterministic for a fixed config.
CesTrace ces_search(const std::vector<EmbeddedSample>& train, const std::vector<EmbeddedSample>& eval,
                    const ClassEncodingSet& initial, const CesConfig& config);

// "iteration,far,iser" plus one row per record.
std::string trace_csv(const CesTrace& trace);

// Writes trace.csv and the best encodings (best_far_iter<k>.enc,
// best_iser_iter<k>.enc) into `dir`.
void write_trace(const CesTrace& trace, const std::filesystem::path& dir);

}  // namespace oosenc
