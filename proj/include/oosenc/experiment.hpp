#pragma once

#include "oosenc/dataset.hpp"
#include "oosenc/encodings.hpp"
#include "oosenc/metrics.hpp"
#include "oosenc/model.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace oosenc {

enum class Algorithm { one_hot_softmax, one_hot_distance, random_dense, loaded_encoding };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& s);

struct ExperimentConfig {
    std::vector<Algorithm> algorithms{Algorithm::one_hot_softmax, Algorithm::one_hot_distance,
                                      Algorithm::random_dense};
    std::vector<std::size_t> n_values{10};
    std::size_t samples_per_n = 500;
    // input_dim, output_dim, loss and seed are set per run.
    NetworkConfig network;
    std::uint64_t seed = 0;
    std::optional<ClassEncodingSet> loaded_encoding;
    // Train the 1-hot distance network with MSE toward one-hot targets
    // instead of sharing the cross-entropy regime.
    bool one_hot_distance_mse = false;
    // Worker threads for the K samplings; 0 picks hardware concurrency.
    std::size_t threads = 0;

    void validate(std::size_t num_classes) const;
};

struct MetricStats {
    double avg = 0.0;
    double std = 0.0;  // population standard deviation
    double min = 0.0;
};

MetricStats aggregate(const std::vector<double>& values);

// One trained-and-evaluated configuration.
struct RunResult {
    double eer = 0.0;
    double far = 0.0;  // FAR at the EER threshold
    double iser = 0.0;
    double theta_star = 0.0;
};

struct ReportRow {
    Algorithm algorithm = Algorithm::one_hot_softmax;
    std::size_t n = 0;        // output dimension
    std::size_t samples = 1;  // number of runs aggregated
    MetricStats eer, far, iser;
    std::vector<RunResult> runs;
};

struct ReportTable {
    std::vector<ReportRow> rows;
    std::string split = "test";

    const ReportRow* find(Algorithm a, std::size_t n) const;
};

// Trains one network and evaluates it on data.test.
RunResult run_single(const EmbeddedDataset& data, Algorithm algorithm, const ClassEncodingSet& encoding,
                     const NetworkConfig& network, std::uint64_t seed, bool one_hot_distance_mse = false);

// Random dense sample k (1-based) of R(N): encoding and network both seeded
// from seed + k.
RunResult run_random_sample(const EmbeddedDataset& data, std::size_t n, std::uint64_t seed, std::size_t k,
                            const NetworkConfig& network);

ReportTable run_experiment(const EmbeddedDataset& data, const ExperimentConfig& config);
ReportTable run_experiment(const RawDataset& data, const ExperimentConfig& config, const EmbeddingSource& source);

}  // namespace oosenc
