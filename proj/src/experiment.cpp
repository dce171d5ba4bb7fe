#include "oosenc/experiment.hpp"

#include "oosenc/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace oosenc {

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::one_hot_softmax: return "one_hot_softmax";
        case Algorithm::one_hot_distance: return "one_hot_distance";
        case Algorithm::random_dense: return "random_dense";
        case Algorithm::loaded_encoding: return "loaded_encoding";
    }
    return "?";
}

Algorithm parse_algorithm(const std::string& s) {
    if (s == "one_hot_softmax") return Algorithm::one_hot_softmax;
    if (s == "one_hot_distance") return Algorithm::one_hot_distance;
    if (s == "random_dense") return Algorithm::random_dense;
    if (s == "loaded_encoding") return Algorithm::loaded_encoding;
    throw FormatError("unknown algorithm '" + s + "'");
}

void ExperimentConfig::validate(std::size_t num_classes) const {
    if (algorithms.empty()) throw std::invalid_argument("no algorithms selected");
    if (samples_per_n < 1) throw std::invalid_argument("samples per N must be >= 1");
    const bool dense = std::find(algorithms.begin(), algorithms.end(), Algorithm::random_dense) != algorithms.end();
    if (dense && n_values.empty()) throw std::invalid_argument("random_dense needs at least one N value");
    for (std::size_t n : n_values)
        if (n < 1) throw std::invalid_argument("N values must be >= 1");
    const bool loaded =
        std::find(algorithms.begin(), algorithms.end(), Algorithm::loaded_encoding) != algorithms.end();
    if (loaded && !loaded_encoding) throw std::invalid_argument("loaded_encoding selected without an encoding file");
    if (loaded && loaded_encoding->num_classes() != num_classes)
        throw std::invalid_argument("loaded encoding class count differs from the dataset");
}

MetricStats aggregate(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("aggregate of no values");
    MetricStats s;
    double sum = 0.0;
    s.min = values.front();
    for (double v : values) {
        sum += v;
        s.min = std::min(s.min, v);
    }
    s.avg = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - s.avg) * (v - s.avg);
    s.std = std::sqrt(sq / static_cast<double>(values.size()));
    // Rounding in the mean can put it a hair below the minimum.
    s.avg = std::max(s.avg, s.min);
    return s;
}

const ReportRow* ReportTable::find(Algorithm a, std::size_t n) const {
    for (const auto& r : rows)
        if (r.algorithm == a && r.n == n) return &r;
    return nullptr;
}

RunResult run_single(const EmbeddedDataset& data, Algorithm algorithm, const ClassEncodingSet& encoding,
                     const NetworkConfig& network, std::uint64_t seed, bool one_hot_distance_mse) {
    NetworkConfig cfg = network;
    cfg.input_dim = data.dim;
    cfg.output_dim = encoding.dim();
    cfg.seed = seed;
    DecisionRule rule = DecisionRule::dense;
    switch (algorithm) {
        case Algorithm::one_hot_softmax:
            cfg.loss = LossKind::cross_entropy;
            rule = DecisionRule::softmax;
            break;
        case Algorithm::one_hot_distance:
            cfg.loss = one_hot_distance_mse ? LossKind::mse : LossKind::cross_entropy;
            rule = DecisionRule::one_hot_distance;
            break;
        case Algorithm::random_dense:
        case Algorithm::loaded_encoding:
            cfg.loss = LossKind::mse;
            rule = DecisionRule::dense;
            break;
    }
    const LikelihoodModel model = train_classifier(data.train, encoding, cfg);
    const EvaluationReport rep = evaluate(model, data.test, rule, &encoding);
    return {rep.eer, rep.far_at_theta, rep.iser, rep.theta_star};
}

RunResult run_random_sample(const EmbeddedDataset& data, std::size_t n, std::uint64_t seed, std::size_t k,
                            const NetworkConfig& network) {
    const std::uint64_t sample_seed = seed + k;
    const ClassEncodingSet enc = random_encoding_set(data.num_classes, n, sample_seed);
    return run_single(data, Algorithm::random_dense, enc, network, derive_seed(sample_seed, 1));
}

namespace {

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

ReportRow make_row(Algorithm a, std::size_t n, std::vector<RunResult> runs) {
    ReportRow row;
    row.algorithm = a;
    row.n = n;
    row.samples = runs.size();
    std::vector<double> eer, far, iser;
    for (const auto& r : runs) {
        eer.push_back(r.eer);
        far.push_back(r.far);
        iser.push_back(r.iser);
    }
    row.eer = aggregate(eer);
    row.far = aggregate(far);
    row.iser = aggregate(iser);
    row.runs = std::move(runs);
    return row;
}

}  // namespace

ReportTable run_experiment(const EmbeddedDataset& data, const ExperimentConfig& config) {
    config.validate(data.num_classes);
    if (data.train.empty()) throw std::invalid_argument("no training data");
    ReportTable table;
    const std::size_t c = data.num_classes;
    for (Algorithm a : config.algorithms) {
        switch (a) {
            case Algorithm::one_hot_softmax:
            case Algorithm::one_hot_distance: {
                const auto enc = one_hot_encoding_set(c);
                table.rows.push_back(make_row(
                    a, c, {run_single(data, a, enc, config.network, config.seed, config.one_hot_distance_mse)}));
                break;
            }
            case Algorithm::loaded_encoding: {
                const auto& enc = *config.loaded_encoding;
                table.rows.push_back(make_row(a, enc.dim(), {run_single(data, a, enc, config.network, config.seed)}));
                break;
            }
            case Algorithm::random_dense: {
                for (std::size_t n : config.n_values) {
                    std::vector<RunResult> runs(config.samples_per_n);
                    parallel_for(config.samples_per_n, config.threads, [&](std::size_t i) {
                        runs[i] = run_random_sample(data, n, config.seed, i + 1, config.network);
                    });
                    table.rows.push_back(make_row(a, n, std::move(runs)));
                }
                break;
            }
        }
    }
    return table;
}

ReportTable run_experiment(const RawDataset& data, const ExperimentConfig& config, const EmbeddingSource& source) {
    return run_experiment(embed_dataset(data, source), config);
}

}  // namespace oosenc
