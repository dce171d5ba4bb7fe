#include "oosenc/ces.hpp"

#include "oosenc/common.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace oosenc {

Vector mean_vector(const std::vector<Vector>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean of empty set");
    Vector out(xs.front().size(), 0.0);
    for (const auto& x : xs) {
        if (x.size() != out.size()) throw std::invalid_argument("mean of vectors with unequal dimension");
        for (std::size_t i = 0; i < x.size(); ++i) out[i] += x[i];
    }
    for (double& v : out) v /= static_cast<double>(xs.size());
    return out;
}

ClassEncodingSet repulsion_update(const ClassEncodingSet& enc, double lambda, std::uint64_t seed) {
    if (enc.family() != EncodingFamily::dense) throw std::invalid_argument("repulsion needs a dense encoding");
    const std::size_t c = enc.num_classes();
    const std::size_t p = enc.dim();
    std::vector<Vector> next = enc.vectors();
    for (std::size_t i = 0; i < c; ++i) {
        Vector push(p, 0.0);
        for (std::size_t j = 0; j < c; ++j) {
            if (j == i) continue;
            Vector diff(p);
            for (std::size_t k = 0; k < p; ++k) diff[k] = enc[i][k] - enc[j][k];
            double norm = std::sqrt(std::inner_product(diff.begin(), diff.end(), diff.begin(), 0.0));
            if (norm == 0.0) {
                // Antisymmetric direction for the pair so the two points separate.
                Rng pair_rng(derive_seed(seed, std::min(i, j) * c + std::max(i, j)));
                for (double& d : diff) d = pair_rng.uniform(-1.0, 1.0) * 1e-12;
                if (i > j)
                    for (double& d : diff) d = -d;
                norm = std::sqrt(std::inner_product(diff.begin(), diff.end(), diff.begin(), 0.0));
            }
            for (std::size_t k = 0; k < p; ++k) push[k] += diff[k] / norm;
        }
        for (std::size_t k = 0; k < p; ++k) next[i][k] = std::clamp(enc[i][k] + lambda * push[k], -1.0, 1.0);
    }
    return ClassEncodingSet(std::move(next), EncodingFamily::dense, enc.class_names());
}

ClassEncodingSet attraction_update(const ClassEncodingSet& enc, const std::vector<Vector>& targets, double weight) {
    if (targets.size() != enc.num_classes()) throw std::invalid_argument("one attraction target per class");
    std::vector<Vector> next = enc.vectors();
    for (std::size_t i = 0; i < next.size(); ++i) {
        if (targets[i].size() != enc.dim()) throw std::invalid_argument("attraction target dimension mismatch");
        for (std::size_t k = 0; k < enc.dim(); ++k)
            next[i][k] = std::clamp(next[i][k] + weight * (targets[i][k] - next[i][k]), -1.0, 1.0);
    }
    return ClassEncodingSet(std::move(next), EncodingFamily::dense, enc.class_names());
}

void CesConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("CES needs at least one iteration");
    if (!(lambda > 0.0)) throw std::invalid_argument("CES lambda must be > 0");
}

std::size_t CesConfig::effective_inner_epochs() const {
    if (inner_epochs > 0) return inner_epochs;
    return restart_weights ? 50 : 1;
}

std::vector<double> CesTrace::best_far_so_far() const {
    std::vector<double> out;
    double best = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        best = i == 0 ? records[i].far : std::min(best, records[i].far);
        out.push_back(best);
    }
    return out;
}

namespace {

std::vector<Vector> class_projection_means(const LikelihoodModel& model, const std::vector<EmbeddedSample>& train,
                                           const ClassEncodingSet& enc) {
    std::vector<std::vector<Vector>> by_class(enc.num_classes());
    std::vector<Vector> inputs;
    for (const auto& s : train) inputs.push_back(s.embedding);
    const auto zs = predict_batch(model, inputs);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto v = zs[i].values();
        by_class[train[i].label].emplace_back(v.begin(), v.end());
    }
    std::vector<Vector> out;
    for (std::size_t k = 0; k < by_class.size(); ++k)
        out.push_back(by_class[k].empty() ? enc[k] : mean_vector(by_class[k]));
    return out;
}

}  // namespace

CesTrace ces_search(const std::vector<EmbeddedSample>& train, const std::vector<EmbeddedSample>& eval,
                    const ClassEncodingSet& initial, const CesConfig& config) {
    config.validate();
    if (initial.family() != EncodingFamily::dense) throw std::invalid_argument("CES starts from a dense encoding");
    if (train.empty()) throw std::invalid_argument("CES needs training data");
    const bool has_oos = std::any_of(eval.begin(), eval.end(), [](const auto& s) { return s.is_oos(); });
    const bool has_is = std::any_of(eval.begin(), eval.end(), [](const auto& s) { return !s.is_oos(); });
    if (!has_oos || !has_is) throw std::invalid_argument("CES evaluation set needs IS and OOS samples");

    NetworkConfig net = config.network;
    net.input_dim = train.front().embedding.size();
    net.output_dim = initial.dim();
    net.loss = LossKind::mse;
    net.seed = derive_seed(config.seed, 0);

    CesTrace trace;
    ClassEncodingSet encoding = initial;
    std::optional<Trainer> trainer;
    const std::size_t epochs = config.effective_inner_epochs();

    for (std::size_t it = 1; it <= config.iterations; ++it) {
        try {
            if (config.restart_weights || !trainer) {
                NetworkConfig iter_net = net;
                iter_net.seed = derive_seed(config.seed, it);
                trainer.emplace(init_parameters(iter_net), iter_net, encoding);
            } else {
                trainer->set_targets(encoding);
            }
            for (std::size_t e = 0; e < epochs; ++e) trainer->run_epoch(train);
        } catch (const DivergenceError& err) {
            trace.aborted = "iteration " + std::to_string(it) + ": " + err.what();
            break;
        }
        const LikelihoodModel model = trainer->model();

        ClassEncodingSet next = repulsion_update(encoding, config.lambda, derive_seed(config.seed, 1000000 + it));
        if (config.attraction_enabled)
            next = attraction_update(next, class_projection_means(model, train, encoding), config.lambda);
        encoding = std::move(next);

        const auto scored = score_samples(model, eval, DecisionRule::dense, &encoding);
        EvaluationReport rep = compute_eer(scored, ThresholdSemantics::distance_ceiling);
        CesRecord rec;
        rec.iteration = it;
        rec.far = config.fixed_theta ? rates_at(scored, *config.fixed_theta, ThresholdSemantics::distance_ceiling).far
                                     : rep.far_at_theta;
        rec.iser = rep.iser;
        rec.eer = rep.eer;
        rec.encoding_hash = encoding_hash(encoding);
        trace.records.push_back(rec);

        if (!trace.best_far.encoding || rec.far < trace.best_far.value) trace.best_far = {rec.far, it, encoding};
        if (!trace.best_iser.encoding || rec.iser < trace.best_iser.value) trace.best_iser = {rec.iser, it, encoding};
    }
    return trace;
}

std::string trace_csv(const CesTrace& trace) {
    std::string out = "iteration,far,iser\n";
    for (const auto& r : trace.records)
        out += std::to_string(r.iteration) + "," + format_double(r.far) + "," + format_double(r.iser) + "\n";
    return out;
}

void write_trace(const CesTrace& trace, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "trace.csv");
        if (!out) throw FormatError("cannot write " + (dir / "trace.csv").string());
        out << trace_csv(trace);
    }
    if (trace.best_far.encoding)
        save_encoding_set(*trace.best_far.encoding,
                          dir / ("best_far_iter" + std::to_string(trace.best_far.iteration) + ".enc"));
    if (trace.best_iser.encoding)
        save_encoding_set(*trace.best_iser.encoding,
                          dir / ("best_iser_iter" + std::to_string(trace.best_iser.iteration) + ".enc"));
}

}  // namespace oosenc
