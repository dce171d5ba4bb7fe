#include "oosenc/metrics.hpp"

#include "oosenc/common.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <cstdlib>
#include <stdexcept>

namespace oosenc {

double far(const std::vector<ClassDecision>& decisions, const std::vector<TruthLabel>& truths) {
    if (decisions.size() != truths.size()) throw std::invalid_argument("decision/truth length mismatch");
    std::size_t oos = 0, accepted = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (truths[i] != kOosLabel) continue;
        ++oos;
        if (decisions[i].is_in_scope()) ++accepted;
    }
    if (oos == 0) throw std::invalid_argument("FAR needs at least one OOS sample");
    return static_cast<double>(accepted) / static_cast<double>(oos);
}

double frr(const std::vector<ClassDecision>& decisions, const std::vector<TruthLabel>& truths) {
    if (decisions.size() != truths.size()) throw std::invalid_argument("decision/truth length mismatch");
    std::size_t is = 0, rejected = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (truths[i] == kOosLabel) continue;
        ++is;
        if (decisions[i].is_oos()) ++rejected;
    }
    if (is == 0) throw std::invalid_argument("FRR needs at least one in-scope sample");
    return static_cast<double>(rejected) / static_cast<double>(is);
}

double iser(const std::vector<std::size_t>& predicted, const std::vector<TruthLabel>& truths) {
    if (predicted.size() != truths.size()) throw std::invalid_argument("prediction/truth length mismatch");
    std::size_t is = 0, wrong = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (truths[i] == kOosLabel) continue;
        ++is;
        if (predicted[i] != truths[i]) ++wrong;
    }
    if (is == 0) throw std::invalid_argument("ISER needs at least one in-scope sample");
    return static_cast<double>(wrong) / static_cast<double>(is);
}

namespace {

// Native value compared against theta: the score itself for score_floor,
// the distance (= -score) for distance_ceiling.
double native_value(double score, ThresholdSemantics s) {
    return s == ThresholdSemantics::score_floor ? score : -score;
}

struct Counts {
    std::size_t oos_accepted;
    std::size_t is_rejected;
};

// `oos` and `is` are sorted ascending native values.
Counts counts_at(const std::vector<double>& oos, const std::vector<double>& is, double theta,
                 ThresholdSemantics s) {
    if (s == ThresholdSemantics::score_floor) {
        // accept v > theta
        const auto oos_acc = oos.end() - std::upper_bound(oos.begin(), oos.end(), theta);
        const auto is_rej = std::upper_bound(is.begin(), is.end(), theta) - is.begin();
        return {static_cast<std::size_t>(oos_acc), static_cast<std::size_t>(is_rej)};
    }
    // accept v <= theta
    const auto oos_acc = std::upper_bound(oos.begin(), oos.end(), theta) - oos.begin();
    const auto is_rej = is.end() - std::upper_bound(is.begin(), is.end(), theta);
    return {static_cast<std::size_t>(oos_acc), static_cast<std::size_t>(is_rej)};
}

void split_values(const std::vector<ScoredSample>& scored, ThresholdSemantics s, std::vector<double>& oos,
                  std::vector<double>& is) {
    for (const auto& x : scored) (x.is_oos ? oos : is).push_back(native_value(x.score, s));
    std::sort(oos.begin(), oos.end());
    std::sort(is.begin(), is.end());
}

}  // namespace

EvaluationReport compute_eer(const std::vector<ScoredSample>& scored, ThresholdSemantics semantics) {
    std::vector<double> oos, is;
    split_values(scored, semantics, oos, is);
    if (oos.empty()) throw std::invalid_argument("EER needs at least one OOS sample");
    if (is.empty()) throw std::invalid_argument("EER needs at least one in-scope sample");

    std::vector<double> thetas;
    thetas.reserve(oos.size() + is.size() + 2);
    thetas.insert(thetas.end(), oos.begin(), oos.end());
    thetas.insert(thetas.end(), is.begin(), is.end());
    std::sort(thetas.begin(), thetas.end());
    thetas.erase(std::unique(thetas.begin(), thetas.end()), thetas.end());
    thetas.insert(thetas.begin(), thetas.front() - 1.0);
    thetas.push_back(thetas.back() + 1.0);

    const auto n_oos = static_cast<std::int64_t>(oos.size());
    const auto n_is = static_cast<std::int64_t>(is.size());
    EvaluationReport rep;
    rep.semantics = semantics;
    rep.curve.reserve(thetas.size());
    std::int64_t best_gap = -1;
    Counts best{0, 0};
    for (double theta : thetas) {
        const Counts c = counts_at(oos, is, theta, semantics);
        rep.curve.push_back({theta, static_cast<double>(c.oos_accepted) / static_cast<double>(n_oos),
                             static_cast<double>(c.is_rejected) / static_cast<double>(n_is)});
        // |a/nO - b/nI| compared exactly as |a*nI - b*nO|.
        const std::int64_t gap = std::llabs(static_cast<std::int64_t>(c.oos_accepted) * n_is -
                                            static_cast<std::int64_t>(c.is_rejected) * n_oos);
        if (best_gap < 0 || gap < best_gap) {
            best_gap = gap;
            best = c;
            rep.theta_star = theta;
        }
    }
    rep.far_at_theta = static_cast<double>(best.oos_accepted) / static_cast<double>(n_oos);
    rep.frr_at_theta = static_cast<double>(best.is_rejected) / static_cast<double>(n_is);
    rep.eer = (rep.far_at_theta + rep.frr_at_theta) / 2.0;

    std::vector<std::size_t> pred;
    std::vector<TruthLabel> truth;
    for (const auto& x : scored) {
        if (x.is_oos) continue;
        pred.push_back(x.predicted_class);
        truth.push_back(x.true_class);
    }
    rep.iser = iser(pred, truth);
    return rep;
}

CurvePoint rates_at(const std::vector<ScoredSample>& scored, double theta, ThresholdSemantics semantics) {
    std::vector<double> oos, is;
    split_values(scored, semantics, oos, is);
    if (oos.empty() || is.empty()) throw std::invalid_argument("rates need both IS and OOS samples");
    const Counts c = counts_at(oos, is, theta, semantics);
    return {theta, static_cast<double>(c.oos_accepted) / static_cast<double>(oos.size()),
            static_cast<double>(c.is_rejected) / static_cast<double>(is.size())};
}

std::string to_string(DecisionRule rule) {
    switch (rule) {
        case DecisionRule::softmax: return "softmax";
        case DecisionRule::max: return "max";
        case DecisionRule::one_hot_distance: return "one_hot_distance";
        case DecisionRule::dense: return "dense";
    }
    return "?";
}

ThresholdSemantics semantics_of(DecisionRule rule) {
    return (rule == DecisionRule::softmax || rule == DecisionRule::max) ? ThresholdSemantics::score_floor
                                                                        : ThresholdSemantics::distance_ceiling;
}

std::vector<ScoredSample> score_samples(const LikelihoodModel& model, const std::vector<EmbeddedSample>& samples,
                                        DecisionRule rule, const ClassEncodingSet* encoding) {
    if (rule == DecisionRule::dense && encoding == nullptr)
        throw std::invalid_argument("dense rule needs an encoding set");
    std::vector<Vector> inputs;
    inputs.reserve(samples.size());
    for (const auto& s : samples) inputs.push_back(s.embedding);
    const std::vector<LikelihoodVector> zs = predict_batch(model, inputs);

    const std::size_t p = model.output_dim();
    std::optional<ClassEncodingSet> one_hot;
    if (rule == DecisionRule::one_hot_distance) one_hot = one_hot_encoding_set(p);
    const ClassEncodingSet* enc = rule == DecisionRule::dense ? encoding : (one_hot ? &*one_hot : nullptr);
    if (enc && enc->dim() != p) throw std::invalid_argument("encoding dimension differs from model output");

    std::vector<ScoredSample> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ScoredSample s;
        s.is_oos = samples[i].is_oos();
        s.true_class = samples[i].label;
        const auto z = zs[i].values();
        if (rule == DecisionRule::softmax) {
            const Vector sm = softmax(z);
            s.predicted_class = argmax(sm);
            s.score = sm[s.predicted_class];
        } else if (rule == DecisionRule::max) {
            s.predicted_class = argmax(z);
            s.score = z[s.predicted_class];
        } else {
            const NearestClass n = nearest_class(z, *enc);
            s.predicted_class = n.index;
            s.score = -n.distance;
        }
        out.push_back(s);
    }
    return out;
}

double iser(const LikelihoodModel& model, DecisionRule rule, const ClassEncodingSet* encoding,
            const std::vector<EmbeddedSample>& in_scope_samples) {
    if (in_scope_samples.empty()) throw std::invalid_argument("ISER needs at least one in-scope sample");
    for (const auto& s : in_scope_samples)
        if (s.is_oos()) throw std::invalid_argument("ISER input must contain in-scope samples only");
    const auto scored = score_samples(model, in_scope_samples, rule, encoding);
    std::vector<std::size_t> pred;
    std::vector<TruthLabel> truth;
    for (const auto& s : scored) {
        pred.push_back(s.predicted_class);
        truth.push_back(s.true_class);
    }
    return iser(pred, truth);
}

EvaluationReport evaluate(const LikelihoodModel& model, const std::vector<EmbeddedSample>& samples,
                          DecisionRule rule, const ClassEncodingSet* encoding) {
    return compute_eer(score_samples(model, samples, rule, encoding), semantics_of(rule));
}

std::string curve_csv(const EvaluationReport& report) {
    std::string out = "theta,far,frr\n";
    for (const auto& pt : report.curve)
        out += format_double(pt.theta) + "," + format_double(pt.far) + "," + format_double(pt.frr) + "\n";
    return out;
}

}  // namespace oosenc
