#pragma once

#include "oosenc/encodings.hpp"
#include "oosenc/model.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace oosenc {

// Ground truth for one evaluation sample: a class index or kOosLabel.
using TruthLabel = std::size_t;

// Fraction of OOS samples decided in-scope. Throws std::invalid_argument
// when no OOS truth is present.
double far(const std::vector<ClassDecision>& decisions, const std::vector<TruthLabel>& truths);

// Fraction of IS samples decided out-of-scope.
double frr(const std::vector<ClassDecision>& decisions, const std::vector<TruthLabel>& truths);

// Misclassification rate of in-scope samples with rejection disabled.
// `predicted` holds the theta = 0 class decisions.
double iser(const std::vector<std::size_t>& predicted, const std::vector<TruthLabel>& truths);

// One sample prepared for threshold sweeping. `score` is oriented so that
// larger means more in-scope (max softmax probability, or the negated
// minimum distance).
struct ScoredSample {
    double score = 0.0;
    bool is_oos = false;
    std::size_t predicted_class = 0;
    TruthLabel true_class = kOosLabel;
};

struct CurvePoint {
    double theta;
    double far;
    double frr;
};

struct EvaluationReport {
    double eer = 0.0;
    double theta_star = 0.0;  // in the native units of `semantics`
    double far_at_theta = 0.0;
    double frr_at_theta = 0.0;
    double iser = 0.0;
    ThresholdSemantics semantics = ThresholdSemantics::score_floor;
    std::vector<CurvePoint> curve;  // sorted by native theta, ascending
    std::string split = "test";
};

// Sweeps theta over every observed score plus sentinels beyond both ends and
// picks the threshold minimising |FAR - FRR| (ties go to the smaller native
// theta). `semantics` fixes how a native theta compares with the scores:
// score_floor accepts score > theta, distance_ceiling accepts distance <= theta
// where distance = -score.
EvaluationReport compute_eer(const std::vector<ScoredSample>& scored,
                             ThresholdSemantics semantics = ThresholdSemantics::distance_ceiling);

// Evaluation of a trained model under one decision rule.
enum class DecisionRule { softmax, max, one_hot_distance, dense };

std::string to_string(DecisionRule rule);

ThresholdSemantics semantics_of(DecisionRule rule);

// Scores each sample and records the theta = 0 decision. `encoding` is only
// read by the dense rule.
std::vector<ScoredSample> score_samples(const LikelihoodModel& model, const std::vector<EmbeddedSample>& samples,
                                        DecisionRule rule, const ClassEncodingSet* encoding = nullptr);

// ISER of a model over in-scope samples only.
double iser(const LikelihoodModel& model, DecisionRule rule, const ClassEncodingSet* encoding,
            const std::vector<EmbeddedSample>& in_scope_samples);

// compute_eer plus ISER over the in-scope part of `samples`.
EvaluationReport evaluate(const LikelihoodModel& model, const std::vector<EmbeddedSample>& samples,
                          DecisionRule rule, const ClassEncodingSet* encoding = nullptr);

// FAR/FRR at a fixed native threshold.
CurvePoint rates_at(const std::vector<ScoredSample>& scored, double theta, ThresholdSemantics semantics);

// "theta,far,frr" header plus one row per sweep point.
std::string curve_csv(const EvaluationReport& report);

}  // namespace oosenc
