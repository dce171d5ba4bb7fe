#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace oosenc {

using Vector = std::vector<double>;

// Model output z in [-1,1]^p for one input. Components are clamped on
// construction so every decision function sees a point of the cube.
class LikelihoodVector {
public:
    LikelihoodVector() = default;
    explicit LikelihoodVector(Vector values);

    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const { return values_; }

    bool operator==(const LikelihoodVector&) const = default;

private:
    Vector values_;
};

enum class EncodingFamily { one_hot, dense };

// c class vectors r_1..r_c of common dimension p.
class ClassEncodingSet {
public:
    // Validates the invariants; throws std::invalid_argument on violation.
    ClassEncodingSet(std::vector<Vector> vectors, EncodingFamily family,
                     std::vector<std::string> class_names = {});

    std::size_t num_classes() const { return vectors_.size(); }
    std::size_t dim() const { return vectors_.front().size(); }
    EncodingFamily family() const { return family_; }
    const std::vector<Vector>& vectors() const { return vectors_; }
    const Vector& operator[](std::size_t i) const { return vectors_[i]; }
    const std::vector<std::string>& class_names() const { return names_; }

    bool operator==(const ClassEncodingSet&) const = default;

private:
    std::vector<Vector> vectors_;
    EncodingFamily family_;
    std::vector<std::string> names_;
};

// Either an in-scope class index (0-based) or out-of-scope.
class ClassDecision {
public:
    static ClassDecision in_scope(std::size_t index) { return ClassDecision(index); }
    static ClassDecision out_of_scope() { return ClassDecision(); }

    bool is_oos() const { return index_ == kOos; }
    bool is_in_scope() const { return !is_oos(); }
    // Precondition: is_in_scope().
    std::size_t index() const { return index_; }

    bool operator==(const ClassDecision&) const = default;

private:
    static constexpr std::size_t kOos = static_cast<std::size_t>(-1);
    ClassDecision() = default;
    explicit ClassDecision(std::size_t i) : index_(i) {}
    std::size_t index_ = kOos;
};

std::string to_string(const ClassDecision& d);

enum class ThresholdSemantics {
    score_floor,       // accept when score > theta; theta == 0 disables OOS
    distance_ceiling,  // accept when distance <= theta
};

struct ThresholdPolicy {
    double theta = 0.0;
    ThresholdSemantics semantics = ThresholdSemantics::score_floor;

    static ThresholdPolicy floor(double theta) { return {theta, ThresholdSemantics::score_floor}; }
    static ThresholdPolicy ceiling(double theta) { return {theta, ThresholdSemantics::distance_ceiling}; }
};

Vector softmax(std::span<const double> z);

double euclidean_distance(std::span<const double> a, std::span<const double> b);

// Index of the maximum; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

// Decision functions. The class count is z.size() for the one-hot rules;
// mismatches against `num_classes` throw std::invalid_argument.
ClassDecision classify_max(const LikelihoodVector& z, ThresholdPolicy policy, std::size_t num_classes);
ClassDecision classify_softmax(const LikelihoodVector& z, ThresholdPolicy policy, std::size_t num_classes);
ClassDecision classify_one_hot_distance(const LikelihoodVector& z, ThresholdPolicy policy,
                                        std::size_t num_classes);
ClassDecision classify_dense(const LikelihoodVector& z, const ClassEncodingSet& enc, ThresholdPolicy policy);

// Convenience overloads that take the class count from z.
ClassDecision classify_max(const LikelihoodVector& z, ThresholdPolicy policy);
ClassDecision classify_softmax(const LikelihoodVector& z, ThresholdPolicy policy);
ClassDecision classify_one_hot_distance(const LikelihoodVector& z, ThresholdPolicy policy);

// Nearest class vector and its distance, without thresholding.
struct NearestClass {
    std::size_t index;
    double distance;
};
NearestClass nearest_class(std::span<const double> z, const ClassEncodingSet& enc);

ClassEncodingSet one_hot_encoding_set(std::size_t num_classes);
ClassEncodingSet random_encoding_set(std::size_t num_classes, std::size_t dim, std::uint64_t seed);

ClassEncodingSet load_encoding_set(const std::filesystem::path& path);
void save_encoding_set(const ClassEncodingSet& enc, const std::filesystem::path& path);

// Text form of the encoding file format: "c p" header then c rows.
std::string serialize_encoding_set(const ClassEncodingSet& enc);
ClassEncodingSet parse_encoding_set(const std::string& text);

// FNV-1a over the serialized vectors; used to tag encoding snapshots.
std::uint64_t encoding_hash(const ClassEncodingSet& enc);

}  // namespace oosenc
