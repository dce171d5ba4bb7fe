#include "oosenc/encodings.hpp"

#include "oosenc/common.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace oosenc {

LikelihoodVector::LikelihoodVector(Vector values) : values_(std::move(values)) {
    if (values_.empty()) throw std::invalid_argument("likelihood vector must be non-empty");
    for (double& v : values_) {
        if (std::isnan(v)) throw std::invalid_argument("likelihood vector contains NaN");
        v = std::clamp(v, -1.0, 1.0);
    }
}

ClassEncodingSet::ClassEncodingSet(std::vector<Vector> vectors, EncodingFamily family,
                                   std::vector<std::string> class_names)
    : vectors_(std::move(vectors)), family_(family), names_(std::move(class_names)) {
    if (vectors_.size() < 2) throw std::invalid_argument("encoding set needs at least 2 classes");
    const std::size_t p = vectors_.front().size();
    if (p == 0) throw std::invalid_argument("encoding dimension must be >= 1");
    for (const auto& v : vectors_) {
        if (v.size() != p) throw std::invalid_argument("encoding vectors have unequal dimension");
        for (double x : v) {
            if (!(x >= -1.0 && x <= 1.0)) throw std::invalid_argument("encoding component outside [-1,1]");
        }
    }
    if (family_ == EncodingFamily::one_hot) {
        if (p != vectors_.size()) throw std::invalid_argument("one-hot encoding requires p == c");
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < p; ++j)
                if (vectors_[i][j] != (i == j ? 1.0 : 0.0))
                    throw std::invalid_argument("one-hot vector " + std::to_string(i) + " is not h_i");
    }
    if (names_.empty()) {
        for (std::size_t i = 0; i < vectors_.size(); ++i) names_.push_back("class_" + std::to_string(i));
    } else if (names_.size() != vectors_.size()) {
        throw std::invalid_argument("class_names size differs from vector count");
    }
}

std::string to_string(const ClassDecision& d) {
    return d.is_oos() ? std::string("o") : "w" + std::to_string(d.index() + 1);
}

Vector softmax(std::span<const double> z) {
    if (z.empty()) throw std::invalid_argument("softmax of empty vector");
    const double m = *std::max_element(z.begin(), z.end());
    Vector out(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - m);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("distance between vectors of unequal dimension");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

namespace {

void check_classes(const LikelihoodVector& z, std::size_t num_classes) {
    if (z.size() != num_classes)
        throw std::invalid_argument("likelihood dimension " + std::to_string(z.size()) +
                                    " does not match class count " + std::to_string(num_classes));
    if (num_classes < 2) throw std::invalid_argument("need at least 2 classes");
}

void check_semantics(ThresholdPolicy policy, ThresholdSemantics expected) {
    if (policy.semantics != expected) throw std::invalid_argument("threshold semantics do not match rule");
}

ClassDecision score_floor_decision(std::span<const double> scores, double theta) {
    const std::size_t best = argmax(scores);
    if (theta == 0.0 || scores[best] > theta) return ClassDecision::in_scope(best);
    return ClassDecision::out_of_scope();
}

}  // namespace

ClassDecision classify_max(const LikelihoodVector& z, ThresholdPolicy policy, std::size_t num_classes) {
    check_classes(z, num_classes);
    check_semantics(policy, ThresholdSemantics::score_floor);
    return score_floor_decision(z.values(), policy.theta);
}

ClassDecision classify_softmax(const LikelihoodVector& z, ThresholdPolicy policy, std::size_t num_classes) {
    check_classes(z, num_classes);
    check_semantics(policy, ThresholdSemantics::score_floor);
    const Vector s = softmax(z.values());
    return score_floor_decision(s, policy.theta);
}

ClassDecision classify_one_hot_distance(const LikelihoodVector& z, ThresholdPolicy policy,
                                        std::size_t num_classes) {
    check_classes(z, num_classes);
    check_semantics(policy, ThresholdSemantics::distance_ceiling);
    // Same arithmetic as classify_dense so the two rules agree bit-for-bit.
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    Vector h(z.size(), 0.0);
    for (std::size_t i = 0; i < num_classes; ++i) {
        h[i] = 1.0;
        const double d = euclidean_distance(z.values(), h);
        h[i] = 0.0;
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    if (best_d <= policy.theta) return ClassDecision::in_scope(best);
    return ClassDecision::out_of_scope();
}

NearestClass nearest_class(std::span<const double> z, const ClassEncodingSet& enc) {
    if (z.size() != enc.dim())
        throw std::invalid_argument("likelihood dimension " + std::to_string(z.size()) +
                                    " does not match encoding dimension " + std::to_string(enc.dim()));
    NearestClass best{0, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < enc.num_classes(); ++i) {
        const double d = euclidean_distance(z, enc[i]);
        if (d < best.distance) best = {i, d};
    }
    return best;
}

ClassDecision classify_dense(const LikelihoodVector& z, const ClassEncodingSet& enc, ThresholdPolicy policy) {
    check_semantics(policy, ThresholdSemantics::distance_ceiling);
    const NearestClass n = nearest_class(z.values(), enc);
    if (n.distance <= policy.theta) return ClassDecision::in_scope(n.index);
    return ClassDecision::out_of_scope();
}

ClassDecision classify_max(const LikelihoodVector& z, ThresholdPolicy policy) {
    return classify_max(z, policy, z.size());
}
ClassDecision classify_softmax(const LikelihoodVector& z, ThresholdPolicy policy) {
    return classify_softmax(z, policy, z.size());
}
ClassDecision classify_one_hot_distance(const LikelihoodVector& z, ThresholdPolicy policy) {
    return classify_one_hot_distance(z, policy, z.size());
}

ClassEncodingSet one_hot_encoding_set(std::size_t num_classes) {
    if (num_classes < 2) throw std::invalid_argument("one-hot encoding needs c >= 2");
    std::vector<Vector> v(num_classes, Vector(num_classes, 0.0));
    for (std::size_t i = 0; i < num_classes; ++i) v[i][i] = 1.0;
    return ClassEncodingSet(std::move(v), EncodingFamily::one_hot);
}

ClassEncodingSet random_encoding_set(std::size_t num_classes, std::size_t dim, std::uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("random encoding needs c >= 2");
    if (dim < 1) throw std::invalid_argument("random encoding needs N >= 1");
    Rng rng(seed);
    std::vector<Vector> v(num_classes, Vector(dim));
    for (auto& row : v)
        for (double& x : row) x = rng.uniform(-1.0, 1.0);
    return ClassEncodingSet(std::move(v), EncodingFamily::dense);
}

std::string serialize_encoding_set(const ClassEncodingSet& enc) {
    std::string out = std::to_string(enc.num_classes()) + " " + std::to_string(enc.dim()) + "\n";
    for (const auto& row : enc.vectors()) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out += ' ';
            out += format_double(row[j]);
        }
        out += '\n';
    }
    return out;
}

ClassEncodingSet parse_encoding_set(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        rows.push_back(line);
    }
    if (rows.empty()) throw FormatError("encoding file: missing 'c p' header");
    std::istringstream hdr(rows.front());
    long long c = 0, p = 0;
    std::string extra;
    if (!(hdr >> c >> p) || (hdr >> extra)) throw FormatError("encoding file: header must be two integers 'c p'");
    if (c < 2 || p < 1) throw FormatError("encoding file: need c >= 2 and p >= 1");
    if (rows.size() - 1 != static_cast<std::size_t>(c))
        throw FormatError("encoding file: expected " + std::to_string(c) + " rows, found " +
                          std::to_string(rows.size() - 1));
    std::vector<Vector> vectors;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        std::istringstream ls(rows[r]);
        Vector v;
        std::string tok;
        while (ls >> tok) {
            double x = 0.0;
            try {
                std::size_t used = 0;
                x = std::stod(tok, &used);
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw FormatError("encoding file: bad number '" + tok + "' on row " + std::to_string(r));
            }
            v.push_back(x);
        }
        if (v.size() != static_cast<std::size_t>(p))
            throw FormatError("encoding file: row " + std::to_string(r) + " has " + std::to_string(v.size()) +
                              " values, expected " + std::to_string(p));
        for (double x : v)
            if (!(x >= -1.0 && x <= 1.0))
                throw FormatError("encoding file: component outside [-1,1] on row " + std::to_string(r));
        vectors.push_back(std::move(v));
    }
    return ClassEncodingSet(std::move(vectors), EncodingFamily::dense);
}

ClassEncodingSet load_encoding_set(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open encoding file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_encoding_set(ss.str());
}

void save_encoding_set(const ClassEncodingSet& enc, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write encoding file " + path.string());
    out << serialize_encoding_set(enc);
}

std::uint64_t encoding_hash(const ClassEncodingSet& enc) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : serialize_encoding_set(enc)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace oosenc
