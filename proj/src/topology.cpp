#include "oosenc/topology.hpp"

#include "oosenc/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace oosenc {

GridSpec GridSpec::defaults(std::size_t dim) {
    if (dim == 2) return {2, 256};
    if (dim == 3) return {3, 64};
    throw std::invalid_argument("grid dimension must be 2 or 3");
}

void GridSpec::validate() const {
    if (dim != 2 && dim != 3) throw std::invalid_argument("grid dimension must be 2 or 3");
    if (resolution < 16) throw std::invalid_argument("grid resolution must be >= 16");
}

std::size_t GridSpec::cell_count() const { return dim == 2 ? resolution * resolution : resolution * resolution * resolution; }

LabeledGrid label_grid(const DecideFn& decide, GridSpec grid, std::size_t num_classes) {
    grid.validate();
    LabeledGrid out;
    out.spec = grid;
    out.num_classes = num_classes;
    out.labels.resize(grid.cell_count());
    const std::size_t r = grid.resolution;
    Vector point(grid.dim);
    std::size_t idx = 0;
    auto emit = [&](const ClassDecision& d) {
        if (d.is_in_scope() && d.index() >= num_classes) throw std::invalid_argument("decision index out of range");
        out.labels[idx++] = d.is_oos() ? kOosCode : static_cast<int>(d.index());
    };
    if (grid.dim == 2) {
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j) {
                point[0] = grid.center(i);
                point[1] = grid.center(j);
                emit(decide(LikelihoodVector(point)));
            }
    } else {
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j)
                for (std::size_t k = 0; k < r; ++k) {
                    point[0] = grid.center(i);
                    point[1] = grid.center(j);
                    point[2] = grid.center(k);
                    emit(decide(LikelihoodVector(point)));
                }
    }
    return out;
}

std::string label_name(int code) { return code == kOosCode ? std::string("o") : "w" + std::to_string(code + 1); }

bool TopologySignature::labels_adjacent(int a, int b) const {
    for (const auto& [x, y] : adjacency)
        if ((x.label == a && y.label == b) || (x.label == b && y.label == a)) return true;
    return false;
}

std::set<int> TopologySignature::oos_neighbours(std::size_t ordinal) const {
    std::set<int> out;
    const ComponentRef self{kOosCode, ordinal};
    for (const auto& [x, y] : adjacency) {
        if (x == self) out.insert(y.label);
        if (y == self) out.insert(x.label);
    }
    out.erase(kOosCode);
    return out;
}

bool TopologySignature::all_classes_present() const {
    return std::all_of(class_counts.begin(), class_counts.end(), [](std::size_t n) { return n > 0; });
}

namespace {

std::string ref_name(const ComponentRef& r) { return label_name(r.label) + "#" + std::to_string(r.ordinal); }

// Sort rank: classes in index order, OOS last.
int label_rank(int label) { return label == kOosCode ? 1 << 30 : label; }

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

struct Component {
    int label;
    std::vector<int> neighbour_labels;  // sorted, with multiplicity; refinement key
};

using Edge = std::pair<ComponentRef, ComponentRef>;

std::vector<Edge> edges_under(const std::vector<Component>& comps, const std::vector<std::size_t>& ordinal,
                              const std::set<std::pair<std::size_t, std::size_t>>& links) {
    std::vector<Edge> out;
    out.reserve(links.size());
    for (const auto& [a, b] : links) {
        ComponentRef x{comps[a].label, ordinal[a]};
        ComponentRef y{comps[b].label, ordinal[b]};
        if (std::make_pair(label_rank(y.label), y.ordinal) < std::make_pair(label_rank(x.label), x.ordinal))
            std::swap(x, y);
        out.emplace_back(x, y);
    }
    std::sort(out.begin(), out.end(), [](const Edge& e1, const Edge& e2) {
        auto key = [](const Edge& e) {
            return std::make_tuple(label_rank(e.first.label), e.first.ordinal, label_rank(e.second.label),
                                   e.second.ordinal);
        };
        return key(e1) < key(e2);
    });
    return out;
}

constexpr std::size_t kMaxCanonicalPermutations = 40320;

}  // namespace

TopologySignature signature_from_grid(const LabeledGrid& grid, std::size_t min_contacts) {
    const GridSpec& g = grid.spec;
    g.validate();
    if (min_contacts == 0) min_contacts = g.min_contacts();
    const std::size_t r = g.resolution;
    const std::size_t n = grid.labels.size();

    UnionFind uf(n);
    const std::vector<std::size_t> strides =
        g.dim == 2 ? std::vector<std::size_t>{r, 1} : std::vector<std::size_t>{r * r, r, 1};
    // Neighbour along axis a exists when the coordinate on that axis is < r-1.
    auto coord = [&](std::size_t cell, std::size_t axis) { return (cell / strides[axis]) % r; };
    for (std::size_t c = 0; c < n; ++c)
        for (std::size_t a = 0; a < g.dim; ++a)
            if (coord(c, a) + 1 < r && grid.labels[c] == grid.labels[c + strides[a]]) uf.unite(c, c + strides[a]);

    std::vector<std::size_t> root_size(n, 0);
    for (std::size_t c = 0; c < n; ++c) ++root_size[uf.find(c)];

    // Regions smaller than the contact threshold are slivers left where a
    // boundary pinches to a point; they are dropped like point contacts.
    constexpr std::size_t kDropped = SIZE_MAX;
    std::vector<std::size_t> comp_of(n, kDropped);
    std::vector<std::size_t> root_to_comp(n, kDropped);
    std::vector<Component> comps;
    for (std::size_t c = 0; c < n; ++c) {
        const std::size_t root = uf.find(c);
        if (root_size[root] < min_contacts) continue;
        if (root_to_comp[root] == kDropped) {
            root_to_comp[root] = comps.size();
            comps.push_back({grid.labels[c], {}});
        }
        comp_of[c] = root_to_comp[root];
    }

    std::map<std::pair<std::size_t, std::size_t>, std::size_t> contacts;
    for (std::size_t c = 0; c < n; ++c)
        for (std::size_t a = 0; a < g.dim; ++a) {
            if (coord(c, a) + 1 >= r) continue;
            const std::size_t x = comp_of[c], y = comp_of[c + strides[a]];
            if (x != y && x != kDropped && y != kDropped) ++contacts[{std::min(x, y), std::max(x, y)}];
        }
    std::set<std::pair<std::size_t, std::size_t>> links;
    for (const auto& [pair, count] : contacts)
        if (count >= min_contacts) links.insert(pair);
    for (const auto& [a, b] : links) {
        comps[a].neighbour_labels.push_back(comps[b].label);
        comps[b].neighbour_labels.push_back(comps[a].label);
    }
    for (auto& comp : comps)
        std::sort(comp.neighbour_labels.begin(), comp.neighbour_labels.end(),
                  [](int x, int y) { return label_rank(x) < label_rank(y); });

    TopologySignature sig;
    sig.num_classes = grid.num_classes;
    sig.class_counts.assign(grid.num_classes, 0);
    for (const auto& comp : comps) {
        if (comp.label == kOosCode)
            ++sig.oos_count;
        else
            ++sig.class_counts.at(static_cast<std::size_t>(comp.label));
    }

    // Order components by (label, neighbour profile); components that tie on
    // both are interchangeable up to the edge structure, so every ordering of
    // each tie group is tried and the smallest edge list wins.
    std::vector<std::size_t> order(comps.size());
    std::iota(order.begin(), order.end(), 0);
    auto profile_key = [&](std::size_t i) {
        std::vector<int> ranks;
        for (int l : comps[i].neighbour_labels) ranks.push_back(label_rank(l));
        return std::make_pair(label_rank(comps[i].label), ranks);
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return profile_key(a) < profile_key(b); });

    std::vector<std::pair<std::size_t, std::size_t>> groups;  // [begin, end) in `order`
    std::size_t permutations = 1;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i + 1;
        while (j < order.size() && profile_key(order[j]) == profile_key(order[i])) ++j;
        groups.emplace_back(i, j);
        for (std::size_t k = 2; k <= j - i && permutations <= kMaxCanonicalPermutations; ++k) permutations *= k;
        i = j;
    }

    auto ordinals_for = [&](const std::vector<std::size_t>& ord) {
        std::vector<std::size_t> ordinal(comps.size());
        std::map<int, std::size_t> next;
        for (std::size_t idx : ord) ordinal[idx] = next[comps[idx].label]++;
        return ordinal;
    };

    std::vector<Edge> best = edges_under(comps, ordinals_for(order), links);
    if (permutations > 1 && permutations <= kMaxCanonicalPermutations) {
        std::vector<std::size_t> work = order;
        for (auto& [b, e] : groups) std::sort(work.begin() + b, work.begin() + e);
        auto edge_less = [](const std::vector<Edge>& x, const std::vector<Edge>& y) {
            auto key = [](const Edge& e) {
                return std::make_tuple(label_rank(e.first.label), e.first.ordinal, label_rank(e.second.label),
                                       e.second.ordinal);
            };
            return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end(),
                                                [&](const Edge& a, const Edge& b) { return key(a) < key(b); });
        };
        // Odometer over the permutations of each group.
        while (true) {
            auto candidate = edges_under(comps, ordinals_for(work), links);
            if (edge_less(candidate, best)) best = std::move(candidate);
            std::size_t gi = 0;
            for (; gi < groups.size(); ++gi) {
                auto [b, e] = groups[gi];
                if (std::next_permutation(work.begin() + b, work.begin() + e)) break;
            }
            if (gi == groups.size()) break;
        }
    }
    sig.adjacency = std::move(best);
    return sig;
}

std::string TopologySignature::to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < class_counts.size(); ++i) counts[label_name(static_cast<int>(i))] = class_counts[i];
    counts["o"] = oos_count;
    j["counts"] = counts;
    nlohmann::ordered_json adj = nlohmann::ordered_json::array();
    for (const auto& [a, b] : adjacency) adj.push_back({ref_name(a), ref_name(b)});
    j["adjacency"] = adj;
    return j.dump();
}

std::string TopologySignature::describe() const {
    std::string out = "{";
    for (std::size_t i = 0; i < class_counts.size(); ++i)
        out += label_name(static_cast<int>(i)) + ":" + std::to_string(class_counts[i]) + " ";
    out += "o:" + std::to_string(oos_count) + " |";
    for (const auto& [a, b] : adjacency) out += " " + ref_name(a) + "-" + ref_name(b);
    return out + "}";
}

std::string to_string(DecisionFamily f) {
    switch (f) {
        case DecisionFamily::max: return "max";
        case DecisionFamily::softmax: return "softmax";
        case DecisionFamily::one_hot_distance: return "distance";
        case DecisionFamily::dense: return "dense";
    }
    return "?";
}

DecisionFamily parse_decision_family(const std::string& s) {
    if (s == "max") return DecisionFamily::max;
    if (s == "softmax") return DecisionFamily::softmax;
    if (s == "distance" || s == "one_hot_distance") return DecisionFamily::one_hot_distance;
    if (s == "dense") return DecisionFamily::dense;
    throw FormatError("unknown decision family '" + s + "'");
}

DecideFn make_decider(const FamilyDescriptor& family, double theta, const ClassEncodingSet* encoding) {
    const std::size_t c = family.num_classes;
    const double radius = family.convention == DistanceConvention::similarity ? 1.0 - theta : theta;
    switch (family.family) {
        case DecisionFamily::max:
            return [c, theta](const LikelihoodVector& z) { return classify_max(z, ThresholdPolicy::floor(theta), c); };
        case DecisionFamily::softmax:
            return [c, theta](const LikelihoodVector& z) {
                return classify_softmax(z, ThresholdPolicy::floor(theta), c);
            };
        case DecisionFamily::one_hot_distance:
            return [c, radius](const LikelihoodVector& z) {
                return classify_one_hot_distance(z, ThresholdPolicy::ceiling(radius), c);
            };
        case DecisionFamily::dense: {
            if (!encoding) throw std::invalid_argument("dense family needs an encoding set");
            if (encoding->num_classes() != c) throw std::invalid_argument("encoding class count differs from family");
            return [enc = *encoding, radius](const LikelihoodVector& z) {
                return classify_dense(z, enc, ThresholdPolicy::ceiling(radius));
            };
        }
    }
    throw std::invalid_argument("unknown decision family");
}

TopologySignature signature_for(const FamilyDescriptor& family, double theta, const ClassEncodingSet* encoding,
                                GridSpec grid) {
    const std::size_t p = family.family == DecisionFamily::dense ? encoding->dim() : family.num_classes;
    if (p != grid.dim) throw std::invalid_argument("grid dimension differs from the likelihood dimension");
    return signature_from_grid(label_grid(make_decider(family, theta, encoding), grid, family.num_classes));
}

std::set<TopologySignature> enumerate_signatures(const FamilyDescriptor& family, std::span<const double> thetas,
                                                 std::span<const ClassEncodingSet> encodings, GridSpec grid,
                                                 EnumerationOptions options) {
    if (thetas.empty()) throw std::invalid_argument("threshold sweep must be non-empty");
    std::set<TopologySignature> out;
    auto add = [&](const TopologySignature& s) {
        if (!options.require_all_classes || s.all_classes_present()) out.insert(s);
    };
    for (double theta : thetas) {
        if (encodings.empty()) {
            add(signature_for(family, theta, nullptr, grid));
        } else {
            for (const auto& enc : encodings) add(signature_for(family, theta, &enc, grid));
        }
    }
    return out;
}

std::map<TopologySignature, std::size_t> collect_signatures(const FamilyDescriptor& family,
                                                            std::span<const EncodingDraw> draws, GridSpec grid,
                                                            EnumerationOptions options) {
    std::map<TopologySignature, std::size_t> out;
    for (const auto& d : draws) {
        auto s = signature_for(family, d.theta, &d.encoding, grid);
        if (!options.require_all_classes || s.all_classes_present()) ++out[s];
    }
    return out;
}

std::vector<double> softmax_threshold_boundaries(std::size_t num_classes) {
    if (num_classes < 2) throw std::invalid_argument("need c >= 2");
    std::vector<double> out;
    for (std::size_t k = num_classes; k >= 2; --k) out.push_back(1.0 / static_cast<double>(k));
    return out;
}

std::vector<double> distance_threshold_boundaries(std::size_t num_classes) {
    if (num_classes < 2) throw std::invalid_argument("need c >= 2");
    std::vector<double> out;
    for (std::size_t k = num_classes; k >= 2; --k) out.push_back(1.0 / std::sqrt(static_cast<double>(k)));
    return out;
}

double planar_distance_split_threshold() { return 1.0 - 1.0 / std::sqrt(2.0); }

std::string grid_to_pgm(const LabeledGrid& grid) {
    const std::size_t r = grid.spec.resolution;
    const std::size_t rows = grid.spec.dim == 2 ? r : r * r;
    std::string out = "P2\n" + std::to_string(r) + " " + std::to_string(rows) + "\n" +
                      std::to_string(grid.num_classes) + "\n";
    for (std::size_t row = 0; row < rows; ++row) {
        for (std::size_t col = 0; col < r; ++col) {
            if (col) out += ' ';
            const int l = grid.labels[row * r + col];
            out += std::to_string(l == kOosCode ? 0 : l + 1);
        }
        out += '\n';
    }
    return out;
}

}  // namespace oosenc
