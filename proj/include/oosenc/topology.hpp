#pragma once

#include "oosenc/encodings.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace oosenc {

// Regular grid of cells over [-1,1]^dim.
struct GridSpec {
    std::size_t dim = 2;
    std::size_t resolution = 256;

    // 256 cells per axis in 2D, 64 in 3D.
    static GridSpec defaults(std::size_t dim);

    void validate() const;  // dim in {2,3}, resolution >= 16
    std::size_t cell_count() const;
    double center(std::size_t i) const { return -1.0 + (static_cast<double>(i) + 0.5) * 2.0 / resolution; }
    // Adjacent cell pairs needed before two components count as touching.
    std::size_t min_contacts() const { return resolution / 32 < 1 ? 1 : resolution / 32; }
};

// Label codes: class index, or kOosCode for out-of-scope.
inline constexpr int kOosCode = -1;

struct LabeledGrid {
    GridSpec spec;
    std::size_t num_classes = 0;
    std::vector<int> labels;  // row-major, axis 0 slowest

    int at(std::size_t i, std::size_t j) const { return labels[i * spec.resolution + j]; }
    int at(std::size_t i, std::size_t j, std::size_t k) const {
        return labels[(i * spec.resolution + j) * spec.resolution + k];
    }
};

using DecideFn = std::function<ClassDecision(const LikelihoodVector&)>;

// Labels every cell with the decision at its center.
LabeledGrid label_grid(const DecideFn& decide, GridSpec grid, std::size_t num_classes);

// A connected region: its label and canonical ordinal among regions with
// the same label.
struct ComponentRef {
    int label = kOosCode;
    std::size_t ordinal = 0;

    auto operator<=>(const ComponentRef&) const = default;
};

// Connected-component structure of a labeled grid. Class labels are kept
// distinct (no quotient by class permutation); ordinals within a label are
// canonicalised so equal structures compare equal.
struct TopologySignature {
    std::size_t num_classes = 0;
    std::vector<std::size_t> class_counts;  // per class index
    std::size_t oos_count = 0;
    std::vector<std::pair<ComponentRef, ComponentRef>> adjacency;  // sorted, first < second

    auto operator<=>(const TopologySignature&) const = default;

    std::size_t count(int label) const { return label == kOosCode ? oos_count : class_counts.at(label); }
    // Whether any component of label a touches any component of label b.
    bool labels_adjacent(int a, int b) const;
    // Classes touched by one OOS component.
    std::set<int> oos_neighbours(std::size_t ordinal) const;
    // Every class owns at least one component.
    bool all_classes_present() const;

    std::string to_json() const;
    std::string describe() const;
};

std::string label_name(int code);

// Components via 4-neighbourhood (2D) / 6-neighbourhood (3D) union-find.
// Two components are adjacent when at least `min_contacts` neighbouring cell
// pairs join them; 0 selects grid.spec.min_contacts(). Components with fewer
// than `min_contacts` cells are not counted.
TopologySignature signature_from_grid(const LabeledGrid& grid, std::size_t min_contacts = 0);

enum class DecisionFamily { max, softmax, one_hot_distance, dense };

// How theta is read by the distance families. `ceiling` accepts d <= theta.
// `similarity` accepts d <= 1 - theta, the radius-(1 - theta) picture of the
// planar one-hot distance analysis.
enum class DistanceConvention { ceiling, similarity };

struct FamilyDescriptor {
    DecisionFamily family = DecisionFamily::max;
    std::size_t num_classes = 2;
    DistanceConvention convention = DistanceConvention::ceiling;
};

std::string to_string(DecisionFamily f);
DecisionFamily parse_decision_family(const std::string& s);

// Decision function for one family member. `encoding` is required for the
// dense family and ignored otherwise.
DecideFn make_decider(const FamilyDescriptor& family, double theta, const ClassEncodingSet* encoding = nullptr);

TopologySignature signature_for(const FamilyDescriptor& family, double theta, const ClassEncodingSet* encoding,
                                GridSpec grid);

struct EnumerationOptions {
    // Drop signatures in which some class has no cells at all: the class is
    // unreachable, so the configuration is degenerate rather than a topology
    // of c classes.
    bool require_all_classes = true;
};

// Distinct signatures over thetas x encodings. An empty `encodings` span
// means the family needs none.
std::set<TopologySignature> enumerate_signatures(const FamilyDescriptor& family, std::span<const double> thetas,
                                                 std::span<const ClassEncodingSet> encodings, GridSpec grid,
                                                 EnumerationOptions options = {});

struct EncodingDraw {
    ClassEncodingSet encoding;
    double theta;
};

// Distinct signatures over paired (encoding, theta) draws, with occurrence counts.
std::map<TopologySignature, std::size_t> collect_signatures(const FamilyDescriptor& family,
                                                            std::span<const EncodingDraw> draws, GridSpec grid,
                                                            EnumerationOptions options = {});

// Thresholds at which the softmax rule changes topology: 1/c, ..., 1/2.
std::vector<double> softmax_threshold_boundaries(std::size_t num_classes);

// Interval endpoints 1/sqrt(c), ..., 1/sqrt(2) listed for the one-hot
// distance rule in higher dimensions.
std::vector<double> distance_threshold_boundaries(std::size_t num_classes);

// 1 - 1/sqrt(2): planar split between one and two OOS components under the
// similarity convention.
double planar_distance_split_threshold();

// Text raster, one label code per cell (OOS = 0, class i = i + 1). 3D grids
// are written as stacked slices along axis 0.
std::string grid_to_pgm(const LabeledGrid& grid);

}  // namespace oosenc
