#include "doctest.h"

#include "oosenc/ces.hpp"
#include "oosenc/common.hpp"
#include "oosenc/metrics.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace oosenc;

namespace {

double pair_distance_sum(const ClassEncodingSet& e) {
    double s = 0;
    for (std::size_t i = 0; i < e.num_classes(); ++i)
        for (std::size_t j = 0; j < e.num_classes(); ++j)
            if (i != j) s += euclidean_distance(e[i], e[j]);
    return s;
}

// Two IS blobs and an OOS blob in R^4.
struct Toy {
    std::vector<EmbeddedSample> train, eval;
};

Toy make_toy(std::uint64_t seed) {
    Rng rng(seed);
    auto blob = [&](std::vector<double> mu, std::size_t label) {
        EmbeddedSample s;
        for (double m : mu) s.embedding.push_back(m + 0.3 * rng.normal());
        s.label = label;
        return s;
    };
    Toy t;
    for (int i = 0; i < 20; ++i) {
        t.train.push_back(blob({1, 0, 0, 0}, 0));
        t.train.push_back(blob({-1, 0, 0, 0}, 1));
    }
    for (int i = 0; i < 10; ++i) {
        t.eval.push_back(blob({1, 0, 0, 0}, 0));
        t.eval.push_back(blob({-1, 0, 0, 0}, 1));
        t.eval.push_back(blob({0, 1, 0, 0}, kOosLabel));
    }
    return t;
}

CesConfig small_config(std::size_t iterations) {
    CesConfig c;
    c.iterations = iterations;
    c.seed = 3;
    c.inner_epochs = 3;
    c.network.hidden_dim = 8;
    c.network.batch_size = 8;
    c.network.learning_rate = 0.01;
    return c;
}

}  // namespace

TEST_SUITE("ces") {

TEST_CASE("mean_vector") {
    CHECK(mean_vector({{1, 2}, {3, 4}}) == Vector{2, 3});
    CHECK(mean_vector({{0.25, -0.5, 1}}) == Vector{0.25, -0.5, 1});
    Vector v{0.3, -0.7};
    auto z = mean_vector({v, {-0.3, 0.7}});
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 0.0);
    CHECK_THROWS(mean_vector({}));
    CHECK_THROWS(mean_vector({{1, 2}, {1}}));
}

TEST_CASE("repulsion one step") {
    ClassEncodingSet e({{0.1, 0}, {-0.1, 0}}, EncodingFamily::dense);
    auto r = repulsion_update(e, 0.0001);
    CHECK(r[0][0] == doctest::Approx(0.1001).epsilon(1e-12));
    CHECK(r[1][0] == doctest::Approx(-0.1001).epsilon(1e-12));
    CHECK(r[0][1] == 0.0);
    CHECK(r[1][1] == 0.0);

    ClassEncodingSet edge({{1, 0}, {0, 0}}, EncodingFamily::dense);
    auto c = repulsion_update(edge, 0.1);
    CHECK(c[0][0] == 1.0);
    CHECK(c[1][0] == doctest::Approx(-0.1));

    CHECK_THROWS(repulsion_update(one_hot_encoding_set(2), 0.1));
}

TEST_CASE("coincident vectors are pulled apart") {
    ClassEncodingSet e({{0.2, 0.2}, {0.2, 0.2}, {-0.5, 0.5}}, EncodingFamily::dense);
    auto r = repulsion_update(e, 0.01, 9);
    CHECK(euclidean_distance(r[0], r[1]) > 0.01);
    for (auto& v : r.vectors())
        for (double x : v) CHECK(std::isfinite(x));
    CHECK(repulsion_update(e, 0.01, 9).vectors() == r.vectors());
}

TEST_CASE("repulsion does not shrink pairwise distances") {
    Rng rng(17);
    for (int t = 0; t < 200; ++t) {
        std::size_t c = 2 + rng.below(5), p = 2 + rng.below(6);
        std::vector<Vector> vs(c, Vector(p));
        for (auto& v : vs)
            for (auto& x : v) x = rng.uniform(-0.9, 0.9);
        ClassEncodingSet e(vs, EncodingFamily::dense);
        auto r = repulsion_update(e, 1e-4);
        CHECK(pair_distance_sum(r) >= pair_distance_sum(e));
        for (auto& v : r.vectors())
            for (double x : v) CHECK(std::abs(x) <= 1.0);
    }
}

TEST_CASE("repulsion is permutation equivariant") {
    Rng rng(29);
    for (int t = 0; t < 50; ++t) {
        auto e = random_encoding_set(5, 4, rng.next_u64());
        std::vector<std::size_t> perm{3, 0, 4, 1, 2};
        std::vector<Vector> pv;
        for (auto i : perm) pv.push_back(e[i]);
        auto a = repulsion_update(e, 0.05);
        auto b = repulsion_update(ClassEncodingSet(pv, EncodingFamily::dense), 0.05);
        for (std::size_t k = 0; k < perm.size(); ++k)
            for (std::size_t d = 0; d < 4; ++d) CHECK(b[k][d] == doctest::Approx(a[perm[k]][d]).epsilon(1e-12));
    }
}

TEST_CASE("attraction pulls toward targets") {
    ClassEncodingSet e({{0, 0}, {1, 1}}, EncodingFamily::dense);
    auto a = attraction_update(e, {{1, 0}, {1, -1}}, 0.5);
    CHECK(a[0] == Vector{0.5, 0});
    CHECK(a[1] == Vector{1, 0});
}

TEST_CASE("config validation") {
    CesConfig c;
    c.lambda = 0;
    CHECK_THROWS(c.validate());
    c.lambda = 1e-4;
    c.iterations = 0;
    CHECK_THROWS(c.validate());
    c.iterations = 5;
    CHECK(c.effective_inner_epochs() == 50);
    c.restart_weights = false;
    CHECK(c.effective_inner_epochs() == 1);
    c.inner_epochs = 7;
    CHECK(c.effective_inner_epochs() == 7);
}

TEST_CASE("single iteration trace") {
    auto toy = make_toy(1);
    auto init = random_encoding_set(2, 3, 4);
    auto tr = ces_search(toy.train, toy.eval, init, small_config(1));
    REQUIRE(tr.records.size() == 1);
    CHECK(tr.records[0].iteration == 1);
    CHECK(tr.best_far.value == tr.records[0].far);
    CHECK(tr.best_far.iteration == 1);
    CHECK(tr.best_iser.value == tr.records[0].iser);
    CHECK_FALSE(tr.aborted);
}

TEST_CASE("trace invariants and determinism") {
    auto toy = make_toy(2);
    auto init = random_encoding_set(2, 3, 8);
    auto cfg = small_config(6);
    cfg.lambda = 0.05;
    auto a = ces_search(toy.train, toy.eval, init, cfg);
    auto b = ces_search(toy.train, toy.eval, init, cfg);
    CHECK(trace_csv(a) == trace_csv(b));
    REQUIRE(a.records.size() == 6);

    double best_far = 1e9, best_iser = 1e9;
    for (auto& r : a.records) {
        best_far = std::min(best_far, r.far);
        best_iser = std::min(best_iser, r.iser);
    }
    CHECK(a.best_far.value == best_far);
    CHECK(a.best_iser.value == best_iser);
    auto bsf = a.best_far_so_far();
    for (std::size_t i = 1; i < bsf.size(); ++i) CHECK(bsf[i] <= bsf[i - 1]);
    CHECK(a.best_far.encoding);
    for (auto& v : a.best_far.encoding->vectors())
        for (double x : v) CHECK(std::abs(x) <= 1.0);
    CHECK(a.records[0].encoding_hash != a.records[5].encoding_hash);
}

TEST_CASE("static encoding reduces to repeated training") {
    auto toy = make_toy(3);
    auto init = random_encoding_set(2, 3, 12);
    auto cfg = small_config(4);
    cfg.restart_weights = false;
    cfg.lambda = 1e-300;  // below the rounding of every component
    auto tr = ces_search(toy.train, toy.eval, init, cfg);
    REQUIRE(tr.records.size() == 4);

    NetworkConfig net = cfg.network;
    net.input_dim = 4;
    net.output_dim = 3;
    net.loss = LossKind::mse;
    net.seed = derive_seed(cfg.seed, 1);
    Trainer trainer(init_parameters(net), net, init);
    for (std::size_t it = 0; it < 4; ++it) {
        for (std::size_t e = 0; e < 3; ++e) trainer.run_epoch(toy.train);
        auto rep = evaluate(trainer.model(), toy.eval, DecisionRule::dense, &init);
        CHECK(tr.records[it].encoding_hash == encoding_hash(init));
        CHECK(tr.records[it].far == rep.far_at_theta);
        CHECK(tr.records[it].iser == rep.iser);
        CHECK(tr.records[it].eer == rep.eer);
    }
}

TEST_CASE("fixed theta and preconditions") {
    auto toy = make_toy(4);
    auto init = random_encoding_set(2, 3, 5);
    auto cfg = small_config(2);
    cfg.fixed_theta = 0.0;
    auto tr = ces_search(toy.train, toy.eval, init, cfg);
    for (auto& r : tr.records) CHECK(r.far == 0.0);  // nothing is within distance 0

    CHECK_THROWS(ces_search(toy.train, toy.eval, one_hot_encoding_set(2), cfg));
    std::vector<EmbeddedSample> only_is;
    for (auto& s : toy.eval)
        if (!s.is_oos()) only_is.push_back(s);
    CHECK_THROWS(ces_search(toy.train, only_is, init, cfg));
}

TEST_CASE("divergence keeps the partial trace") {
    auto toy = make_toy(5);
    toy.train[7].embedding[0] = std::numeric_limits<double>::infinity();
    auto tr = ces_search(toy.train, toy.eval, random_encoding_set(2, 3, 1), small_config(3));
    CHECK(tr.aborted);
    CHECK(tr.records.empty());
}

TEST_CASE("trace export") {
    auto toy = make_toy(6);
    auto tr = ces_search(toy.train, toy.eval, random_encoding_set(2, 3, 2), small_config(3));
    auto dir = std::filesystem::temp_directory_path() / "oosenc_ces_test";
    std::filesystem::remove_all(dir);
    write_trace(tr, dir);
    std::ifstream in(dir / "trace.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "iteration,far,iser");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 3);
    auto enc_path = dir / ("best_far_iter" + std::to_string(tr.best_far.iteration) + ".enc");
    REQUIRE(std::filesystem::exists(enc_path));
    CHECK(load_encoding_set(enc_path).vectors() == tr.best_far.encoding->vectors());
    std::filesystem::remove_all(dir);
}

}
