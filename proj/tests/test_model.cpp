#include "oosenc/common.hpp"
#include "oosenc/model.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace oosenc;

namespace {

// Two classes in R^2 split by the line x = 0 with a margin.
std::vector<EmbeddedSample> separable_toy() {
    Rng rng(99);
    std::vector<EmbeddedSample> out;
    for (int i = 0; i < 20; ++i) {
        const std::size_t label = i % 2;
        const double x = (label == 0 ? 1.0 : -1.0) * rng.uniform(0.3, 1.0);
        out.push_back({{x, rng.uniform(-1.0, 1.0)}, label});
    }
    return out;
}

NetworkConfig toy_config(LossKind loss, std::size_t p) {
    NetworkConfig cfg;
    cfg.input_dim = 2;
    cfg.hidden_dim = 16;
    cfg.output_dim = p;
    cfg.epochs = 200;
    cfg.batch_size = 8;
    cfg.learning_rate = 0.01;
    cfg.dropout_rate = 0.1;
    cfg.loss = loss;
    cfg.seed = 5;
    return cfg;
}

double& param_at(Parameters& p, int block, Eigen::Index i) {
    switch (block) {
        case 0: return p.w1.data()[i];
        case 1: return p.b1.data()[i];
        case 2: return p.w2.data()[i];
        default: return p.b2.data()[i];
    }
}

Eigen::Index block_size(const Parameters& p, int block) {
    switch (block) {
        case 0: return p.w1.size();
        case 1: return p.b1.size();
        case 2: return p.w2.size();
        default: return p.b2.size();
    }
}

// Central differences, step 1e-5, against the analytic gradient.
double max_relative_gradient_error(LossKind loss, const Eigen::MatrixXd* mask) {
    NetworkConfig cfg;
    cfg.input_dim = 3;
    cfg.hidden_dim = 4;
    cfg.output_dim = 2;
    cfg.seed = 123;
    Parameters params = init_parameters(cfg);
    Rng rng(7);
    for (Eigen::Index i = 0; i < params.b1.size(); ++i) params.b1[i] = rng.uniform(-0.5, 0.5);
    for (Eigen::Index i = 0; i < params.b2.size(); ++i) params.b2[i] = rng.uniform(-0.5, 0.5);
    Eigen::MatrixXd x(3, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
    Eigen::MatrixXd t(2, 5);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-0.9, 0.9);
    const std::vector<std::size_t> labels{0, 1, 1, 0, 1};

    const auto analytic = loss_and_gradients(params, x, labels, t, loss, mask);
    double worst = 0.0;
    const double h = 1e-5;
    for (int block = 0; block < 4; ++block) {
        for (Eigen::Index i = 0; i < block_size(params, block); ++i) {
            Parameters plus = params, minus = params;
            param_at(plus, block, i) += h;
            param_at(minus, block, i) -= h;
            const double numeric = (loss_and_gradients(plus, x, labels, t, loss, mask).loss -
                                    loss_and_gradients(minus, x, labels, t, loss, mask).loss) /
                                   (2.0 * h);
            Parameters g = analytic.grad;
            const double exact = param_at(g, block, i);
            const double denom = std::max({std::abs(numeric), std::abs(exact), 1e-7});
            worst = std::max(worst, std::abs(numeric - exact) / denom);
        }
    }
    return worst;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("analytic gradients match central differences") {
    CHECK(max_relative_gradient_error(LossKind::cross_entropy, nullptr) < 1e-4);
    CHECK(max_relative_gradient_error(LossKind::mse, nullptr) < 1e-4);
    Eigen::MatrixXd mask(4, 5);
    Rng rng(2);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform01() < 0.7 ? 1.0 / 0.7 : 0.0;
    CHECK(max_relative_gradient_error(LossKind::mse, &mask) < 1e-4);
}

TEST_CASE("cross-entropy training separates a toy set") {
    const auto data = separable_toy();
    const auto model = train_classifier(data, one_hot_encoding_set(2), toy_config(LossKind::cross_entropy, 2));
    std::size_t correct = 0;
    for (const auto& s : data)
        if (argmax(predict(model, s.embedding).values()) == s.label) ++correct;
    CHECK(correct == data.size());
    CHECK(model.loss_history().back() < model.loss_history().front());
}

TEST_CASE("mse training pulls projections toward their class vectors") {
    const auto data = separable_toy();
    const ClassEncodingSet enc({{0.8, 0.0}, {-0.8, 0.0}}, EncodingFamily::dense);
    const auto model = train_classifier(data, enc, toy_config(LossKind::mse, 2));
    double to_own = 0.0, to_other = 0.0;
    std::size_t n = 0;
    for (const auto& s : data) {
        if (s.label != 0) continue;
        const auto z = predict(model, s.embedding);
        to_own += euclidean_distance(z.values(), enc[0]);
        to_other += euclidean_distance(z.values(), enc[1]);
        ++n;
    }
    CHECK(to_own / n < to_other / n);
    CHECK(model.loss_history().back() < model.loss_history().front());
}

TEST_CASE("mse with one-hot targets reduces squared distance to h_y") {
    const auto data = separable_toy();
    auto cfg = toy_config(LossKind::mse, 2);
    const auto enc = one_hot_encoding_set(2);
    auto sq_dist = [&](const LikelihoodModel& m) {
        double s = 0.0;
        for (const auto& x : data) {
            const double d = euclidean_distance(predict(m, x.embedding).values(), enc[x.label]);
            s += d * d;
        }
        return s;
    };
    cfg.epochs = 1;
    const double early = sq_dist(train_classifier(data, enc, cfg));
    cfg.epochs = 100;
    const double late = sq_dist(train_classifier(data, enc, cfg));
    CHECK(late < early);
}

TEST_CASE("seeded training is deterministic") {
    const auto data = separable_toy();
    const auto cfg = toy_config(LossKind::cross_entropy, 2);
    const auto a = train_classifier(data, one_hot_encoding_set(2), cfg);
    const auto b = train_classifier(data, one_hot_encoding_set(2), cfg);
    CHECK(a.params() == b.params());
    CHECK(a.loss_history() == b.loss_history());
}

TEST_CASE("training preconditions") {
    auto data = separable_toy();
    auto cfg = toy_config(LossKind::cross_entropy, 2);
    CHECK_THROWS_AS(train_classifier({}, one_hot_encoding_set(2), cfg), std::invalid_argument);
    const ClassEncodingSet dense({{0.5, 0.0}, {-0.5, 0.0}}, EncodingFamily::dense);
    CHECK_THROWS_AS(train_classifier(data, dense, cfg), std::invalid_argument);
    cfg.output_dim = 3;
    CHECK_THROWS_AS(train_classifier(data, one_hot_encoding_set(2), cfg), std::invalid_argument);
    cfg.output_dim = 2;
    data.push_back({{0.0, 0.0}, kOosLabel});
    CHECK_THROWS_AS(train_classifier(data, one_hot_encoding_set(2), cfg), std::invalid_argument);
}

TEST_CASE("divergence is reported") {
    auto data = separable_toy();
    data[0].embedding[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(train_classifier(data, one_hot_encoding_set(2), toy_config(LossKind::cross_entropy, 2)),
                    DivergenceError);
}

TEST_CASE("predict") {
    Parameters zero{Eigen::MatrixXd::Zero(4, 3), Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Zero(2, 4),
                    Eigen::VectorXd::Zero(2)};
    const LikelihoodModel m(zero, NetworkConfig{});
    const auto z = predict(m, Vector{0.3, -2.0, 5.0});
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 0.0);
    CHECK_THROWS_AS(predict(m, Vector{1.0}), std::invalid_argument);

    NetworkConfig cfg;
    cfg.input_dim = 3;
    cfg.hidden_dim = 8;
    cfg.output_dim = 4;
    cfg.seed = 1;
    Parameters big = init_parameters(cfg);
    big.w2 *= 50.0;
    const LikelihoodModel loud(big, cfg);
    Rng rng(4);
    std::vector<Vector> batch;
    for (int i = 0; i < 50; ++i) batch.push_back({rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-9, 9)});
    const auto outs = predict_batch(loud, batch);
    REQUIRE(outs.size() == batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto single = predict(loud, batch[i]);
        CHECK(single == predict(loud, batch[i]));
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK((single[k] >= -1.0 && single[k] <= 1.0));
            CHECK(std::abs(single[k] - outs[i][k]) <= 1e-12);
        }
    }
    CHECK(predict_batch(loud, {}).empty());
    const auto one = predict_batch(loud, {batch[0]});
    REQUIRE(one.size() == 1);
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(one[0][k] - predict(loud, batch[0])[k]) <= 1e-12);
}

TEST_CASE("checkpoint round trip") {
    const auto data = separable_toy();
    auto cfg = toy_config(LossKind::mse, 2);
    cfg.epochs = 3;
    const auto model = train_classifier(data, one_hot_encoding_set(2), cfg);
    const auto path = std::filesystem::temp_directory_path() / "oosenc_model_roundtrip.txt";
    save_model(model, path);
    const auto back = load_model(path);
    std::filesystem::remove(path);
    CHECK(back.config().loss == LossKind::mse);
    CHECK((back.params().w1 - model.params().w1).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((back.params().w2 - model.params().w2).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((back.params().b1 - model.params().b1).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((back.params().b2 - model.params().b2).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK_THROWS_AS(parse_model("2 3\n"), FormatError);
    CHECK_THROWS_AS(parse_model("1 1 1\nloss hinge\n"), FormatError);
}

}  // TEST_SUITE
