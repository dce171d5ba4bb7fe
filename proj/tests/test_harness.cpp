#include "doctest.h"

#include "oosenc/common.hpp"
#include "oosenc/dataset.hpp"
#include "oosenc/experiment.hpp"
#include "oosenc/featurize.hpp"
#include "oosenc/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace oosenc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto d = fs::temp_directory_path() / "oosenc_harness_test";
    fs::create_directories(d);
    return d / name;
}

void write_file(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

double norm(const Vector& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

EmbeddedDataset toy_data(std::uint64_t seed) {
    Rng rng(seed);
    EmbeddedDataset d;
    d.num_classes = 3;
    d.dim = 6;
    auto sample = [&](std::size_t axis, std::size_t label) {
        EmbeddedSample s;
        s.embedding.assign(6, 0.0);
        for (auto& x : s.embedding) x = 0.3 * rng.normal();
        s.embedding[axis] += 1.0;
        s.label = label;
        return s;
    };
    for (int i = 0; i < 12; ++i)
        for (std::size_t c = 0; c < 3; ++c) d.train.push_back(sample(c, c));
    for (int i = 0; i < 6; ++i) {
        for (std::size_t c = 0; c < 3; ++c) d.test.push_back(sample(c, c));
        d.test.push_back(sample(4, kOosLabel));
    }
    return d;
}

ExperimentConfig toy_config() {
    ExperimentConfig c;
    c.algorithms = {Algorithm::one_hot_softmax, Algorithm::one_hot_distance, Algorithm::random_dense};
    c.n_values = {3, 5};
    c.samples_per_n = 3;
    c.network.hidden_dim = 8;
    c.network.epochs = 5;
    c.network.batch_size = 8;
    c.network.learning_rate = 0.01;
    c.seed = 11;
    c.threads = 2;
    return c;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("hint3 parsing") {
    auto train = scratch("train.csv");
    auto test = scratch("test.csv");
    write_file(train, "sentence,label\nhello there,b\n\"quoted, text\",a\nmore b,b\n");
    write_file(test, "sentence,label\nhi,a\nwhat is this,NO_NODES_DETECTED\n");
    auto d = parse_hint3(train, test);
    CHECK(d.class_names == std::vector<std::string>{"b", "a"});
    CHECK(d.train.size() == 3);
    CHECK(d.train[1].text == "quoted, text");
    REQUIRE(d.test.size() == 2);
    CHECK(d.test[1].label == kOosLabelName);

    write_file(train, "sentence,label\nhello,a\nnoise,NO_NODES_DETECTED\n");
    CHECK_THROWS_AS(parse_hint3(train, test), FormatError);
    write_file(train, "text,intent\nhello,a\n");
    CHECK_THROWS_AS(parse_hint3(train, test), FormatError);

    // Columns may come in any order; custom marker.
    write_file(train, "\xEF\xBB\xBFlabel,sentence\na,x\nb,y\n");
    write_file(test, "sentence,label\nz,OOS\n\"say \"\"hi\"\"\",a\n");
    auto e = parse_hint3(train, test, "OOS");
    CHECK(e.class_names == std::vector<std::string>{"a", "b"});
    CHECK(e.test[0].label == kOosLabelName);
    CHECK(e.test[1].text == "say \"hi\"");
}

TEST_CASE("hint3 fixture directory") {
    auto d = parse_hint3(fs::path(OOSENC_TEST_DATA) / "hint3_mini");
    CHECK(d.class_names.size() == 3);
    CHECK(d.train.size() == 45);
    CHECK(d.test.size() == 25);
    CHECK(std::count_if(d.test.begin(), d.test.end(), [](auto& r) { return r.label == kOosLabelName; }) == 10);
}

TEST_CASE("clinc150 parsing") {
    const std::string js = R"({
      "train": [["book a flight", "travel"], ["play jazz", "music"], ["fly to rome", "travel"]],
      "val": [["flight please", "travel"]],
      "test": [["play rock", "music"], ["trip to paris", "travel"]],
      "oos_train": [["random chatter", "oos"]],
      "oos_val": [["gibberish", "oos"]],
      "oos_test": [["what is love", "oos"], ["sing to me", "oos"]]
    })";
    auto d = parse_clinc150_text(js);
    CHECK(d.class_names == std::vector<std::string>{"travel", "music"});
    CHECK(d.train.size() == 3);
    CHECK(d.test.size() == 4);
    CHECK(d.test[3].label == kOosLabelName);

    auto v = parse_clinc150_text(js, {true, true});
    CHECK(v.test.size() == 6);

    const std::string no_oos = R"({"train": [["a", "x"], ["b", "y"]], "test": [["c", "x"]], "oos_test": []})";
    CHECK_THROWS_AS(parse_clinc150_text(no_oos), FormatError);
    CHECK(parse_clinc150_text(no_oos, {false, false}).test.size() == 1);
    CHECK_THROWS_AS(parse_clinc150_text("{\"train\": [}"), FormatError);
    CHECK_THROWS_AS(parse_clinc150_text(R"({"test": []})"), FormatError);
}

TEST_CASE("jsonl round trip") {
    auto d = make_dataset({{"a b", "x"}, {"c \"d\"", "y"}}, {{"e", "x"}, {"f", kOosLabelName}});
    auto back = parse_jsonl_text(to_jsonl(d));
    CHECK(back.train == d.train);
    CHECK(back.test == d.test);
    CHECK(back.class_names == d.class_names);
    CHECK_THROWS_AS(parse_jsonl_text("{\"text\": \"a\"}\n"), FormatError);
    CHECK_THROWS_AS(make_dataset({{"a", "x"}}, {{"b", "zzz"}}), FormatError);
}

TEST_CASE("hash featurizer") {
    auto a = hash_featurize("Where is my ORDER?", 64);
    auto b = hash_featurize("Where is my ORDER?", 64);
    CHECK(a == b);
    CHECK(a.size() == 64);
    CHECK(std::abs(norm(a) - 1.0) < 1e-9);
    CHECK(hash_featurize("where is my order", 64) == a);
    auto e = hash_featurize("", 16);
    CHECK(norm(e) == 0.0);
    CHECK(norm(hash_featurize("  ...  ", 16)) == 0.0);
    CHECK_THROWS(hash_featurize("x", 4));
    CHECK(tokenize("Hello, world-42!") == std::vector<std::string>{"hello", "world", "42"});

    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        std::string s;
        for (std::size_t k = 0, n = 1 + rng.below(30); k < n; ++k) s += static_cast<char>('a' + rng.below(27));
        auto v = hash_featurize(s, 8 + rng.below(100));
        if (norm(v) > 0) CHECK(std::abs(norm(v) - 1.0) < 1e-9);
    }
}

TEST_CASE("embedding files") {
    EmbeddingTable t;
    t.dim = 512;
    Rng rng(8);
    for (std::string id : {"one", "two words", "three, with comma"}) {
        Vector v(512);
        for (auto& x : v) x = rng.normal();
        t.vectors[id] = v;
    }
    auto p = scratch("emb.txt");
    save_embedding_file(t, p);
    auto back = load_embedding_file(p);
    CHECK(back.vectors.size() == 3);
    CHECK(back.dim == 512);
    for (auto& [id, v] : t.vectors) {
        REQUIRE(back.vectors.count(id));
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(back.vectors[id][i] - v[i]) <= 1e-9);
    }

    CHECK_THROWS_AS(parse_embedding_text("2 2\na\t1 2\na\t3 4\n"), FormatError);
    CHECK_THROWS_AS(parse_embedding_text("2 2\na\t1 2\nb\t3\n"), FormatError);
    CHECK_THROWS_AS(parse_embedding_text("3 2\na\t1 2\nb\t3 4\n"), FormatError);
    CHECK_THROWS_AS(parse_embedding_text("x y\n"), FormatError);
    CHECK_THROWS_AS(load_embedding_file("/nonexistent/emb.txt"), FormatError);
}

TEST_CASE("embedding source") {
    EmbeddingTable t = parse_embedding_text("1 3\nhello\t1 2 3\n");
    EmbeddingSource src{&t};
    CHECK(src.dim() == 3);
    CHECK(src.embed("hello") == Vector{1, 2, 3});
    CHECK_THROWS_AS(src.embed("missing"), FormatError);
    EmbeddingSource hash{nullptr, 32};
    CHECK(hash.embed("hello") == hash_featurize("hello", 32));

    auto raw = make_dataset({{"a", "x"}, {"b", "y"}}, {{"c", "x"}, {"d", kOosLabelName}});
    auto emb = embed_dataset(raw, hash);
    CHECK(emb.num_classes == 2);
    CHECK(emb.dim == 32);
    CHECK(emb.train[1].label == 1);
    CHECK(emb.test[1].label == kOosLabel);
}

TEST_CASE("aggregate") {
    auto s = aggregate({0.2, 0.4});
    CHECK(s.avg == doctest::Approx(0.3));
    CHECK(s.std == doctest::Approx(0.1));
    CHECK(s.min == 0.2);
    auto one = aggregate({0.7});
    CHECK(one.std == 0.0);
    CHECK(one.avg == one.min);
    CHECK_THROWS(aggregate({}));
}

TEST_CASE("experiment with a single sample") {
    auto data = toy_data(1);
    auto cfg = toy_config();
    cfg.samples_per_n = 1;
    auto table = run_experiment(data, cfg);
    REQUIRE(table.rows.size() == 4);
    for (auto& r : table.rows) {
        CHECK(r.eer.std == 0.0);
        CHECK(r.far.avg == r.far.min);
        CHECK(r.iser.avg == r.iser.min);
    }
    auto* oh = table.find(Algorithm::one_hot_softmax, 3);
    REQUIRE(oh);
    CHECK(oh->samples == 1);
    CHECK(table.find(Algorithm::random_dense, 5));
    CHECK_FALSE(table.find(Algorithm::random_dense, 7));
}

TEST_CASE("experiment cells are consistent") {
    auto data = toy_data(2);
    auto table = run_experiment(data, toy_config());
    for (auto& r : table.rows) {
        for (auto* m : {&r.eer, &r.far, &r.iser}) {
            CHECK(m->min <= m->avg);
            CHECK(m->std >= 0.0);
            CHECK(m->min >= 0.0);
            CHECK(m->avg <= 1.0);
        }
    }
    auto* rd = table.find(Algorithm::random_dense, 5);
    REQUIRE(rd);
    REQUIRE(rd->runs.size() == 3);
    // Each sample reproduces on its own.
    auto again = run_random_sample(data, 5, 11, 2, toy_config().network);
    CHECK(again.far == rd->runs[1].far);
    CHECK(again.eer == rd->runs[1].eer);
}

TEST_CASE("min aggregates across seed partitions") {
    auto data = toy_data(3);
    auto cfg = toy_config();
    cfg.algorithms = {Algorithm::random_dense};
    cfg.n_values = {4};
    cfg.samples_per_n = 6;
    auto whole = run_experiment(data, cfg);
    cfg.samples_per_n = 3;
    auto first = run_experiment(data, cfg);
    cfg.seed += 3;
    auto second = run_experiment(data, cfg);
    auto& w = whole.rows.at(0);
    auto& a = first.rows.at(0);
    auto& b = second.rows.at(0);
    CHECK(w.far.min == std::min(a.far.min, b.far.min));
    CHECK(w.eer.min == std::min(a.eer.min, b.eer.min));
    CHECK(w.iser.min == std::min(a.iser.min, b.iser.min));
}

TEST_CASE("reports are byte identical across runs and thread counts") {
    auto data = toy_data(4);
    auto cfg = toy_config();
    auto a = emit_report(run_experiment(data, cfg), ReportFormat::csv);
    cfg.threads = 1;
    auto b = emit_report(run_experiment(data, cfg), ReportFormat::csv);
    CHECK(a == b);
}

TEST_CASE("raw dataset experiment never trains on OOS") {
    auto raw = parse_hint3(fs::path(OOSENC_TEST_DATA) / "hint3_mini");
    auto emb = load_embedding_file(fs::path(OOSENC_TEST_DATA) / "hint3_mini" / "embeddings.txt");
    auto data = embed_dataset(raw, EmbeddingSource{&emb});
    for (auto& s : data.train) CHECK_FALSE(s.is_oos());
    auto cfg = toy_config();
    cfg.samples_per_n = 2;
    auto t = run_experiment(raw, cfg, EmbeddingSource{&emb});
    CHECK(t.rows.size() == 4);
}

TEST_CASE("config validation") {
    auto cfg = toy_config();
    cfg.samples_per_n = 0;
    CHECK_THROWS(cfg.validate(3));
    cfg = toy_config();
    cfg.n_values.clear();
    CHECK_THROWS(cfg.validate(3));
    cfg.algorithms = {Algorithm::one_hot_softmax};
    CHECK_NOTHROW(cfg.validate(3));
    cfg.algorithms = {Algorithm::loaded_encoding};
    CHECK_THROWS(cfg.validate(3));
    CHECK(parse_algorithm("random_dense") == Algorithm::random_dense);
    CHECK_THROWS(parse_algorithm("bogus"));
}

TEST_CASE("report deltas") {
    CHECK(format_delta(0.2, 0.2) == "0%");
    CHECK(format_delta(0.095, 0.165) == "-42%");
    CHECK(format_delta(0.3, 0.2) == "+50%");
    CHECK(format_delta(0.0, 0.0) == "0%");
    CHECK(format_delta(0.1, 0.0) == "n/a");
}

TEST_CASE("report layout") {
    ReportTable t;
    ReportRow base;
    base.algorithm = Algorithm::one_hot_softmax;
    base.n = 3;
    base.eer = {0.2, 0.0, 0.2};
    base.far = {0.165, 0.0, 0.165};
    base.iser = {0.1, 0.0, 0.1};
    t.rows.push_back(base);
    auto one = emit_report(t, ReportFormat::csv);
    CHECK(std::count(one.begin(), one.end(), '\n') == 2);
    CHECK(one.rfind("algorithm,N,eer_avg,eer_std,eer_min,far_avg,far_std,far_min,iser_avg,iser_std,iser_min", 0) == 0);
    CHECK(one.find(",0%,0%,0%") != std::string::npos);

    ReportRow dense = base;
    dense.algorithm = Algorithm::random_dense;
    dense.n = 10;
    dense.far = {0.12, 0.02, 0.095};
    t.rows.push_back(dense);
    auto md = emit_report(t, ReportFormat::markdown);
    CHECK(md.find("| random_dense | 10 |") != std::string::npos);
    CHECK(md.find("-42%") != std::string::npos);
    CHECK(md.find("| --- |") != std::string::npos);

    CHECK_THROWS(emit_report(ReportTable{}, ReportFormat::csv));
    CHECK(parse_report_format("markdown") == ReportFormat::markdown);
    CHECK_THROWS(parse_report_format("html"));
}

}
