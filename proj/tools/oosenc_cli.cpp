#include "oosenc/ces.hpp"
#include "oosenc/common.hpp"
#include "oosenc/dataset.hpp"
#include "oosenc/experiment.hpp"
#include "oosenc/metrics.hpp"
#include "oosenc/model.hpp"
#include "oosenc/report.hpp"
#include "oosenc/topology.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace oosenc;
namespace fs = std::filesystem;

namespace {

struct DataOptions {
    std::string dataset;
    std::string format = "hint3";
    std::string embeddings;
    std::size_t feat_dim = 512;
    std::string oos_marker = kHint3OosMarker;
    bool include_val = false;
};

struct NetOptions {
    std::size_t hidden = 768;
    std::size_t epochs = 50;
    std::size_t batch = 32;
    double lr = 0.001;
    double dropout = 0.1;
};

void add_data_options(CLI::App* app, DataOptions& d) {
    app->add_option("--dataset", d.dataset, "HINT3 directory (train.csv, test.csv), CLINC150 JSON or JSONL file")
        ->required();
    app->add_option("--format", d.format, "hint3, clinc150 or jsonl")
        ->check(CLI::IsMember({"hint3", "clinc150", "jsonl"}));
    app->add_option("--embeddings", d.embeddings, "embedding file; the hash featurizer is used without one");
    app->add_option("--feat-dim", d.feat_dim, "hash featurizer dimension")->check(CLI::Range(8, 1 << 20));
    app->add_option("--oos-marker", d.oos_marker, "label marking out-of-scope rows in HINT3 files");
    app->add_flag("--include-val", d.include_val, "fold CLINC150 validation splits into the test set");
}

void add_net_options(CLI::App* app, NetOptions& n) {
    app->add_option("--hidden", n.hidden, "hidden layer width");
    app->add_option("--epochs", n.epochs, "training epochs");
    app->add_option("--batch", n.batch, "mini-batch size");
    app->add_option("--lr", n.lr, "Adam learning rate");
    app->add_option("--dropout", n.dropout, "dropout rate on the hidden layer");
}

NetworkConfig network_from(const NetOptions& n) {
    NetworkConfig c;
    c.hidden_dim = n.hidden;
    c.epochs = n.epochs;
    c.batch_size = n.batch;
    c.learning_rate = n.lr;
    c.dropout_rate = n.dropout;
    return c;
}

RawDataset load_raw(const DataOptions& d) {
    if (d.format == "hint3") return parse_hint3(fs::path(d.dataset), d.oos_marker);
    if (d.format == "clinc150") return parse_clinc150(d.dataset, {true, d.include_val});
    return parse_jsonl(d.dataset);
}

struct Loaded {
    RawDataset raw;
    std::optional<EmbeddingTable> table;
    EmbeddedDataset data;

    EmbeddingSource source(std::size_t feat_dim) const { return {table ? &*table : nullptr, feat_dim}; }
};

Loaded load_data(const DataOptions& d) {
    Loaded l;
    l.raw = load_raw(d);
    if (!d.embeddings.empty()) l.table = load_embedding_file(d.embeddings);
    l.data = embed_dataset(l.raw, l.source(d.feat_dim));
    return l;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out << text;
}

DecisionRule rule_for(Algorithm a) {
    switch (a) {
        case Algorithm::one_hot_softmax: return DecisionRule::softmax;
        case Algorithm::one_hot_distance: return DecisionRule::one_hot_distance;
        default: return DecisionRule::dense;
    }
}

std::vector<double> default_sweep() {
    std::vector<double> s;
    for (int k = 1; k <= 19; ++k) s.push_back(k / 20.0);
    return s;
}

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

int run(int argc, char** argv) {
    CLI::App app{"Out-of-scope detection with dense class encodings"};
    app.require_subcommand(1);

    DataOptions data;
    NetOptions net;
    std::uint64_t seed = 0;
    std::string out;

    // train
    auto* train = app.add_subcommand("train", "train one network and write its checkpoint");
    std::string train_algo = "one_hot_softmax";
    std::size_t train_n = 10;
    std::string train_encoding;
    bool od_mse = false;
    add_data_options(train, data);
    add_net_options(train, net);
    train->add_option("--algo", train_algo, "one_hot_softmax, one_hot_distance, random_dense or loaded_encoding");
    train->add_option("--n", train_n, "dimension of the random dense encoding");
    train->add_option("--encoding", train_encoding, "class encoding file for loaded_encoding");
    train->add_flag("--one-hot-distance-mse", od_mse, "train the 1-hot distance network with MSE");
    train->add_option("--seed", seed, "random seed");
    train->add_option("--out", out, "model checkpoint path")->required();

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "score a checkpoint on the test split");
    std::string model_path, eval_algo = "one_hot_softmax", eval_encoding;
    std::optional<double> theta;
    add_data_options(evaluate_cmd, data);
    evaluate_cmd->add_option("--model", model_path, "model checkpoint")->required();
    evaluate_cmd->add_option("--algo", eval_algo, "decision rule the model was trained for");
    evaluate_cmd->add_option("--encoding", eval_encoding, "class encoding file for dense rules");
    evaluate_cmd->add_option("--theta", theta, "also report FAR/FRR at this threshold");
    evaluate_cmd->add_option("--out", out, "write the FAR/FRR curve CSV here");

    // sample-encodings
    auto* sample = app.add_subcommand("sample-encodings", "write random dense class encodings");
    std::size_t classes = 2, samples = 500;
    std::vector<std::size_t> n_values{10};
    sample->add_option("--classes", classes, "number of classes")->required();
    sample->add_option("--n-values", n_values, "encoding dimensions")->delimiter(',');
    sample->add_option("--samples", samples, "encodings per dimension");
    sample->add_option("--seed", seed, "random seed");
    sample->add_option("--out", out, "output directory")->required();

    // topology
    auto* topo = app.add_subcommand("topology", "enumerate decision-region topologies");
    std::string family = "max", convention = "ceiling", topo_encoding, pgm;
    std::vector<double> thetas;
    std::size_t resolution = 0, dim = 2, draws = 0;
    double theta_max = 2.0;
    topo->add_option("--family", family, "max, softmax, distance or dense");
    topo->add_option("--classes", classes, "number of classes");
    topo->add_option("--dim", dim, "likelihood space dimension for the dense family (2 or 3)");
    topo->add_option("--theta", thetas, "thresholds (default 0.05..0.95 step 0.05)")->delimiter(',');
    topo->add_option("--resolution", resolution, "cells per axis (default 256 in 2D, 64 in 3D)");
    topo->add_option("--convention", convention, "distance threshold reading: ceiling or similarity")
        ->check(CLI::IsMember({"ceiling", "similarity"}));
    topo->add_option("--encoding", topo_encoding, "dense family: fixed class encoding file");
    topo->add_option("--samples", draws, "dense family: random (encoding, theta) draws");
    topo->add_option("--theta-max", theta_max, "upper bound of random theta draws");
    topo->add_option("--seed", seed, "random seed");
    topo->add_option("--pgm", pgm, "write the labelled grid of the first theta as a PGM raster");
    topo->add_option("--out", out, "write the JSON result here");

    // ces
    auto* ces = app.add_subcommand("ces", "class encoding search");
    CesConfig ces_cfg;
    std::string ces_encoding;
    std::size_t ces_n = 10;
    bool no_restart = false;
    std::optional<double> ces_theta;
    add_data_options(ces, data);
    add_net_options(ces, net);
    ces->add_option("--encoding", ces_encoding, "initial dense encoding file (default: random R(n))");
    ces->add_option("--n", ces_n, "dimension of the random initial encoding");
    ces->add_option("--iterations", ces_cfg.iterations, "search iterations");
    ces->add_option("--lambda", ces_cfg.lambda, "repulsion step");
    ces->add_option("--inner-epochs", ces_cfg.inner_epochs, "training epochs per iteration (0: default)");
    ces->add_flag("--no-restart", no_restart, "carry network weights across iterations");
    ces->add_flag("--attraction", ces_cfg.attraction_enabled, "pull class vectors toward projection means");
    ces->add_option("--theta", ces_theta, "measure FAR at this fixed distance instead of the EER threshold");
    ces->add_option("--seed", seed, "random seed");
    ces->add_option("--out", out, "output directory for trace.csv and best encodings")->required();

    // report
    auto* report = app.add_subcommand("report", "run the encoding comparison and print a results table");
    std::vector<std::string> algos{"one_hot_softmax", "one_hot_distance", "random_dense"};
    std::string emit = "markdown", report_encoding;
    std::size_t threads = 0;
    add_data_options(report, data);
    add_net_options(report, net);
    report->add_option("--algo", algos, "algorithms")->delimiter(',');
    report->add_option("--n-values", n_values, "dimensions N of R(N)")->delimiter(',');
    report->add_option("--samples", samples, "random encodings per N");
    report->add_option("--encoding", report_encoding, "class encoding file for loaded_encoding");
    report->add_flag("--one-hot-distance-mse", od_mse, "train the 1-hot distance network with MSE");
    report->add_option("--threads", threads, "worker threads (0: all cores)");
    report->add_option("--seed", seed, "random seed");
    report->add_option("--emit", emit, "csv or markdown")->check(CLI::IsMember({"csv", "markdown"}));
    report->add_option("--out", out, "write the table here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*train) {
        const Loaded l = load_data(data);
        const Algorithm algo = parse_algorithm(train_algo);
        ClassEncodingSet enc = one_hot_encoding_set(l.data.num_classes);
        if (algo == Algorithm::random_dense) enc = random_encoding_set(l.data.num_classes, train_n, seed);
        if (algo == Algorithm::loaded_encoding) {
            if (train_encoding.empty()) throw std::invalid_argument("loaded_encoding needs --encoding");
            enc = load_encoding_set(train_encoding);
        }
        NetworkConfig cfg = network_from(net);
        cfg.input_dim = l.data.dim;
        cfg.output_dim = enc.dim();
        cfg.seed = seed;
        cfg.loss = algo == Algorithm::one_hot_softmax || (algo == Algorithm::one_hot_distance && !od_mse)
                       ? LossKind::cross_entropy
                       : LossKind::mse;
        const auto model = train_classifier(l.data.train, enc, cfg);
        if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
        save_model(model, out);
        if (enc.family() == EncodingFamily::dense) save_encoding_set(enc, out + ".enc");
        std::cout << "trained " << to_string(algo) << " (" << l.data.train.size() << " samples, final loss "
                  << fmt4(model.loss_history().back()) << ") -> " << out << "\n";
        return 0;
    }

    if (*evaluate_cmd) {
        const Loaded l = load_data(data);
        const auto model = load_model(model_path);
        const Algorithm algo = parse_algorithm(eval_algo);
        std::optional<ClassEncodingSet> enc;
        if (rule_for(algo) == DecisionRule::dense) {
            const std::string p = eval_encoding.empty() ? model_path + ".enc" : eval_encoding;
            enc = load_encoding_set(p);
        }
        const auto rule = rule_for(algo);
        const auto rep = evaluate(model, l.data.test, rule, enc ? &*enc : nullptr);
        std::cout << "eer " << fmt4(rep.eer) << "\ntheta " << format_double(rep.theta_star) << "\nfar "
                  << fmt4(rep.far_at_theta) << "\nfrr " << fmt4(rep.frr_at_theta) << "\niser " << fmt4(rep.iser)
                  << "\n";
        if (theta) {
            const auto scored = score_samples(model, l.data.test, rule, enc ? &*enc : nullptr);
            const auto pt = rates_at(scored, *theta, semantics_of(rule));
            std::cout << "far@" << format_double(*theta) << " " << fmt4(pt.far) << "\nfrr@" << format_double(*theta)
                      << " " << fmt4(pt.frr) << "\n";
        }
        if (!out.empty()) write_text(out, curve_csv(rep));
        return 0;
    }

    if (*sample) {
        if (classes < 2) throw std::invalid_argument("--classes must be at least 2");
        fs::create_directories(out);
        std::size_t written = 0;
        for (std::size_t n : n_values)
            for (std::size_t k = 1; k <= samples; ++k) {
                save_encoding_set(random_encoding_set(classes, n, seed + k),
                                  fs::path(out) / ("r" + std::to_string(n) + "_" + std::to_string(k) + ".enc"));
                ++written;
            }
        std::cout << "wrote " << written << " encodings to " << out << "\n";
        return 0;
    }

    if (*topo) {
        const DecisionFamily fam = parse_decision_family(family);
        FamilyDescriptor fd{fam, classes,
                            convention == "similarity" ? DistanceConvention::similarity : DistanceConvention::ceiling};
        const std::size_t space_dim = fam == DecisionFamily::dense ? dim : classes;
        GridSpec grid = GridSpec::defaults(space_dim);
        if (resolution) grid.resolution = resolution;
        grid.validate();
        if (thetas.empty()) thetas = default_sweep();

        std::map<TopologySignature, std::size_t> found;
        std::optional<LabeledGrid> first;
        if (fam != DecisionFamily::dense) {
            for (double th : thetas) {
                auto g = label_grid(make_decider(fd, th), grid, classes);
                auto s = signature_from_grid(g);
                if (!first) first = std::move(g);
                if (s.all_classes_present()) ++found[s];
            }
        } else {
            std::vector<EncodingDraw> ds;
            if (!topo_encoding.empty()) {
                const auto enc = load_encoding_set(topo_encoding);
                for (double th : thetas) ds.push_back({enc, th});
            } else {
                if (draws == 0) throw std::invalid_argument("dense family needs --encoding or --samples");
                Rng rng(seed);
                for (std::size_t i = 0; i < draws; ++i) {
                    auto enc = random_encoding_set(classes, dim, rng.next_u64());
                    ds.push_back({std::move(enc), rng.uniform(0.0, theta_max)});
                }
            }
            first = label_grid(make_decider(fd, ds.front().theta, &ds.front().encoding), grid, classes);
            found = collect_signatures(fd, ds, grid);
        }
        if (!pgm.empty() && first) write_text(pgm, grid_to_pgm(*first));

        nlohmann::ordered_json j;
        j["family"] = to_string(fam);
        j["classes"] = classes;
        j["resolution"] = grid.resolution;
        j["distinct"] = found.size();
        j["signatures"] = nlohmann::ordered_json::array();
        for (const auto& [s, n] : found)
            j["signatures"].push_back({{"occurrences", n}, {"signature", nlohmann::ordered_json::parse(s.to_json())}});
        write_text(out, j.dump(2) + "\n");
        return 0;
    }

    if (*ces) {
        const Loaded l = load_data(data);
        const ClassEncodingSet initial = ces_encoding.empty()
                                             ? random_encoding_set(l.data.num_classes, ces_n, seed)
                                             : load_encoding_set(ces_encoding);
        ces_cfg.seed = seed;
        ces_cfg.restart_weights = !no_restart;
        ces_cfg.fixed_theta = ces_theta;
        ces_cfg.network = network_from(net);
        const auto trace = ces_search(l.data.train, l.data.test, initial, ces_cfg);
        write_trace(trace, out);
        std::cout << "iterations " << trace.records.size() << "\nbest far " << fmt4(trace.best_far.value) << " @ "
                  << trace.best_far.iteration << "\nbest iser " << fmt4(trace.best_iser.value) << " @ "
                  << trace.best_iser.iteration << "\n";
        if (trace.aborted) {
            std::cerr << "training diverged at " << *trace.aborted << "\n";
            return 3;
        }
        return 0;
    }

    if (*report) {
        const RawDataset raw = load_raw(data);
        std::optional<EmbeddingTable> table;
        if (!data.embeddings.empty()) table = load_embedding_file(data.embeddings);
        ExperimentConfig cfg;
        cfg.algorithms.clear();
        for (const auto& a : algos) cfg.algorithms.push_back(parse_algorithm(a));
        cfg.n_values = n_values;
        cfg.samples_per_n = samples;
        cfg.network = network_from(net);
        cfg.seed = seed;
        cfg.one_hot_distance_mse = od_mse;
        cfg.threads = threads;
        if (!report_encoding.empty()) cfg.loaded_encoding = load_encoding_set(report_encoding);
        const auto result = run_experiment(raw, cfg, EmbeddingSource{table ? &*table : nullptr, data.feat_dim});
        write_text(out, emit_report(result, parse_report_format(emit)));
        return 0;
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
