#pragma once

#include "oosenc/encodings.hpp"
#include "oosenc/model.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oosenc {

// Reserved label for out-of-scope rows after normalisation.
inline const std::string kOosLabelName = "__oos__";

// Marker HINT3 uses for out-of-scope test rows.
inline const std::string kHint3OosMarker = "NO_NODES_DETECTED";

struct LabeledText {
    std::string text;
    std::string label;  // kOosLabelName for out-of-scope

    bool operator==(const LabeledText&) const = default;
};

struct RawDataset {
    std::vector<LabeledText> train;
    std::vector<LabeledText> test;
    std::vector<std::string> class_names;  // first-appearance order in train

    // Throws FormatError if OOS rows appear in train or test labels are unknown.
    void validate() const;
    std::size_t class_index(const std::string& label) const;
};

// Builds class_names from train, normalises OOS markers, validates.
RawDataset make_dataset(std::vector<LabeledText> train, std::vector<LabeledText> test,
                        const std::string& oos_marker = kOosLabelName);

// One HINT3 CSV (header with sentence,label columns).
std::vector<LabeledText> read_hint3_csv(const std::filesystem::path& path, const std::string& oos_marker);

RawDataset parse_hint3(const std::filesystem::path& train_csv, const std::filesystem::path& test_csv,
                       const std::string& oos_marker = kHint3OosMarker);
// Directory holding train.csv and test.csv.
RawDataset parse_hint3(const std::filesystem::path& dir, const std::string& oos_marker = kHint3OosMarker);

struct Clinc150Options {
    bool require_oos = true;
    bool include_validation = false;  // fold val / oos_val into test
};

RawDataset parse_clinc150(const std::filesystem::path& path, Clinc150Options options = {});
RawDataset parse_clinc150_text(const std::string& json_text, Clinc150Options options = {});

// Normalised dataset: JSON Lines {"text","label","split"} with split in
// {train,test}; OOS rows carry kOosLabelName.
std::string to_jsonl(const RawDataset& data);
RawDataset parse_jsonl_text(const std::string& text);
RawDataset parse_jsonl(const std::filesystem::path& path);

// Embedding file: "count dim" header, then "id<TAB>v1 v2 ..." per record.
// Ids are the utterance texts themselves.
struct EmbeddingTable {
    std::size_t dim = 0;
    std::map<std::string, Vector> vectors;
};

EmbeddingTable load_embedding_file(const std::filesystem::path& path);
EmbeddingTable parse_embedding_text(const std::string& text);
std::string serialize_embeddings(const EmbeddingTable& table);
void save_embedding_file(const EmbeddingTable& table, const std::filesystem::path& path);

// Source of input vectors: an embedding table if present, else the hash featurizer.
struct EmbeddingSource {
    const EmbeddingTable* table = nullptr;
    std::size_t feat_dim = 512;

    std::size_t dim() const { return table ? table->dim : feat_dim; }
    Vector embed(const std::string& text) const;
};

struct EmbeddedDataset {
    std::vector<EmbeddedSample> train;
    std::vector<EmbeddedSample> test;
    std::size_t num_classes = 0;
    std::size_t dim = 0;
};

EmbeddedDataset embed_dataset(const RawDataset& data, const EmbeddingSource& source);

}  // namespace oosenc
