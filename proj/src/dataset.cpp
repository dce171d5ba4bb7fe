#include "oosenc/dataset.hpp"

#include "oosenc/common.hpp"
#include "oosenc/featurize.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace oosenc {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// RFC 4180 style: quoted fields may hold commas, newlines and "" escapes.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
            continue;
        }
        if (ch == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (ch == ',') {
            row.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (ch == '\n' || ch == '\r') {
            if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            row.push_back(std::move(field));
            field.clear();
            field_started = false;
            if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
            row.clear();
        } else {
            field += ch;
            field_started = true;
        }
    }
    if (quoted) throw FormatError("csv: unterminated quoted field");
    if (field_started || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string strip_bom(std::string s) {
    if (s.rfind("\xEF\xBB\xBF", 0) == 0) s.erase(0, 3);
    return s;
}

}  // namespace

void RawDataset::validate() const {
    std::set<std::string> known(class_names.begin(), class_names.end());
    if (known.size() != class_names.size()) throw FormatError("duplicate class names");
    for (const auto& row : train) {
        if (row.label == kOosLabelName) throw FormatError("out-of-scope row in training split: '" + row.text + "'");
        if (!known.count(row.label)) throw FormatError("training label '" + row.label + "' not in class list");
    }
    for (const auto& row : test)
        if (row.label != kOosLabelName && !known.count(row.label))
            throw FormatError("test label '" + row.label + "' does not appear in training data");
}

std::size_t RawDataset::class_index(const std::string& label) const {
    if (label == kOosLabelName) return kOosLabel;
    const auto it = std::find(class_names.begin(), class_names.end(), label);
    if (it == class_names.end()) throw FormatError("unknown label '" + label + "'");
    return static_cast<std::size_t>(it - class_names.begin());
}

RawDataset make_dataset(std::vector<LabeledText> train, std::vector<LabeledText> test,
                        const std::string& oos_marker) {
    RawDataset d;
    auto normalise = [&](LabeledText& row) {
        if (row.label == oos_marker) row.label = kOosLabelName;
    };
    for (auto& row : train) normalise(row);
    for (auto& row : test) normalise(row);
    for (const auto& row : train)
        if (row.label != kOosLabelName &&
            std::find(d.class_names.begin(), d.class_names.end(), row.label) == d.class_names.end())
            d.class_names.push_back(row.label);
    d.train = std::move(train);
    d.test = std::move(test);
    d.validate();
    if (d.class_names.size() < 2) throw FormatError("dataset needs at least 2 in-scope classes");
    return d;
}

std::vector<LabeledText> read_hint3_csv(const std::filesystem::path& path, const std::string& oos_marker) {
    const auto rows = parse_csv(strip_bom(read_file(path)));
    if (rows.empty()) throw FormatError(path.string() + ": empty csv");
    const auto& header = rows.front();
    auto col = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw FormatError(path.string() + ": missing column '" + name + "'");
    };
    const std::size_t text_col = col("sentence");
    const std::size_t label_col = col("label");
    std::vector<LabeledText> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() <= std::max(text_col, label_col))
            throw FormatError(path.string() + ": row " + std::to_string(r + 1) + " has too few columns");
        LabeledText t{row[text_col], row[label_col]};
        if (t.label == oos_marker) t.label = kOosLabelName;
        out.push_back(std::move(t));
    }
    return out;
}

RawDataset parse_hint3(const std::filesystem::path& train_csv, const std::filesystem::path& test_csv,
                       const std::string& oos_marker) {
    return make_dataset(read_hint3_csv(train_csv, oos_marker), read_hint3_csv(test_csv, oos_marker));
}

RawDataset parse_hint3(const std::filesystem::path& dir, const std::string& oos_marker) {
    if (!std::filesystem::is_directory(dir))
        throw FormatError(dir.string() + ": expected a directory with train.csv and test.csv");
    return parse_hint3(dir / "train.csv", dir / "test.csv", oos_marker);
}

RawDataset parse_clinc150_text(const std::string& json_text, Clinc150Options options) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("clinc150: malformed json: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("clinc150: top level must be an object");
    auto split = [&](const std::string& name, bool required) {
        std::vector<LabeledText> out;
        if (!j.contains(name)) {
            if (required) throw FormatError("clinc150: missing split '" + name + "'");
            return out;
        }
        const auto& arr = j.at(name);
        if (!arr.is_array()) throw FormatError("clinc150: split '" + name + "' is not an array");
        for (const auto& item : arr) {
            if (!item.is_array() || item.size() != 2 || !item[0].is_string() || !item[1].is_string())
                throw FormatError("clinc150: entries of '" + name + "' must be [text, label]");
            out.push_back({item[0].get<std::string>(), item[1].get<std::string>()});
        }
        return out;
    };
    std::vector<LabeledText> train = split("train", true);
    std::vector<LabeledText> test = split("test", true);
    std::vector<LabeledText> oos = split("oos_test", options.require_oos);
    if (options.require_oos && oos.empty()) throw FormatError("clinc150: oos_test is empty");
    if (options.include_validation) {
        auto val = split("val", false);
        auto oos_val = split("oos_val", false);
        test.insert(test.end(), val.begin(), val.end());
        oos.insert(oos.end(), oos_val.begin(), oos_val.end());
    }
    for (auto& row : oos) row.label = kOosLabelName;
    test.insert(test.end(), oos.begin(), oos.end());
    return make_dataset(std::move(train), std::move(test), "oos");
}

RawDataset parse_clinc150(const std::filesystem::path& path, Clinc150Options options) {
    return parse_clinc150_text(read_file(path), options);
}

std::string to_jsonl(const RawDataset& data) {
    std::string out;
    auto emit = [&](const LabeledText& row, const char* split) {
        nlohmann::ordered_json j;
        j["text"] = row.text;
        j["label"] = row.label;
        j["split"] = split;
        out += j.dump() + "\n";
    };
    for (const auto& row : data.train) emit(row, "train");
    for (const auto& row : data.test) emit(row, "test");
    return out;
}

RawDataset parse_jsonl_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<LabeledText> train, test;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            LabeledText row{j.at("text").get<std::string>(), j.at("label").get<std::string>()};
            const std::string split = j.value("split", "train");
            if (split == "train")
                train.push_back(std::move(row));
            else if (split == "test")
                test.push_back(std::move(row));
            else
                throw FormatError("unknown split '" + split + "'");
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("jsonl line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return make_dataset(std::move(train), std::move(test));
}

RawDataset parse_jsonl(const std::filesystem::path& path) { return parse_jsonl_text(read_file(path)); }

EmbeddingTable parse_embedding_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("embedding file: missing 'count dim' header");
    std::istringstream hdr(line);
    long long count = 0, dim = 0;
    if (!(hdr >> count >> dim) || count < 0 || dim < 1) throw FormatError("embedding file: bad 'count dim' header");
    EmbeddingTable table;
    table.dim = static_cast<std::size_t>(dim);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw FormatError("embedding file line " + std::to_string(lineno) + ": no TAB");
        std::string id = line.substr(0, tab);
        std::istringstream vals(line.substr(tab + 1));
        Vector v;
        std::string tok;
        while (vals >> tok) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw FormatError("embedding file line " + std::to_string(lineno) + ": bad number '" + tok + "'");
            }
        }
        if (v.size() != table.dim)
            throw FormatError("embedding file line " + std::to_string(lineno) + ": dimension " +
                              std::to_string(v.size()) + ", expected " + std::to_string(table.dim));
        if (!table.vectors.emplace(std::move(id), std::move(v)).second)
            throw FormatError("embedding file line " + std::to_string(lineno) + ": duplicate id");
    }
    if (table.vectors.size() != static_cast<std::size_t>(count))
        throw FormatError("embedding file: header declares " + std::to_string(count) + " records, found " +
                          std::to_string(table.vectors.size()));
    return table;
}

EmbeddingTable load_embedding_file(const std::filesystem::path& path) { return parse_embedding_text(read_file(path)); }

std::string serialize_embeddings(const EmbeddingTable& table) {
    std::string out = std::to_string(table.vectors.size()) + " " + std::to_string(table.dim) + "\n";
    for (const auto& [id, v] : table.vectors) {
        if (id.find('\t') != std::string::npos || id.find('\n') != std::string::npos)
            throw FormatError("embedding id contains TAB or newline");
        out += id + "\t";
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ' ';
            out += format_double(v[i]);
        }
        out += '\n';
    }
    return out;
}

void save_embedding_file(const EmbeddingTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << serialize_embeddings(table);
}

Vector EmbeddingSource::embed(const std::string& text) const {
    if (!table) return hash_featurize(text, feat_dim);
    const auto it = table->vectors.find(text);
    if (it == table->vectors.end()) throw FormatError("no embedding for text '" + text + "'");
    return it->second;
}

EmbeddedDataset embed_dataset(const RawDataset& data, const EmbeddingSource& source) {
    EmbeddedDataset out;
    out.num_classes = data.class_names.size();
    out.dim = source.dim();
    for (const auto& row : data.train) {
        const std::size_t label = data.class_index(row.label);
        if (label == kOosLabel) throw FormatError("out-of-scope row in training split");
        out.train.push_back({source.embed(row.text), label});
    }
    for (const auto& row : data.test) out.test.push_back({source.embed(row.text), data.class_index(row.label)});
    return out;
}

}  // namespace oosenc
