#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mangascript/chapter.hpp"
#include "mangascript/embedding.hpp"
#include "mangascript/error.hpp"

namespace mangascript {

inline constexpr double kDefaultEta = 0.75;
inline constexpr const char* kOtherName = "other";

struct BankCharacter {
    std::string name;
    std::vector<Embedding> exemplars;  // unit norm
};

struct CharacterBank {
    std::vector<BankCharacter> characters;
    double eta = kDefaultEta;

    std::size_t size() const { return characters.size(); }
};

// Mean of the exemplars, renormalized. A single exemplar is returned as-is.
inline Embedding representative_embedding(const BankCharacter& character) {
    if (character.exemplars.empty()) throw Error("character '" + character.name + "' has no exemplars");
    if (character.exemplars.size() == 1) return character.exemplars.front();
    Embedding mean(character.exemplars.front().size(), 0.0);
    for (const auto& e : character.exemplars) {
        if (e.size() != mean.size()) throw Error("embedding dimension mismatch");
        for (std::size_t i = 0; i < e.size(); ++i) mean[i] += e[i];
    }
    for (double& x : mean) x /= static_cast<double>(character.exemplars.size());
    if (norm(mean) < 1e-12) throw Error("degenerate exemplar set for '" + character.name + "'");
    return normalized(mean);
}

// Row-major n x (k+1) matrix; the last column is the "other" cost.
class CostMatrix {
public:
    CostMatrix() = default;
    CostMatrix(std::size_t rows, std::size_t named_columns, double eta)
        : rows_(rows), cols_(named_columns + 1), eta_(eta), data_(rows * (named_columns + 1), 0.0) {
        for (std::size_t i = 0; i < rows_; ++i) data_[i * cols_ + cols_ - 1] = eta;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t named_columns() const { return cols_ - 1; }
    std::size_t other_column() const { return cols_ - 1; }
    double eta() const { return eta_; }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 1;
    double eta_ = kDefaultEta;
    std::vector<double> data_;
};

inline CostMatrix build_cost_matrix(std::span<const Embedding> crops, const CharacterBank& bank) {
    std::vector<Embedding> reps;
    reps.reserve(bank.size());
    for (const auto& c : bank.characters) reps.push_back(representative_embedding(c));

    CostMatrix d(crops.size(), bank.size(), bank.eta);
    for (std::size_t i = 0; i < crops.size(); ++i) {
        for (std::size_t j = 0; j < reps.size(); ++j) {
            if (crops[i].size() != reps[j].size()) throw Error("embedding dimension mismatch");
            d(i, j) = distance(crops[i], reps[j]);
        }
    }
    return d;
}

inline CostMatrix build_cost_matrix(std::span<const CharacterNode> crops, const CharacterBank& bank) {
    std::vector<Embedding> es;
    es.reserve(crops.size());
    for (const auto& c : crops) es.push_back(c.embedding);
    return build_cost_matrix(std::span<const Embedding>(es), bank);
}

// Member with the smallest mean Euclidean distance to the other members
// (equivalently the highest mean similarity). Ties go to the lowest index.
inline std::size_t optimal_exemplar_index(std::span<const Embedding> members) {
    if (members.empty()) throw Error("optimal exemplar of an empty set");
    if (members.size() == 1) return 0;
    std::size_t best = 0;
    double best_total = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < members.size(); ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < members.size(); ++j) {
            if (j != i) total += distance(members[i], members[j]);
        }
        if (total < best_total) {
            best_total = total;
            best = i;
        }
    }
    return best;
}

inline Embedding optimal_exemplar(std::span<const Embedding> members) {
    return members[optimal_exemplar_index(members)];
}

inline CharacterBank bank_from_json(const nlohmann::json& doc, std::optional<std::size_t> expected_dim = {}) {
    CharacterBank bank;
    try {
        if (!doc.is_object()) throw Error("malformed bank: top level must be an object");
        if (doc.contains("eta")) bank.eta = doc.at("eta").get<double>();
        if (!std::isfinite(bank.eta) || bank.eta <= 0.0) throw Error("bank eta must be positive");
        std::set<std::string> names;
        for (const auto& cj : doc.at("characters")) {
            BankCharacter c;
            c.name = cj.at("name").get<std::string>();
            if (c.name.empty()) throw Error("empty character name in bank");
            if (c.name == kOtherName) throw Error("'other' is a reserved name");
            if (!names.insert(c.name).second) throw Error("duplicate bank name '" + c.name + "'");
            for (const auto& ej : cj.at("exemplars")) {
                const auto raw = ej.get<std::vector<double>>();
                if (expected_dim && raw.size() != *expected_dim) {
                    throw Error("embedding dimension mismatch for bank character '" + c.name + "'");
                }
                for (double x : raw) {
                    if (!std::isfinite(x)) throw Error("non-finite exemplar component for '" + c.name + "'");
                }
                c.exemplars.push_back(normalized(raw));
            }
            if (c.exemplars.empty()) throw Error("character '" + c.name + "' has no exemplars");
            if (!bank.characters.empty() && c.exemplars.front().size() != bank.characters.front().exemplars.front().size()) {
                throw Error("embedding dimension mismatch within bank");
            }
            bank.characters.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed bank: ") + e.what());
    }
    return bank;
}

inline nlohmann::json bank_to_json(const CharacterBank& bank) {
    nlohmann::json doc;
    doc["eta"] = bank.eta;
    doc["characters"] = nlohmann::json::array();
    for (const auto& c : bank.characters) {
        doc["characters"].push_back({{"name", c.name}, {"exemplars", c.exemplars}});
    }
    return doc;
}

inline CharacterBank parse_bank(const std::filesystem::path& path, std::optional<std::size_t> expected_dim = {}) {
    if (!std::filesystem::exists(path)) throw Error("missing file '" + path.string() + "'");
    return bank_from_json(read_json_file(path), expected_dim);
}

}  // namespace mangascript
