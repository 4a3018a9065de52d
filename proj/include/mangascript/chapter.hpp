#pragma once

// Chapter / page graph model and the JSON chapter format.
//
// A chapter file carries, per page, the detector outputs for one manga page:
// character crops (with embeddings), text boxes (with OCR content and an
// essential-ness score), speech-bubble tails, panels, and three edge-score
// maps. Everything downstream treats a parsed Chapter as immutable.

#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mangascript/embedding.hpp"
#include "mangascript/error.hpp"
#include "mangascript/geometry.hpp"

namespace mangascript {

enum class TextCategory {
    action_sound,
    background_info,
    conversational,
    internal_thought,
    interjection_explicit,
    interjection_implicit,
    editorial_note,
    scene_text,
    other,
};

inline constexpr std::array<TextCategory, 9> kAllTextCategories = {
    TextCategory::action_sound,          TextCategory::background_info,
    TextCategory::conversational,        TextCategory::internal_thought,
    TextCategory::interjection_explicit, TextCategory::interjection_implicit,
    TextCategory::editorial_note,        TextCategory::scene_text,
    TextCategory::other,
};

// Dialogue-bearing categories go into the transcript; sound effects, editorial
// notes, scene text and "others" do not.
constexpr bool category_to_essential(TextCategory c) {
    switch (c) {
        case TextCategory::background_info:
        case TextCategory::conversational:
        case TextCategory::internal_thought:
        case TextCategory::interjection_explicit:
        case TextCategory::interjection_implicit:
            return true;
        case TextCategory::action_sound:
        case TextCategory::editorial_note:
        case TextCategory::scene_text:
        case TextCategory::other:
            return false;
    }
    return false;
}

inline std::string_view to_string(TextCategory c) {
    switch (c) {
        case TextCategory::action_sound: return "action_sound";
        case TextCategory::background_info: return "background_info";
        case TextCategory::conversational: return "conversational";
        case TextCategory::internal_thought: return "internal_thought";
        case TextCategory::interjection_explicit: return "interjection_explicit";
        case TextCategory::interjection_implicit: return "interjection_implicit";
        case TextCategory::editorial_note: return "editorial_note";
        case TextCategory::scene_text: return "scene_text";
        case TextCategory::other: return "other";
    }
    return "other";
}

inline TextCategory parse_text_category(std::string_view s) {
    for (TextCategory c : kAllTextCategories) {
        if (to_string(c) == s) return c;
    }
    throw Error("unknown text category '" + std::string(s) + "'");
}

struct CharacterNode {
    std::string id;
    std::size_t page_index = 0;
    BoundingBox bbox;
    Embedding embedding;
    std::optional<std::string> gt_name;
    double score = 1.0;  // detection confidence, only used for box matching

    friend bool operator==(const CharacterNode&, const CharacterNode&) = default;
};

struct TextNode {
    std::string id;
    std::size_t page_index = 0;
    BoundingBox bbox;
    std::string content;
    double essential_score = 0.0;
    std::optional<TextCategory> category;
    std::optional<bool> gt_essential;
    double score = 1.0;

    friend bool operator==(const TextNode&, const TextNode&) = default;
};

struct TailNode {
    std::string id;
    std::size_t page_index = 0;
    BoundingBox bbox;
    double score = 1.0;

    friend bool operator==(const TailNode&, const TailNode&) = default;
};

struct PanelNode {
    std::string id;
    std::size_t page_index = 0;
    BoundingBox bbox;

    friend bool operator==(const PanelNode&, const PanelNode&) = default;
};

using IdPair = std::pair<std::string, std::string>;

inline IdPair unordered_pair(const std::string& a, const std::string& b) {
    return a < b ? IdPair{a, b} : IdPair{b, a};
}

// Sparse edge scores. Absent entries read as 0. char_char keys are stored
// in (min, max) order so lookups are symmetric.
struct EdgeSet {
    std::map<IdPair, double> text_char;
    std::map<IdPair, double> text_tail;
    std::map<IdPair, double> char_char;

    double text_char_score(const std::string& text, const std::string& character) const {
        auto it = text_char.find({text, character});
        return it == text_char.end() ? 0.0 : it->second;
    }
    double text_tail_score(const std::string& text, const std::string& tail) const {
        auto it = text_tail.find({text, tail});
        return it == text_tail.end() ? 0.0 : it->second;
    }
    double char_char_score(const std::string& a, const std::string& b) const {
        auto it = char_char.find(unordered_pair(a, b));
        return it == char_char.end() ? 0.0 : it->second;
    }

    friend bool operator==(const EdgeSet&, const EdgeSet&) = default;
};

struct Page {
    int index = 0;  // label from the file, used for display only
    std::vector<CharacterNode> characters;
    std::vector<TextNode> texts;
    std::vector<TailNode> tails;
    std::vector<PanelNode> panels;
    EdgeSet edges;

    friend bool operator==(const Page&, const Page&) = default;
};

struct Chapter {
    std::size_t embedding_dim = 0;
    std::vector<Page> pages;

    std::size_t character_count() const {
        std::size_t n = 0;
        for (const auto& p : pages) n += p.characters.size();
        return n;
    }

    // All character crops in page order, then in-page order.
    std::vector<CharacterNode> all_characters() const {
        std::vector<CharacterNode> out;
        out.reserve(character_count());
        for (const auto& p : pages) out.insert(out.end(), p.characters.begin(), p.characters.end());
        return out;
    }

    friend bool operator==(const Chapter&, const Chapter&) = default;
};

namespace detail {

inline BoundingBox box_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 4) throw Error("malformed document: bbox must be [x1,y1,x2,y2]");
    BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
    if (!b.valid()) throw Error("invalid bounding box");
    return b;
}

inline nlohmann::json box_to_json(const BoundingBox& b) { return nlohmann::json::array({b.x1, b.y1, b.x2, b.y2}); }

inline double unit_score(const nlohmann::json& j, std::string_view what) {
    const double s = j.get<double>();
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
        throw Error("score outside [0,1] in " + std::string(what));
    }
    return s;
}

inline double optional_score(const nlohmann::json& node) {
    if (!node.contains("score")) return 1.0;
    return unit_score(node.at("score"), "detection score");
}

}  // namespace detail

inline Chapter chapter_from_json(const nlohmann::json& doc) {
    Chapter ch;
    try {
        if (!doc.is_object()) throw Error("malformed document: top level must be an object");
        const long dim = doc.at("embedding_dim").get<long>();
        if (dim <= 0) throw Error("malformed document: embedding_dim must be positive");
        ch.embedding_dim = static_cast<std::size_t>(dim);

        std::set<std::string> all_ids;
        auto claim_id = [&](const std::string& id) {
            if (id.empty()) throw Error("empty node id");
            if (!all_ids.insert(id).second) throw Error("duplicate id '" + id + "'");
        };

        const auto& pages = doc.at("pages");
        if (!pages.is_array()) throw Error("malformed document: pages must be an array");
        for (std::size_t pi = 0; pi < pages.size(); ++pi) {
            const auto& pj = pages[pi];
            Page page;
            page.index = pj.contains("index") ? pj.at("index").get<int>() : static_cast<int>(pi);

            std::set<std::string> chars, texts, tails;
            for (const auto& cj : pj.value("characters", nlohmann::json::array())) {
                CharacterNode c;
                c.id = cj.at("id").get<std::string>();
                claim_id(c.id);
                c.page_index = pi;
                c.bbox = detail::box_from_json(cj.at("bbox"));
                const auto raw = cj.at("embedding").get<std::vector<double>>();
                if (raw.size() != ch.embedding_dim) {
                    throw Error("embedding dimension mismatch for '" + c.id + "'");
                }
                for (double x : raw) {
                    if (!std::isfinite(x)) throw Error("non-finite embedding component for '" + c.id + "'");
                }
                c.embedding = normalized(raw);
                if (cj.contains("gt_name")) c.gt_name = cj.at("gt_name").get<std::string>();
                c.score = detail::optional_score(cj);
                chars.insert(c.id);
                page.characters.push_back(std::move(c));
            }
            for (const auto& tj : pj.value("texts", nlohmann::json::array())) {
                TextNode t;
                t.id = tj.at("id").get<std::string>();
                claim_id(t.id);
                t.page_index = pi;
                t.bbox = detail::box_from_json(tj.at("bbox"));
                t.content = tj.value("content", std::string{});
                t.essential_score = detail::unit_score(tj.at("essential_score"), "essential_score");
                if (tj.contains("category")) t.category = parse_text_category(tj.at("category").get<std::string>());
                if (tj.contains("gt_essential")) t.gt_essential = tj.at("gt_essential").get<bool>();
                t.score = detail::optional_score(tj);
                texts.insert(t.id);
                page.texts.push_back(std::move(t));
            }
            for (const auto& lj : pj.value("tails", nlohmann::json::array())) {
                TailNode l;
                l.id = lj.at("id").get<std::string>();
                claim_id(l.id);
                l.page_index = pi;
                l.bbox = detail::box_from_json(lj.at("bbox"));
                l.score = detail::optional_score(lj);
                tails.insert(l.id);
                page.tails.push_back(std::move(l));
            }
            for (const auto& qj : pj.value("panels", nlohmann::json::array())) {
                PanelNode q;
                q.id = qj.at("id").get<std::string>();
                claim_id(q.id);
                q.page_index = pi;
                q.bbox = detail::box_from_json(qj.at("bbox"));
                page.panels.push_back(std::move(q));
            }

            // Endpoints must live on this page; ids on other pages are rejected too.
            auto require = [](const std::set<std::string>& s, const std::string& id) {
                if (!s.contains(id)) throw Error("unknown edge endpoint '" + id + "'");
            };
            const auto edges = pj.value("edges", nlohmann::json::object());
            for (const auto& e : edges.value("text_char", nlohmann::json::array())) {
                const auto t = e.at(0).get<std::string>();
                const auto c = e.at(1).get<std::string>();
                require(texts, t);
                require(chars, c);
                page.edges.text_char[{t, c}] = detail::unit_score(e.at(2), "text_char edge");
            }
            for (const auto& e : edges.value("text_tail", nlohmann::json::array())) {
                const auto t = e.at(0).get<std::string>();
                const auto l = e.at(1).get<std::string>();
                require(texts, t);
                require(tails, l);
                page.edges.text_tail[{t, l}] = detail::unit_score(e.at(2), "text_tail edge");
            }
            for (const auto& e : edges.value("char_char", nlohmann::json::array())) {
                const auto a = e.at(0).get<std::string>();
                const auto b = e.at(1).get<std::string>();
                require(chars, a);
                require(chars, b);
                if (a == b) throw Error("char_char self-edge on '" + a + "'");
                const double s = detail::unit_score(e.at(2), "char_char edge");
                auto [it, inserted] = page.edges.char_char.emplace(unordered_pair(a, b), s);
                if (!inserted && it->second != s) {
                    throw Error("conflicting char_char scores for '" + a + "', '" + b + "'");
                }
            }
            ch.pages.push_back(std::move(page));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed document: ") + e.what());
    }
    return ch;
}

inline nlohmann::json chapter_to_json(const Chapter& ch) {
    nlohmann::json doc;
    doc["embedding_dim"] = ch.embedding_dim;
    doc["pages"] = nlohmann::json::array();
    for (const auto& page : ch.pages) {
        nlohmann::json pj;
        pj["index"] = page.index;
        pj["characters"] = nlohmann::json::array();
        for (const auto& c : page.characters) {
            nlohmann::json cj{{"id", c.id}, {"bbox", detail::box_to_json(c.bbox)}, {"embedding", c.embedding}};
            if (c.gt_name) cj["gt_name"] = *c.gt_name;
            if (c.score != 1.0) cj["score"] = c.score;
            pj["characters"].push_back(std::move(cj));
        }
        pj["texts"] = nlohmann::json::array();
        for (const auto& t : page.texts) {
            nlohmann::json tj{{"id", t.id},
                              {"bbox", detail::box_to_json(t.bbox)},
                              {"content", t.content},
                              {"essential_score", t.essential_score}};
            if (t.category) tj["category"] = std::string(to_string(*t.category));
            if (t.gt_essential) tj["gt_essential"] = *t.gt_essential;
            if (t.score != 1.0) tj["score"] = t.score;
            pj["texts"].push_back(std::move(tj));
        }
        pj["tails"] = nlohmann::json::array();
        for (const auto& l : page.tails) {
            nlohmann::json lj{{"id", l.id}, {"bbox", detail::box_to_json(l.bbox)}};
            if (l.score != 1.0) lj["score"] = l.score;
            pj["tails"].push_back(std::move(lj));
        }
        pj["panels"] = nlohmann::json::array();
        for (const auto& q : page.panels) {
            pj["panels"].push_back({{"id", q.id}, {"bbox", detail::box_to_json(q.bbox)}});
        }
        nlohmann::json edges{{"text_char", nlohmann::json::array()},
                             {"text_tail", nlohmann::json::array()},
                             {"char_char", nlohmann::json::array()}};
        for (const auto& [k, s] : page.edges.text_char) edges["text_char"].push_back({k.first, k.second, s});
        for (const auto& [k, s] : page.edges.text_tail) edges["text_tail"].push_back({k.first, k.second, s});
        for (const auto& [k, s] : page.edges.char_char) edges["char_char"].push_back({k.first, k.second, s});
        pj["edges"] = std::move(edges);
        doc["pages"].push_back(std::move(pj));
    }
    return doc;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed document '" + path.string() + "': " + e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

inline Chapter parse_chapter(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("missing file '" + path.string() + "'");
    return chapter_from_json(read_json_file(path));
}

inline void write_chapter(const std::filesystem::path& path, const Chapter& ch) {
    write_text_file(path, chapter_to_json(ch).dump(1) + "\n");
}

}  // namespace mangascript
