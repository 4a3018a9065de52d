#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mangascript/chapter.hpp"
#include "mangascript/error.hpp"
#include "mangascript/reading_order.hpp"
#include "mangascript/solver.hpp"

namespace mangascript {

inline constexpr const char* kUnsureSpeaker = "<unsure>";

struct TranscriptParams {
    double essential_threshold = 0.5;
    double speaker_threshold = 0.4;
    double tail_threshold = 0.5;
    bool tail_gated = false;
    bool use_gt_essential = false;
};

struct Utterance {
    std::size_t page_index = 0;
    std::string panel_id;
    std::string text_id;
    std::string content;
    std::string speaker;  // bank name, "other", or "<unsure>"
    bool attributed = true;
    double confidence = 0.0;

    friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Transcript {
    std::string chapter_id;
    TranscriptParams params;
    std::vector<int> page_labels;  // page header label for each page index
    std::vector<Utterance> utterances;
};

inline bool is_essential(const TextNode& t, const TranscriptParams& params) {
    if (params.use_gt_essential && t.gt_essential) return *t.gt_essential;
    return t.essential_score >= params.essential_threshold;
}

// Filters, orders and attributes the texts of every page. The speaker of a
// text is the name of its highest-scoring character crop (first crop wins
// ties); below `speaker_threshold` it is "<unsure>". With tail gating, texts
// lacking a tail edge at or above `tail_threshold` are left unattributed.
inline std::vector<Utterance> attribute_speakers(const Chapter& chapter, const Naming& naming,
                                                 const TranscriptParams& params = {}) {
    std::vector<Utterance> out;
    for (std::size_t pi = 0; pi < chapter.pages.size(); ++pi) {
        const Page& page = chapter.pages[pi];
        std::map<std::string, const TextNode*> texts;
        for (const auto& t : page.texts) texts[t.id] = &t;

        for (const auto& ot : order_texts_with_panels(page, order_panels(page))) {
            const TextNode& t = *texts.at(ot.text_id);
            if (!is_essential(t, params)) continue;

            Utterance u;
            u.page_index = pi;
            u.panel_id = ot.panel_id;
            u.text_id = t.id;
            u.content = t.content;
            const CharacterNode* best = nullptr;
            for (const auto& c : page.characters) {
                const double s = page.edges.text_char_score(t.id, c.id);
                if (best == nullptr || s > u.confidence) {
                    best = &c;
                    u.confidence = s;
                }
            }
            if (best != nullptr && u.confidence >= params.speaker_threshold) {
                auto it = naming.find(best->id);
                if (it == naming.end()) throw Error("naming does not cover crop '" + best->id + "'");
                u.speaker = it->second;
            } else {
                u.speaker = kUnsureSpeaker;
            }
            if (params.tail_gated) {
                u.attributed = std::any_of(page.tails.begin(), page.tails.end(), [&](const TailNode& l) {
                    return page.edges.text_tail_score(t.id, l.id) >= params.tail_threshold;
                });
            }
            out.push_back(std::move(u));
        }
    }
    return out;
}

inline Transcript make_transcript(const Chapter& chapter, const Naming& naming, const TranscriptParams& params = {},
                                  std::string chapter_id = {}) {
    Transcript t;
    t.chapter_id = std::move(chapter_id);
    t.params = params;
    for (const auto& p : chapter.pages) t.page_labels.push_back(p.index);
    t.utterances = attribute_speakers(chapter, naming, params);
    return t;
}

enum class TranscriptFormat { plain, json };

inline TranscriptFormat parse_transcript_format(std::string_view s) {
    if (s == "plain") return TranscriptFormat::plain;
    if (s == "json") return TranscriptFormat::json;
    throw Error("unknown transcript format '" + std::string(s) + "'");
}

inline nlohmann::json transcript_to_json(const Transcript& t) {
    nlohmann::json doc;
    doc["chapter"] = t.chapter_id;
    doc["parameters"] = {{"essential_threshold", t.params.essential_threshold},
                         {"speaker_threshold", t.params.speaker_threshold},
                         {"tail_threshold", t.params.tail_threshold},
                         {"tail_gated", t.params.tail_gated},
                         {"use_gt_essential", t.params.use_gt_essential}};
    doc["utterances"] = nlohmann::json::array();
    for (const auto& u : t.utterances) {
        nlohmann::json uj{{"page", t.page_labels.at(u.page_index)},
                          {"panel", u.panel_id},
                          {"text_id", u.text_id},
                          {"content", u.content},
                          {"attributed", u.attributed},
                          {"confidence", u.confidence}};
        if (u.attributed) uj["speaker"] = u.speaker;
        doc["utterances"].push_back(std::move(uj));
    }
    return doc;
}

// Plain format: a `--- page N ---` header for every page, then one line per
// utterance, `speaker: content`, or just the content when unattributed.
inline std::string render_transcript(const Transcript& t, TranscriptFormat format) {
    if (format == TranscriptFormat::json) return transcript_to_json(t).dump(2) + "\n";
    std::ostringstream out;
    std::size_t next = 0;
    for (std::size_t pi = 0; pi < t.page_labels.size(); ++pi) {
        out << "--- page " << t.page_labels[pi] << " ---\n";
        for (; next < t.utterances.size() && t.utterances[next].page_index == pi; ++next) {
            const auto& u = t.utterances[next];
            if (u.attributed) out << u.speaker << ": ";
            out << u.content << "\n";
        }
    }
    return out.str();
}

}  // namespace mangascript
