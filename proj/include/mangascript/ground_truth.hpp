#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mangascript/chapter.hpp"
#include "mangascript/error.hpp"
#include "mangascript/solver.hpp"

namespace mangascript {

// Ground truth for one chapter. `names` maps every crop to a bank name or
// "other"; `speakers` maps texts to the crop that says them; `tails` is
// optional and lists the tails attached to each text.
struct GroundTruth {
    Naming names;
    std::map<std::string, std::string> speakers;
    std::map<std::string, bool> essential;
    std::map<std::string, std::vector<std::string>> tails;

    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

// Identity used for clustering and edge evaluation. Named crops share their
// name; every "other" crop is its own individual.
inline std::string identity_key(const std::string& crop_id, const std::string& name) {
    return name == kOtherName ? "other:" + crop_id : name;
}

inline nlohmann::json ground_truth_to_json(const GroundTruth& gt) {
    nlohmann::json doc{{"names", gt.names}, {"speakers", gt.speakers}, {"essential", gt.essential}};
    if (!gt.tails.empty()) doc["tails"] = gt.tails;
    return doc;
}

inline GroundTruth ground_truth_from_json(const nlohmann::json& doc) {
    GroundTruth gt;
    try {
        if (!doc.is_object()) throw Error("malformed ground truth: top level must be an object");
        gt.names = doc.at("names").get<Naming>();
        gt.speakers = doc.value("speakers", std::map<std::string, std::string>{});
        gt.essential = doc.value("essential", std::map<std::string, bool>{});
        gt.tails = doc.value("tails", std::map<std::string, std::vector<std::string>>{});
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed ground truth: ") + e.what());
    }
    return gt;
}

inline GroundTruth parse_ground_truth(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("missing file '" + path.string() + "'");
    return ground_truth_from_json(read_json_file(path));
}

}  // namespace mangascript
