// mangascript: chapter-wide character naming and transcript generation.
//
//   mangascript synth      --seed 0 --pages 5 --k 4 --out-dir data
//   mangascript name       --chapter c.json --bank b.json --out names.json
//   mangascript baseline   --method kmeans --seed 0 --chapter c.json --bank b.json --out names.json
//   mangascript transcribe --chapter c.json --bank b.json --out-text t.txt --out-json t.json
//   mangascript eval       --chapter c.json --gt gt.json --names names.json --json report.json

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mangascript/mangascript.hpp"

namespace ms = mangascript;
namespace fs = std::filesystem;

namespace {

struct NamingFlags {
    std::string chapter;
    std::string bank;
    std::optional<double> eta;
    double theta_ml = ms::kDefaultMustLinkThreshold;
    std::string cannot_link = "same-page";
    std::string constraints;
    bool gt_constraints = false;

    void add(CLI::App* cmd) {
        cmd->add_option("--chapter", chapter, "Chapter JSON")->required();
        cmd->add_option("--bank", bank, "Character bank JSON")->required();
        cmd->add_option("--eta", eta, "Cost of the 'other' class (overrides the bank file)")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--theta-ml", theta_ml, "Char-char score threshold for must-links")->check(CLI::Range(0.0, 1.0));
        cmd->add_option("--cannot-link", cannot_link, "Cannot-link scope")
            ->check(CLI::IsMember({"same-page", "same-panel"}));
        cmd->add_option("--constraints", constraints, "Extra must/cannot-link pairs (JSON)");
        cmd->add_flag("--gt-constraints", gt_constraints, "Derive constraints from gt_name fields");
    }

    ms::NamingOptions options() const {
        ms::NamingOptions o;
        o.must_link_threshold = theta_ml;
        o.cannot_link = cannot_link == "same-panel" ? ms::CannotLinkMode::same_panel : ms::CannotLinkMode::same_page;
        o.use_gt_constraints = gt_constraints;
        if (!constraints.empty()) {
            if (!fs::exists(constraints)) throw ms::Error("missing file '" + constraints + "'");
            o.overrides = ms::constraints_from_json(ms::read_json_file(constraints));
        }
        return o;
    }

    std::pair<ms::Chapter, ms::CharacterBank> load() const {
        auto parsed = ms::parse_chapter(chapter_path());
        auto characters = ms::parse_bank(bank, parsed.embedding_dim);
        if (eta) characters.eta = *eta;
        return {std::move(parsed), std::move(characters)};
    }

    fs::path chapter_path() const { return chapter; }
};

void write_or_print(const std::string& path, const std::string& bytes) {
    if (path.empty() || path == "-") {
        std::cout << bytes;
    } else {
        ms::write_text_file(path, bytes);
    }
}

int run_name(const NamingFlags& flags, const std::string& out) {
    const auto [chapter, bank] = flags.load();
    const auto r = ms::name_chapter(chapter, bank, flags.options());
    write_or_print(out, ms::assignment_to_json(r.names, r.assignment.objective).dump(2) + "\n");
    std::cerr << "objective " << r.assignment.objective << ", crops " << r.problem.crop_ids.size() << ", must-links "
              << r.problem.constraints.must_link.size() << ", cannot-links " << r.problem.constraints.cannot_link.size()
              << "\n";
    return 0;
}

struct TranscribeFlags {
    std::string out_text;
    std::string out_json;
    std::string assignment_out;
    ms::TranscriptParams params;
};

int run_transcribe(const NamingFlags& flags, const TranscribeFlags& t) {
    const auto [chapter, bank] = flags.load();
    const auto r = ms::name_chapter(chapter, bank, flags.options());
    const auto transcript = ms::make_transcript(chapter, r.names, t.params, flags.chapter_path().stem().string());

    if (t.out_text.empty() && t.out_json.empty()) {
        std::cout << ms::render_transcript(transcript, ms::TranscriptFormat::plain);
    }
    if (!t.out_text.empty()) ms::write_text_file(t.out_text, ms::render_transcript(transcript, ms::TranscriptFormat::plain));
    if (!t.out_json.empty()) ms::write_text_file(t.out_json, ms::render_transcript(transcript, ms::TranscriptFormat::json));
    if (!t.assignment_out.empty()) {
        ms::write_text_file(t.assignment_out, ms::assignment_to_json(r.names, r.assignment.objective).dump(2) + "\n");
    }
    std::size_t unsure = 0, unattributed = 0;
    for (const auto& u : transcript.utterances) {
        if (!u.attributed) ++unattributed;
        else if (u.speaker == ms::kUnsureSpeaker) ++unsure;
    }
    std::cerr << "objective " << r.assignment.objective << ", crops " << r.problem.crop_ids.size() << ", utterances "
              << transcript.utterances.size() << ", unsure " << unsure << ", unattributed " << unattributed << "\n";
    return 0;
}

int run_baseline(const NamingFlags& flags, const std::string& method, const ms::BaselineOptions& options,
                 const std::string& out) {
    const auto [chapter, bank] = flags.load();
    const auto crops = chapter.all_characters();
    nlohmann::json doc;
    if (method == "kmeans") {
        doc["names"] = ms::name_by_kmeans(crops, bank, options);
        doc["fallback"] = false;
    } else {
        const auto r = ms::name_by_iforest_kmeans(crops, bank, options);
        doc["names"] = r.names;
        doc["fallback"] = r.fallback;
        if (r.fallback) std::cerr << "warning: anomaly filtering left fewer than k crops; used plain K-means\n";
    }
    // Objective of the baseline labelling under the same cost matrix, for comparison.
    const auto costs = ms::build_cost_matrix(crops, bank);
    std::map<std::string, std::size_t> column;
    for (std::size_t j = 0; j < bank.size(); ++j) column[bank.characters[j].name] = j;
    double objective = 0.0;
    for (std::size_t i = 0; i < crops.size(); ++i) {
        const auto& name = doc["names"][crops[i].id].get_ref<const std::string&>();
        auto it = column.find(name);
        objective += costs(i, it == column.end() ? costs.other_column() : it->second);
    }
    doc["objective"] = objective;
    doc["method"] = method;
    write_or_print(out, doc.dump(2) + "\n");
    return 0;
}

struct EvalFlags {
    std::string chapter;
    std::string gt;
    std::string gt_chapter;
    std::string names;
    std::string json_out;
    double iou_min = ms::kDefaultIouMin;
    double theta_ml = ms::kDefaultMustLinkThreshold;
};

int run_eval(const EvalFlags& f) {
    const auto pred = ms::parse_chapter(f.chapter);
    const auto gt_chapter = f.gt_chapter.empty() ? pred : ms::parse_chapter(f.gt_chapter);
    const auto truth = ms::parse_ground_truth(f.gt);
    std::optional<ms::Naming> names;
    if (!f.names.empty()) {
        if (!fs::exists(f.names)) throw ms::Error("missing file '" + f.names + "'");
        names = ms::naming_from_json(ms::read_json_file(f.names));
        if (names->empty()) throw ms::Error("prediction file '" + f.names + "' names no crops");
    }
    ms::EvaluationInputs in;
    in.pred = &pred;
    in.gt_chapter = &gt_chapter;
    in.truth = &truth;
    in.pred_names = names ? &*names : nullptr;
    in.iou_min = f.iou_min;
    in.must_link_threshold = f.theta_ml;
    const auto report = ms::evaluate(in);
    std::cout << report.table();
    if (!f.json_out.empty()) ms::write_text_file(f.json_out, report.to_json().dump(2) + "\n");
    return 0;
}

struct SynthFlags {
    ms::SynthConfig config;
    std::string out_dir = ".";
    std::string prefix = "synth";
    std::size_t count = 1;
    std::size_t jobs = 1;
};

int run_synth(const SynthFlags& f) {
    f.config.validate();
    fs::create_directories(f.out_dir);
    std::vector<std::string> printed(f.count);
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::string first_error;

    auto worker = [&] {
        for (std::size_t i = next++; i < f.count; i = next++) {
            try {
                ms::SynthConfig cfg = f.config;
                cfg.seed = f.config.seed + i;
                const std::string stem = f.count == 1 ? f.prefix : f.prefix + "_" + std::to_string(cfg.seed);
                const auto s = ms::generate(cfg);
                const fs::path dir(f.out_dir);
                const auto chapter_path = dir / (stem + "_chapter.json");
                const auto bank_path = dir / (stem + "_bank.json");
                const auto gt_path = dir / (stem + "_gt.json");
                ms::write_chapter(chapter_path, s.chapter);
                ms::write_text_file(bank_path, ms::bank_to_json(s.bank).dump(1) + "\n");
                ms::write_text_file(gt_path, ms::ground_truth_to_json(s.truth).dump(1) + "\n");
                printed[i] = chapter_path.string() + "\n" + bank_path.string() + "\n" + gt_path.string() + "\n";
            } catch (const std::exception& e) {
                std::lock_guard lock(error_mutex);
                if (first_error.empty()) first_error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t workers = std::max<std::size_t>(1, std::min(f.jobs, f.count));
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (!first_error.empty()) throw ms::Error(first_error);
    for (const auto& p : printed) std::cout << p;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chapter-wide manga character naming and transcript generation"};
    app.require_subcommand(1);

    NamingFlags name_flags;
    std::string name_out;
    auto* name_cmd = app.add_subcommand("name", "Assign every crop to a bank character or 'other'");
    name_flags.add(name_cmd);
    name_cmd->add_option("--out", name_out, "Assignment JSON (stdout when omitted)");

    NamingFlags tr_flags;
    TranscribeFlags tr;
    auto* tr_cmd = app.add_subcommand("transcribe", "Name characters and write the chapter transcript");
    tr_flags.add(tr_cmd);
    tr_cmd->add_option("--out-text", tr.out_text, "Plain-text transcript path");
    tr_cmd->add_option("--out-json", tr.out_json, "JSON transcript path");
    tr_cmd->add_option("--assignment-out", tr.assignment_out, "Also write the assignment JSON here");
    tr_cmd->add_option("--tau-essential", tr.params.essential_threshold, "Essential-text score threshold")
        ->check(CLI::Range(0.0, 1.0));
    tr_cmd->add_option("--tau-speaker", tr.params.speaker_threshold, "Minimum speaker confidence")
        ->check(CLI::Range(0.0, 1.0));
    tr_cmd->add_option("--tail-threshold", tr.params.tail_threshold, "Text-tail score needed to show a speaker")
        ->check(CLI::Range(0.0, 1.0));
    tr_cmd->add_flag("--tail-gated", tr.params.tail_gated, "Show speakers only for texts with a tail");
    tr_cmd->add_flag("--use-gt-essential", tr.params.use_gt_essential, "Filter texts by gt_essential when present");

    NamingFlags bl_flags;
    std::string bl_method = "kmeans";
    std::string bl_out;
    ms::BaselineOptions bl_options;
    auto* bl_cmd = app.add_subcommand("baseline", "Clustering baselines with Hungarian naming");
    bl_flags.add(bl_cmd);
    bl_cmd->add_option("--method", bl_method, "kmeans or iforest-kmeans")
        ->check(CLI::IsMember({"kmeans", "iforest-kmeans"}));
    bl_cmd->add_option("--seed", bl_options.seed, "Random seed");
    bl_cmd->add_option("--ntrees", bl_options.ntrees, "Isolation trees")->check(CLI::PositiveNumber);
    bl_cmd->add_option("--subsample", bl_options.subsample, "Isolation-tree subsample size")->check(CLI::PositiveNumber);
    bl_cmd->add_option("--anomaly-threshold", bl_options.anomaly_threshold, "Scores at or above this are 'other'")
        ->check(CLI::Range(0.0, 1.0));
    bl_cmd->add_option("--out", bl_out, "Assignment JSON (stdout when omitted)");

    EvalFlags ev;
    auto* ev_cmd = app.add_subcommand("eval", "Evaluate predictions against ground truth");
    ev_cmd->add_option("--chapter", ev.chapter, "Predicted chapter JSON")->required();
    ev_cmd->add_option("--gt", ev.gt, "Ground-truth JSON")->required();
    ev_cmd->add_option("--gt-chapter", ev.gt_chapter, "Ground-truth boxes (defaults to --chapter)");
    ev_cmd->add_option("--names", ev.names, "Predicted assignment JSON");
    ev_cmd->add_option("--json", ev.json_out, "Write the metric report as JSON");
    ev_cmd->add_option("--iou-min", ev.iou_min, "IoU needed to match a box")->check(CLI::Range(1e-9, 1.0));
    ev_cmd->add_option("--theta-ml", ev.theta_ml, "Char-char threshold for predicted clusters")
        ->check(CLI::Range(0.0, 1.0));

    SynthFlags sy;
    auto* sy_cmd = app.add_subcommand("synth", "Generate a synthetic chapter, bank and ground truth");
    auto& c = sy.config;
    sy_cmd->add_option("--seed", c.seed, "Random seed");
    sy_cmd->add_option("--pages", c.pages, "Pages per chapter");
    sy_cmd->add_option("--k", c.k_bank, "Bank characters");
    sy_cmd->add_option("--dim", c.embedding_dim, "Embedding dimension");
    sy_cmd->add_option("--sigma", c.noise_sigma, "Embedding noise (expected norm)");
    sy_cmd->add_option("--other-rate", c.other_rate, "Probability a crop is not in the bank");
    sy_cmd->add_option("--edge-noise", c.edge_noise, "Probability an edge score is flipped");
    sy_cmd->add_option("--essential-rate", c.essential_rate, "Probability a text is essential");
    sy_cmd->add_option("--tail-rate", c.tail_rate, "Probability a text has a tail");
    sy_cmd->add_option("--panels-min", c.panels_min);
    sy_cmd->add_option("--panels-max", c.panels_max);
    sy_cmd->add_option("--crops-min", c.crops_min);
    sy_cmd->add_option("--crops-max", c.crops_max);
    sy_cmd->add_option("--texts-min", c.texts_min);
    sy_cmd->add_option("--texts-max", c.texts_max);
    sy_cmd->add_option("--lookalike", c.lookalike_distance, "Distance between bank characters 0 and 1 (0 disables)");
    sy_cmd->add_option("--eta", c.eta, "Eta written into the bank file");
    sy_cmd->add_option("--out-dir", sy.out_dir, "Output directory");
    sy_cmd->add_option("--prefix", sy.prefix, "Output file prefix");
    sy_cmd->add_option("--count", sy.count, "Chapters to generate (seeds seed..seed+count-1)")->check(CLI::PositiveNumber);
    sy_cmd->add_option("--jobs", sy.jobs, "Worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*name_cmd) return run_name(name_flags, name_out);
        if (*tr_cmd) return run_transcribe(tr_flags, tr);
        if (*bl_cmd) return run_baseline(bl_flags, bl_method, bl_options, bl_out);
        if (*ev_cmd) return run_eval(ev);
        if (*sy_cmd) return run_synth(sy);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
