// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "oracles.hpp"
#include "support.hpp"

namespace ms = mangascript;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int precision = 4) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(precision);
    s << x;
    return s.str();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << o.detail << std::endl;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run(const std::string& args) {
    const std::string cmd = std::string(MANGASCRIPT_BIN) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 1. Exact solver agrees with exhaustive enumeration.
Outcome solver_optimality() {
    std::mt19937_64 rng(20240601);
    std::size_t mismatches = 0, infeasible = 0, max_fragments = 0;
    const auto t0 = Clock::now();
    for (int i = 0; i < 200; ++i) {
        const auto p = support::random_problem(rng, 8, 4);
        max_fragments = std::max(max_fragments, ms::collapse_fragments(p).fragments.size());
        const auto exact = ms::solve_exact(p);
        const auto brute = ms::solve_bruteforce(p);
        mismatches += exact.objective != brute.objective;
        infeasible += !ms::verify(exact, p) || !ms::verify(brute, p);
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && infeasible == 0 && max_fragments <= 8 && secs < 10.0,
            "200 instances (<= " + std::to_string(max_fragments) + " fragments), " + std::to_string(mismatches) +
                " objective mismatches, " + std::to_string(infeasible) + " infeasible, " + fmt(secs, 2) + " s"};
}

// 2. Solver output respects must-links, cannot-links and the "other" exemption.
Outcome constraint_semantics() {
    std::size_t violations = 0, exempt_pairs = 0, cannot_links = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        ms::SynthConfig cfg;
        cfg.seed = seed;
        cfg.noise_sigma = 0.2;
        cfg.edge_noise = 0.1;
        const auto s = ms::generate(cfg);
        const auto r = ms::name_chapter(s.chapter, s.bank);
        violations += !ms::verify(r.assignment, r.problem);
        const auto labels = ms::label_map(r.problem, r.assignment);
        const std::size_t other = r.problem.costs.other_column();
        for (const auto& [a, b] : r.problem.constraints.cannot_link) {
            ++cannot_links;
            if (labels.at(a) == other && labels.at(b) == other) ++exempt_pairs;
            else violations += labels.at(a) == labels.at(b);
        }
        for (const auto& [a, b] : r.problem.constraints.must_link) violations += labels.at(a) != labels.at(b);
        violations += labels.size() != s.chapter.character_count();
    }
    return {violations == 0, "100 chapters, " + std::to_string(cannot_links) + " cannot-links (" +
                                 std::to_string(exempt_pairs) + " both 'other'), " + std::to_string(violations) +
                                 " violations"};
}

// 3. Joint solve equals the sum of per-page solves.
Outcome decomposition() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        ms::SynthConfig cfg;
        cfg.seed = seed;
        cfg.noise_sigma = 0.2;
        cfg.edge_noise = 0.1;
        const auto s = ms::generate(cfg);
        const double joint = ms::name_chapter(s.chapter, s.bank).assignment.objective;
        double sum = 0.0;
        for (const auto& page : s.chapter.pages) {
            ms::Chapter single;
            single.embedding_dim = s.chapter.embedding_dim;
            single.pages = {page};
            sum += ms::name_chapter(single, s.bank).assignment.objective;
        }
        worst = std::max(worst, std::abs(joint - sum));
    }
    return {worst <= 1e-9, "50 chapters, max |joint - sum of pages| = " + fmt(worst, 15)};
}

// 4. Noise-free chapters are named perfectly and every transcript line is right.
Outcome identifiability() {
    double worst_accuracy = 1.0;
    std::size_t wrong_lines = 0, lines = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ms::SynthConfig cfg;
        cfg.seed = seed;
        cfg.noise_sigma = 0.0;
        cfg.edge_noise = 0.0;
        cfg.other_rate = 0.0;
        const auto s = ms::generate(cfg);
        const auto names = ms::name_chapter(s.chapter, s.bank).names;
        worst_accuracy = std::min(worst_accuracy, ms::naming_accuracy(s.truth.names, names));
        for (const auto& u : ms::make_transcript(s.chapter, names).utterances) {
            ++lines;
            wrong_lines += u.speaker != s.truth.names.at(s.truth.speakers.at(u.text_id));
        }
    }
    return {worst_accuracy == 1.0 && wrong_lines == 0 && lines > 0,
            "20 seeds, min accuracy " + fmt(worst_accuracy) + ", " + std::to_string(wrong_lines) + "/" +
                std::to_string(lines) + " transcript lines wrong"};
}

// 5. Method ordering: constrained solver >= iForest + K-means >= K-means(k+1).
Outcome method_ordering() {
    double solver = 0, iforest = 0, kmeans = 0;
    const int n = 50;
    for (int seed = 0; seed < n; ++seed) {
        ms::SynthConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(seed);
        cfg.noise_sigma = 0.15;
        cfg.other_rate = 0.2;
        cfg.lookalike_distance = 0.3;
        const auto s = ms::generate(cfg);
        const auto crops = s.chapter.all_characters();
        ms::BaselineOptions opts;
        opts.seed = static_cast<std::uint64_t>(seed);
        solver += ms::naming_accuracy(s.truth.names, ms::name_chapter(s.chapter, s.bank).names);
        iforest += ms::naming_accuracy(s.truth.names, ms::name_by_iforest_kmeans(crops, s.bank, opts).names);
        kmeans += ms::naming_accuracy(s.truth.names, ms::name_by_kmeans(crops, s.bank, opts));
    }
    solver /= n;
    iforest /= n;
    kmeans /= n;
    return {solver + 0.01 >= iforest && iforest + 0.01 >= kmeans,
            "mean accuracy solver " + fmt(solver) + ", iForest+K-means " + fmt(iforest) + ", K-means " + fmt(kmeans)};
}

// 6. Ground-truth constraints do at least as well as noisy extracted ones.
Outcome gt_constraint_uplift() {
    double gt = 0, extracted = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        ms::SynthConfig cfg;
        cfg.seed = seed;
        cfg.edge_noise = 0.15;
        const auto s = ms::generate(cfg);
        ms::NamingOptions with_gt;
        with_gt.use_gt_constraints = true;
        gt += ms::naming_accuracy(s.truth.names, ms::name_chapter(s.chapter, s.bank, with_gt).names);
        extracted += ms::naming_accuracy(s.truth.names, ms::name_chapter(s.chapter, s.bank).names);
    }
    gt /= 30;
    extracted /= 30;
    return {gt >= extracted, "mean accuracy with GT constraints " + fmt(gt) + ", extracted " + fmt(extracted)};
}

// 7. Metric identities and oracle agreement.
Outcome metric_identities() {
    std::vector<std::string> problems;
    const std::vector<int> part{0, 0, 1, 2, 2, 2};
    const auto same = ms::clustering_metrics(part, part);
    if (same.ami != 1.0 || same.nmi != 1.0) problems.push_back("AMI/NMI on identical partitions");

    const double ap = ms::average_precision({0.9, 0.8, 0.7}, {true, false, true});
    if (std::abs(ap - 0.8333) > 1e-4) problems.push_back("AP example " + fmt(ap, 6));

    std::mt19937_64 rng(31337);
    std::normal_distribution<double> g;
    std::uniform_int_distribution<int> d(0, 5);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<ms::Embedding> x(30, ms::Embedding(4));
        std::vector<int> y(30);
        for (std::size_t i = 0; i < 30; ++i) {
            y[i] = d(rng);
            for (auto& v : x[i]) v = g(rng) + 0.7 * y[i];
        }
        const auto r = ms::retrieval_metrics(x, y);
        const auto o = oracles::rank_table(x, y);
        worst = std::max({worst, std::abs(r.precision_at_1 - o.p1), std::abs(r.r_precision - o.rp),
                          std::abs(r.mrr - o.mrr), std::abs(r.map_at_r - o.mapr)});
    }
    if (worst > 1e-9) problems.push_back("retrieval oracle gap " + fmt(worst, 12));

    ms::Chapter ch;
    ch.embedding_dim = 2;
    ms::Page page;
    page.characters = {support::crop("a1", support::unit({1, 0}), {0, 0, 10, 10}),
                       support::crop("a2", support::unit({1, 0}), {20, 0, 30, 10})};
    page.texts = {support::text("t", {40, 0, 50, 10})};
    page.edges.text_char[{"t", "a1"}] = 0.2;
    page.edges.text_char[{"t", "a2"}] = 0.7;
    ch.pages = {page};
    ms::GroundTruth truth;
    truth.names = {{"a1", "A"}, {"a2", "A"}};
    truth.speakers = {{"t", "a1"}};
    const auto pooled = ms::text_identity_pairs(ch, ch, truth, ms::match_chapters(ch, ch));
    if (pooled.scores.size() != 1 || pooled.scores[0] != 0.7) problems.push_back("max-pooling example");

    std::string detail = "AMI/NMI identity, AP " + fmt(ap, 6) + ", retrieval max gap " + fmt(worst, 12) +
                         " over 20x30 points, pooled score " + (pooled.scores.empty() ? "-" : fmt(pooled.scores[0], 4));
    for (const auto& p : problems) detail += "; failed: " + p;
    return {problems.empty(), detail};
}

// 8. transcribe and synth are byte-deterministic.
Outcome determinism() {
    support::TempDir dir("acceptance_det");
    const std::string synth = "synth --seed 9 --pages 6 --k 5 --edge-noise 0.1 --out-dir ";
    if (run(synth + (dir / "a")) != 0 || run(synth + (dir / "b")) != 0) return {false, "synth failed"};
    bool same = true;
    for (const char* f : {"synth_chapter.json", "synth_bank.json", "synth_gt.json"}) {
        same = same && slurp(dir / (std::string("a/") + f)) == slurp(dir / (std::string("b/") + f));
    }
    const std::string in = " --chapter " + (dir / "a/synth_chapter.json") + " --bank " + (dir / "a/synth_bank.json");
    for (const char* tag : {"1", "2"}) {
        const std::string t(tag);
        if (run("transcribe" + in + " --out-text " + (dir / ("t" + t + ".txt")) + " --out-json " +
                (dir / ("t" + t + ".json")) + " --assignment-out " + (dir / ("a" + t + ".json"))) != 0) {
            return {false, "transcribe failed"};
        }
    }
    for (const char* f : {"t%s.txt", "t%s.json", "a%s.json"}) {
        char a[32], b[32];
        std::snprintf(a, sizeof a, f, "1");
        std::snprintf(b, sizeof b, f, "2");
        same = same && slurp(dir / a) == slurp(dir / b) && !slurp(dir / a).empty();
    }
    return {same, same ? "synth and transcribe outputs byte-identical across runs" : "outputs differ"};
}

// 9. 30 pages, 300 crops, k = 25 through the CLI in under 5 s.
Outcome scale() {
    support::TempDir dir("acceptance_scale");
    if (run("synth --seed 1 --pages 30 --k 25 --crops-min 10 --crops-max 10 --out-dir " + dir.path().string()) != 0) {
        return {false, "synth failed"};
    }
    const auto ch = ms::parse_chapter(dir / "synth_chapter.json");
    const auto t0 = Clock::now();
    const int code = run("transcribe --chapter " + (dir / "synth_chapter.json") + " --bank " +
                         (dir / "synth_bank.json") + " --out-text " + (dir / "t.txt") + " --out-json " +
                         (dir / "t.json"));
    const double secs = seconds_since(t0);
    return {code == 0 && ch.character_count() == 300 && secs < 5.0,
            std::to_string(ch.character_count()) + " crops, k=25, transcribe " + fmt(secs, 3) + " s"};
}

}  // namespace

int main() {
    report(1, "solver optimality", solver_optimality);
    report(2, "constraint semantics", constraint_semantics);
    report(3, "decomposition equivalence", decomposition);
    report(4, "noise-free identifiability", identifiability);
    report(5, "method ordering", method_ordering);
    report(6, "ground-truth constraint uplift", gt_constraint_uplift);
    report(7, "metric identities", metric_identities);
    report(8, "determinism", determinism);
    report(9, "scale", scale);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
