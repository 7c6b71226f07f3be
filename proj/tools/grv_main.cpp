#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "grv/scan.hpp"
#include "grv/simulation.hpp"

namespace {

std::uint64_t env_seed_or(std::uint64_t fallback) {
    const char* s = std::getenv("GRV_SEED");
    if (s == nullptr || *s == '\0') return fallback;
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(s, &used);
        if (used != std::string(s).size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw grv::ValidationError("GRV_SEED must be a nonnegative integer, got '" +
                                   std::string(s) + "'");
    }
}

// Precedence: explicit flag, then config file (scan only), then GRV_SEED, then 0.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag,
                           const std::optional<std::uint64_t>& config = std::nullopt) {
    if (flag) return *flag;
    if (config) return *config;
    return env_seed_or(0);
}

grv::DistanceMatrix distances_for(const std::string& path, grv::DistanceMeasure measure) {
    return grv::detail::scan_distances(grv::read_dense_matrix(path), measure);
}

struct TestArgs {
    std::string x_file, y_file;
    std::string x_measure = "euclidean";
    std::string y_measure = "euclidean";
    std::string method = "analytic";
    std::uint64_t n_permutations = 10000;
    std::optional<std::uint64_t> seed;
    unsigned workers = 0;
};

void cmd_test(const TestArgs& a) {
    const grv::DistanceMatrix dx = distances_for(a.x_file, grv::parse_measure(a.x_measure));
    const grv::DistanceMatrix dy = distances_for(a.y_file, grv::parse_measure(a.y_measure));
    grv::TestResult result;
    if (a.method == "analytic") {
        result = grv::grv_pvalue_analytic(grv::gower_center(dx), grv::gower_center(dy));
    } else if (a.method == "monte_carlo") {
        result = grv::grv_pvalue_permutation(grv::gower_center(dx), grv::gower_center(dy),
                                             a.n_permutations, resolve_seed(a.seed), a.workers);
    } else if (a.method == "exhaustive") {
        result = grv::grv_pvalue_exhaustive(grv::gower_center(dx), grv::gower_center(dy));
    } else if (a.method == "mantel") {
        result = grv::mantel_pvalue_permutation(dx, dy, a.n_permutations, resolve_seed(a.seed),
                                                a.workers);
    } else {
        throw grv::ValidationError(
            "method must be analytic, monte_carlo, exhaustive, or mantel; got '" + a.method + "'");
    }
    std::cout << result.to_json().dump(2) << '\n';
}

struct ScanArgs {
    std::string manifest_file;
    std::string out_dir = ".";
    std::optional<std::string> method;
    std::optional<std::uint64_t> n_permutations;
    std::optional<std::uint64_t> seed;
    std::optional<int> min_features, max_features;
    std::optional<unsigned> workers;
};

void cmd_scan(const ScanArgs& a) {
    grv::ScanManifest m = grv::ScanManifest::from_json_file(a.manifest_file);
    if (a.method) m.method = *a.method;
    if (a.n_permutations) m.n_permutations = *a.n_permutations;
    if (a.min_features) m.min_features = *a.min_features;
    if (a.max_features) m.max_features = *a.max_features;
    if (a.workers) m.workers = *a.workers;
    m.seed = resolve_seed(a.seed, m.seed);
    m.validate();

    const grv::ScanReport report = grv::run_scan(m);
    grv::write_scan_report(report, a.out_dir);
    std::cout << "tests: " << report.rows.size() << "  combined: " << report.combined.size()
              << "  skipped: " << report.skipped.size()
              << "  permutations: " << report.total_permutations << '\n';
    std::cout << "wrote " << a.out_dir << "/results.csv, " << a.out_dir << "/results.json, "
              << a.out_dir << "/skipped.csv\n";
}

struct SimulateArgs {
    std::string mode;  // "power" or "size"
    grv::EqtlConfig cfg;
    bool null_scenario = false;
    bool shared_noise = false;
    std::string gen_measure = "ibs";
    std::string gex_measure = "mahalanobis";
    std::string test = "grv_analytic";
    std::uint64_t runs = 10;
    std::uint64_t datasets = 50;
    double alpha = 0.05;
    std::vector<double> levels = {0.01, 0.05, 0.1};
    std::uint64_t n_permutations = 10000;
    std::optional<std::uint64_t> seed;
    unsigned workers = 0;
    std::string out_file;  // empty -> stdout
};

void cmd_simulate(const SimulateArgs& a) {
    grv::EqtlConfig cfg = a.cfg;
    cfg.associated = !a.null_scenario;
    cfg.redraw_noise_per_dataset = !a.shared_noise;
    const auto gen = grv::parse_measure(a.gen_measure);
    const auto gex = grv::parse_measure(a.gex_measure);
    const auto test = grv::parse_test_kind(a.test);
    const std::uint64_t seed = resolve_seed(a.seed);

    std::ostringstream csv;
    if (a.mode == "power") {
        const auto est = grv::estimate_power(cfg, gen, gex, test, a.runs, a.datasets, a.alpha,
                                             seed, a.n_permutations, a.workers);
        csv << "gen_measure,gex_measure,test,n,p,q,alpha,power,sd,runs,datasets,skipped\n";
        csv << grv::measure_name(gen) << ',' << grv::measure_name(gex) << ','
            << grv::test_kind_name(test) << ',' << cfg.n << ',' << cfg.p << ',' << cfg.q << ','
            << grv::format_double(est.alpha) << ',' << grv::format_double(est.mean_power) << ','
            << grv::format_double(est.sd) << ',' << est.runs << ',' << est.datasets_per_run << ','
            << est.skipped << '\n';
    } else {
        const auto ests = grv::estimate_size(cfg, gen, gex, test, a.levels, a.runs, a.datasets,
                                             seed, a.n_permutations, a.workers);
        csv << "gen_measure,gex_measure,test,n,p,q,level,proportion,sd,runs,datasets\n";
        for (const auto& est : ests) {
            csv << grv::measure_name(gen) << ',' << grv::measure_name(gex) << ','
                << grv::test_kind_name(test) << ',' << cfg.n << ',' << cfg.p << ',' << cfg.q << ','
                << grv::format_double(est.alpha) << ',' << grv::format_double(est.mean_proportion)
                << ',' << grv::format_double(est.sd) << ',' << a.runs << ',' << a.datasets << '\n';
        }
    }
    if (a.runs < 2)
        std::cerr << "note: sd is 0 with a single run; increase --runs for a spread estimate\n";

    if (a.out_file.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream out(a.out_file);
        if (!out) throw grv::IoError("cannot write " + a.out_file);
        out << csv.str();
        std::cout << "wrote " << a.out_file << '\n';
    }
}

struct MetaArgs {
    std::string list_a, list_b;
    std::vector<int> ks = {5, 10, 20, 40};
    std::uint64_t n_permutations = 5000;
    std::optional<std::uint64_t> seed;
    unsigned workers = 0;
    std::string plot_csv;  // optional path for plot-ready data
};

// Accepts either a plain ranked-list file (one id per line) or a scan's
// results.json, whose combined table already carries the ranking.
grv::RankedList load_ranking(const std::string& path) {
    const auto dot = path.rfind('.');
    if (dot != std::string::npos && path.substr(dot + 1) == "json") {
        std::ifstream in(path);
        if (!in) throw grv::IoError("cannot open ranking: " + path);
        nlohmann::ordered_json j;
        try {
            j = nlohmann::ordered_json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw grv::ValidationError("ranking file is not valid JSON: " + std::string(e.what()));
        }
        if (!j.contains("combined"))
            throw grv::ValidationError("JSON ranking must be a scan report with a 'combined' table");
        std::vector<std::string> ids;
        for (const auto& row : j["combined"]) ids.push_back(row.at("pathway").get<std::string>());
        return grv::RankedList::from_ids(std::move(ids));
    }
    return grv::read_ranked_list(path);
}

void cmd_meta(const MetaArgs& a) {
    const grv::RankedList list_a = load_ranking(a.list_a);
    const grv::RankedList list_b = load_ranking(a.list_b);
    const std::uint64_t seed = resolve_seed(a.seed);

    std::vector<double> distances, pvalues;
    for (int k : a.ks) {
        distances.push_back(grv::canberra_topk(list_a, list_b, k));
        pvalues.push_back(
            grv::rank_overlap_pvalue(list_a, list_b, k, a.n_permutations, seed, a.workers));
    }
    const std::vector<double> qvalues = grv::bh_fdr(pvalues);

    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < a.ks.size(); ++i) {
        nlohmann::ordered_json row;
        row["k"] = a.ks[i];
        row["distance"] = distances[i];
        row["p_value"] = pvalues[i];
        row["q_value"] = qvalues[i];
        out.push_back(std::move(row));
    }
    std::cout << out.dump(2) << '\n';

    if (!a.plot_csv.empty()) {
        std::ofstream plot(a.plot_csv);
        if (!plot) throw grv::IoError("cannot write " + a.plot_csv);
        plot << "k,distance,p_value,q_value\n";
        for (std::size_t i = 0; i < a.ks.size(); ++i)
            plot << a.ks[i] << ',' << grv::format_double(distances[i]) << ','
                 << grv::format_double(pvalues[i]) << ',' << grv::format_double(qvalues[i])
                 << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distance-matrix association tests: single tests, pathway scans, "
                 "power simulation, and ranked-list comparison"};
    app.require_subcommand(1);

    TestArgs targs;
    auto* test = app.add_subcommand("test", "Run one association test on two sample-aligned matrices");
    test->add_option("--x", targs.x_file, "First data matrix (CSV/TSV, samples x features)")
        ->required();
    test->add_option("--y", targs.y_file, "Second data matrix (CSV/TSV, samples x features)")
        ->required();
    test->add_option("--x-measure", targs.x_measure, "Distance measure for --x");
    test->add_option("--y-measure", targs.y_measure, "Distance measure for --y");
    test->add_option("--method", targs.method, "analytic, monte_carlo, exhaustive, or mantel");
    test->add_option("--permutations", targs.n_permutations, "Permutation count for sampled methods");
    test->add_option("--seed", targs.seed, "RNG seed (default: GRV_SEED env var, then 0)");
    test->add_option("--workers", targs.workers, "Worker threads (0 = all cores)");
    test->callback([&] { cmd_test(targs); });

    ScanArgs sargs;
    auto* scan = app.add_subcommand("scan", "Run a pathway x measure grid from a JSON manifest");
    scan->add_option("--manifest", sargs.manifest_file, "Scan manifest (JSON)")->required();
    scan->add_option("--out", sargs.out_dir, "Output directory for results.csv/results.json/skipped.csv");
    scan->add_option("--method", sargs.method, "Override manifest method");
    scan->add_option("--permutations", sargs.n_permutations, "Override manifest n_permutations");
    scan->add_option("--seed", sargs.seed, "Override manifest seed (default: manifest, GRV_SEED, 0)");
    scan->add_option("--min-features", sargs.min_features, "Override manifest min_features");
    scan->add_option("--max-features", sargs.max_features, "Override manifest max_features");
    scan->add_option("--workers", sargs.workers, "Override manifest workers");
    scan->callback([&] { cmd_scan(sargs); });

    SimulateArgs margs;
    auto* sim = app.add_subcommand("simulate", "Estimate power or test size on simulated cohorts");
    sim->add_option("--mode", margs.mode, "power or size")
        ->required()
        ->check(CLI::IsMember({"power", "size"}));
    sim->add_option("--n", margs.cfg.n, "Samples per dataset");
    sim->add_option("--p", margs.cfg.p, "SNPs per dataset");
    sim->add_option("--q", margs.cfg.q, "Expression probes per dataset");
    sim->add_option("--maf-low", margs.cfg.maf_low, "Lower bound of the MAF range");
    sim->add_option("--maf-high", margs.cfg.maf_high, "Upper bound of the MAF range");
    sim->add_option("--noise-scale", margs.cfg.noise_scale, "Multiplier on the expression noise");
    sim->add_flag("--null", margs.null_scenario, "Simulate without genotype-expression coupling");
    sim->add_flag("--shared-noise", margs.shared_noise,
                  "Draw noise parameters once per run instead of per dataset");
    sim->add_option("--gen-measure", margs.gen_measure, "Genotype distance measure");
    sim->add_option("--gex-measure", margs.gex_measure, "Expression distance measure");
    sim->add_option("--test", margs.test, "grv_analytic, grv_permutation, or mantel_permutation");
    sim->add_option("--runs", margs.runs, "Independent runs (spread is estimated across runs)");
    sim->add_option("--datasets", margs.datasets, "Datasets per run");
    sim->add_option("--alpha", margs.alpha, "Rejection level (power mode)");
    sim->add_option("--levels", margs.levels, "Rejection levels (size mode)")->delimiter(',');
    sim->add_option("--permutations", margs.n_permutations, "Permutations for sampled tests");
    sim->add_option("--seed", margs.seed, "RNG seed (default: GRV_SEED env var, then 0)");
    sim->add_option("--workers", margs.workers, "Worker threads (0 = all cores)");
    sim->add_option("--out", margs.out_file, "Write the CSV report here instead of stdout");
    sim->callback([&] { cmd_simulate(margs); });

    MetaArgs aargs;
    auto* meta = app.add_subcommand("meta", "Compare two ranked lists over a top-k sweep");
    meta->add_option("--list-a", aargs.list_a, "Ranked list file or scan results.json")->required();
    meta->add_option("--list-b", aargs.list_b, "Ranked list file or scan results.json")->required();
    meta->add_option("--k", aargs.ks, "Comma-separated truncation depths")->delimiter(',');
    meta->add_option("--permutations", aargs.n_permutations, "Null permutations per depth");
    meta->add_option("--seed", aargs.seed, "RNG seed (default: GRV_SEED env var, then 0)");
    meta->add_option("--workers", aargs.workers, "Worker threads (0 = all cores)");
    meta->add_option("--plot-csv", aargs.plot_csv, "Also write k,distance,p_value,q_value CSV here");
    meta->callback([&] { cmd_meta(aargs); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const grv::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const grv::NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const grv::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
