#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "grv/csv.hpp"
#include "grv/distances.hpp"
#include "grv/errors.hpp"
#include "grv/gram.hpp"
#include "grv/inference.hpp"
#include "grv/meta.hpp"
#include "grv/parallel.hpp"
#include "grv/rng.hpp"

namespace grv {

// Batch-scan configuration: two sample-aligned matrices, a pathway-to-column
// map, and the measure grid to test. Seed resolution (flag > manifest > env)
// happens in the front end; the scan itself takes the value as given.
struct ScanManifest {
    std::string genotype_file;
    std::string expression_file;
    std::string pathway_map_file;
    std::vector<DistanceMeasure> gen_measures;
    std::vector<DistanceMeasure> gex_measures;
    std::string method = "analytic";  // "analytic" or "monte_carlo"
    std::uint64_t n_permutations = 10000;
    std::optional<std::uint64_t> seed;
    int min_features = 5;
    int max_features = 200;
    unsigned workers = 0;  // 0 = all available cores

    static ScanManifest from_json_file(const std::string& path);
    nlohmann::ordered_json to_json() const;
    void validate() const;
};

struct PathwayBlocks {
    std::string id;
    std::vector<int> genotype_cols;
    std::vector<int> expression_cols;
};

struct ScanRow {
    std::string pathway;
    DistanceMeasure gen_measure;
    DistanceMeasure gex_measure;
    TestResult result;
};

struct ScanSkip {
    std::string pathway;
    std::string stage;  // "filter" or "<gen>x<gex>"
    std::string reason;
};

struct CombinedRow {
    std::string pathway;
    double p_value = 1.0;
    std::size_t tests = 0;  // successful measure pairs behind the combination
};

struct ScanReport {
    std::vector<ScanRow> rows;
    std::vector<CombinedRow> combined;  // ranked, most significant first
    std::vector<ScanSkip> skipped;
    std::uint64_t total_permutations = 0;
    nlohmann::ordered_json config;
};

inline void ScanManifest::validate() const {
    if (genotype_file.empty() || expression_file.empty() || pathway_map_file.empty())
        throw ValidationError("manifest must name genotype_file, expression_file, and pathway_map_file");
    if (gen_measures.empty() || gex_measures.empty())
        throw ValidationError("manifest must list at least one measure per block");
    if (method != "analytic" && method != "monte_carlo")
        throw ValidationError("method must be 'analytic' or 'monte_carlo', got '" + method + "'");
    if (method == "monte_carlo" && n_permutations == 0)
        throw ValidationError("monte_carlo method needs n_permutations >= 1");
    if (min_features < 1 || max_features < min_features)
        throw ValidationError("need 1 <= min_features <= max_features");
}

inline ScanManifest ScanManifest::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("manifest is not valid JSON: " + std::string(e.what()));
    }
    ScanManifest m;
    try {
        m.genotype_file = j.at("genotype_file").get<std::string>();
        m.expression_file = j.at("expression_file").get<std::string>();
        m.pathway_map_file = j.at("pathway_map_file").get<std::string>();
        for (const auto& s : j.at("gen_measures")) m.gen_measures.push_back(parse_measure(s.get<std::string>()));
        for (const auto& s : j.at("gex_measures")) m.gex_measures.push_back(parse_measure(s.get<std::string>()));
        if (j.contains("method")) m.method = j["method"].get<std::string>();
        if (j.contains("n_permutations")) m.n_permutations = j["n_permutations"].get<std::uint64_t>();
        if (j.contains("seed")) m.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("min_features")) m.min_features = j["min_features"].get<int>();
        if (j.contains("max_features")) m.max_features = j["max_features"].get<int>();
        if (j.contains("workers")) m.workers = j["workers"].get<unsigned>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("manifest field error: " + std::string(e.what()));
    }
    m.validate();
    return m;
}

inline nlohmann::ordered_json ScanManifest::to_json() const {
    nlohmann::ordered_json j;
    j["genotype_file"] = genotype_file;
    j["expression_file"] = expression_file;
    j["pathway_map_file"] = pathway_map_file;
    auto names = [](const std::vector<DistanceMeasure>& ms) {
        std::vector<std::string> out;
        out.reserve(ms.size());
        for (auto m : ms) out.emplace_back(measure_name(m));
        return out;
    };
    j["gen_measures"] = names(gen_measures);
    j["gex_measures"] = names(gex_measures);
    j["method"] = method;
    if (method == "monte_carlo") j["n_permutations"] = n_permutations;
    j["seed"] = seed.value_or(0);
    j["min_features"] = min_features;
    j["max_features"] = max_features;
    j["workers"] = workers;
    return j;
}

namespace detail {

inline std::vector<PathwayBlocks> parse_pathway_map_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open pathway map: " + path);
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("pathway map is not valid JSON: " + std::string(e.what()));
    }
    std::vector<PathwayBlocks> out;
    for (const auto& [id, blocks] : j.items()) {
        PathwayBlocks pw;
        pw.id = id;
        if (!blocks.is_object())
            throw ValidationError("pathway '" + id + "' must map to {genotype: [...], expression: [...]}");
        if (blocks.contains("genotype"))
            for (const auto& c : blocks["genotype"]) pw.genotype_cols.push_back(c.get<int>());
        if (blocks.contains("expression"))
            for (const auto& c : blocks["expression"]) pw.expression_cols.push_back(c.get<int>());
        out.push_back(std::move(pw));
    }
    return out;
}

inline std::vector<PathwayBlocks> parse_pathway_map_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open pathway map: " + path);
    std::vector<PathwayBlocks> out;
    std::unordered_map<std::string, std::size_t> index;
    std::string line;
    std::size_t lineno = 0;
    char delim = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        if (delim == 0) delim = line.find('\t') != std::string::npos ? '\t' : ',';
        const auto fields = detail::split_line(line, delim);
        if (fields.size() != 3)
            throw IoError("pathway map line " + std::to_string(lineno) +
                          ": expected pathway_id,block,column_index");
        const std::string id{detail::trim(fields[0])};
        const std::string block{detail::trim(fields[1])};
        const std::string col_text{detail::trim(fields[2])};
        if (lineno == 1 && block == "block") continue;  // header row
        int col = -1;
        try {
            col = std::stoi(col_text);
        } catch (const std::exception&) {
            throw IoError("pathway map line " + std::to_string(lineno) +
                          ": column_index '" + col_text + "' is not an integer");
        }
        auto [it, fresh] = index.try_emplace(id, out.size());
        if (fresh) out.push_back(PathwayBlocks{id, {}, {}});
        auto& pw = out[it->second];
        if (block == "genotype") pw.genotype_cols.push_back(col);
        else if (block == "expression") pw.expression_cols.push_back(col);
        else
            throw ValidationError("pathway map line " + std::to_string(lineno) +
                                  ": block must be 'genotype' or 'expression', got '" + block + "'");
    }
    return out;
}

inline std::vector<PathwayBlocks> parse_pathway_map(const std::string& path) {
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    if (ext == "json") return parse_pathway_map_json(path);
    return parse_pathway_map_csv(path);
}

inline Eigen::MatrixXd select_columns(const Eigen::MatrixXd& m, const std::vector<int>& cols) {
    Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = m.col(cols[c]);
    return out;
}

inline void check_columns(const std::vector<PathwayBlocks>& pathways, Eigen::Index gen_cols,
                          Eigen::Index gex_cols) {
    for (const auto& pw : pathways) {
        for (int c : pw.genotype_cols)
            if (c < 0 || c >= gen_cols)
                throw ValidationError("pathway '" + pw.id + "': genotype column " +
                                      std::to_string(c) + " outside [0, " +
                                      std::to_string(gen_cols - 1) + "]");
        for (int c : pw.expression_cols)
            if (c < 0 || c >= gex_cols)
                throw ValidationError("pathway '" + pw.id + "': expression column " +
                                      std::to_string(c) + " outside [0, " +
                                      std::to_string(gex_cols - 1) + "]");
    }
    std::unordered_set<std::string> ids;
    for (const auto& pw : pathways)
        if (!ids.insert(pw.id).second) throw ValidationError("duplicate pathway id: " + pw.id);
}

inline DistanceMatrix scan_distances(const Eigen::MatrixXd& block, DistanceMeasure measure) {
    if (is_genotype_measure(measure))
        return pairwise_genotype(GenotypeMatrix::from_real(block), measure);
    return pairwise_real(RealMatrix::from_values(block), measure);
}

}  // namespace detail

// Runs the full pathway x measure-pair grid. Pathways failing the feature
// filter are skipped up front; individual measure-pair failures (degenerate
// distances, singular covariance) are marked and do not abort the scan. Tasks
// run in parallel with per-task seeds derived from (seed, pathway, pair), so
// reports are identical under any worker count.
inline ScanReport run_scan(const ScanManifest& manifest) {
    manifest.validate();
    const Eigen::MatrixXd genotype = read_dense_matrix(manifest.genotype_file);
    const Eigen::MatrixXd expression = read_dense_matrix(manifest.expression_file);
    if (genotype.rows() != expression.rows())
        throw ValidationError("sample counts differ: genotype has " +
                              std::to_string(genotype.rows()) + " rows, expression has " +
                              std::to_string(expression.rows()));

    bool needs_genotype_entries = false;
    for (auto m : manifest.gen_measures) needs_genotype_entries |= is_genotype_measure(m);
    if (needs_genotype_entries) {
        Eigen::Index bad = 0;
        for (Eigen::Index i = 0; i < genotype.size(); ++i) {
            const double v = genotype.data()[i];
            if (v != 0.0 && v != 1.0 && v != 2.0) ++bad;
        }
        if (bad > 0)
            throw ValidationError("genotype matrix has " + std::to_string(bad) +
                                  " entries outside {0,1,2}");
    }

    const auto pathways = detail::parse_pathway_map(manifest.pathway_map_file);
    if (pathways.empty()) throw ValidationError("pathway map lists no pathways");
    detail::check_columns(pathways, genotype.cols(), expression.cols());

    ScanReport report;
    report.config = manifest.to_json();
    const std::uint64_t seed = manifest.seed.value_or(0);

    std::vector<const PathwayBlocks*> retained;
    for (const auto& pw : pathways) {
        const auto ngen = static_cast<int>(pw.genotype_cols.size());
        const auto ngex = static_cast<int>(pw.expression_cols.size());
        const bool ok_gen = ngen >= manifest.min_features && ngen <= manifest.max_features;
        const bool ok_gex = ngex >= manifest.min_features && ngex <= manifest.max_features;
        if (ok_gen && ok_gex) {
            retained.push_back(&pw);
            continue;
        }
        std::ostringstream why;
        why << "feature counts (genotype " << ngen << ", expression " << ngex << ") outside ["
            << manifest.min_features << ", " << manifest.max_features << "]";
        report.skipped.push_back(ScanSkip{pw.id, "filter", why.str()});
    }

    struct Task {
        std::size_t pathway;  // index into retained
        std::size_t gen;
        std::size_t gex;
    };
    std::vector<Task> tasks;
    tasks.reserve(retained.size() * manifest.gen_measures.size() * manifest.gex_measures.size());
    for (std::size_t p = 0; p < retained.size(); ++p)
        for (std::size_t g = 0; g < manifest.gen_measures.size(); ++g)
            for (std::size_t x = 0; x < manifest.gex_measures.size(); ++x)
                tasks.push_back(Task{p, g, x});

    struct Slot {
        bool ok = false;
        TestResult result;
        std::string failure;
    };
    std::vector<Slot> slots(tasks.size());
    const unsigned workers = resolve_workers(manifest.workers);
    parallel_for(tasks.size(), workers, [&](std::size_t t) {
        const Task& task = tasks[t];
        const PathwayBlocks& pw = *retained[task.pathway];
        const DistanceMeasure gen_m = manifest.gen_measures[task.gen];
        const DistanceMeasure gex_m = manifest.gex_measures[task.gex];
        try {
            const DistanceMatrix dx =
                detail::scan_distances(detail::select_columns(genotype, pw.genotype_cols), gen_m);
            const DistanceMatrix dy = detail::scan_distances(
                detail::select_columns(expression, pw.expression_cols), gex_m);
            const GramMatrix gx = gower_center(dx);
            const GramMatrix gy = gower_center(dy);
            if (manifest.method == "analytic") {
                slots[t].result = grv_pvalue_analytic(gx, gy);
            } else {
                slots[t].result = grv_pvalue_permutation(
                    gx, gy, manifest.n_permutations,
                    derive_seed(seed, {task.pathway, task.gen, task.gex}));
            }
            slots[t].ok = true;
        } catch (const NumericError& e) {
            slots[t].failure = e.what();
        }
    });

    std::unordered_map<std::string, std::vector<double>> per_pathway;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const Task& task = tasks[t];
        const PathwayBlocks& pw = *retained[task.pathway];
        const DistanceMeasure gen_m = manifest.gen_measures[task.gen];
        const DistanceMeasure gex_m = manifest.gex_measures[task.gex];
        if (slots[t].ok) {
            report.rows.push_back(ScanRow{pw.id, gen_m, gex_m, slots[t].result});
            report.total_permutations += slots[t].result.n_permutations;
            per_pathway[pw.id].push_back(slots[t].result.p_value);
        } else {
            report.skipped.push_back(ScanSkip{
                pw.id, std::string(measure_name(gen_m)) + "x" + measure_name(gex_m),
                slots[t].failure});
        }
    }

    for (const auto* pw : retained) {
        const auto it = per_pathway.find(pw->id);
        if (it == per_pathway.end()) {
            report.skipped.push_back(
                ScanSkip{pw->id, "combine", "no measure pair produced a p-value"});
            continue;
        }
        report.combined.push_back(CombinedRow{pw->id, combine_maxp(it->second), it->second.size()});
    }
    std::sort(report.combined.begin(), report.combined.end(),
              [](const CombinedRow& a, const CombinedRow& b) {
                  if (a.p_value != b.p_value) return a.p_value < b.p_value;
                  return a.pathway < b.pathway;
              });
    return report;
}

inline nlohmann::ordered_json scan_report_json(const ScanReport& report) {
    nlohmann::ordered_json j;
    j["config"] = report.config;
    j["total_permutations"] = report.total_permutations;
    j["results"] = nlohmann::ordered_json::array();
    for (const auto& row : report.rows) {
        auto r = row.result.to_json();
        nlohmann::ordered_json entry;
        entry["pathway"] = row.pathway;
        entry["gen_measure"] = measure_name(row.gen_measure);
        entry["gex_measure"] = measure_name(row.gex_measure);
        entry.update(r);
        j["results"].push_back(std::move(entry));
    }
    j["combined"] = nlohmann::ordered_json::array();
    for (const auto& row : report.combined) {
        nlohmann::ordered_json entry;
        entry["pathway"] = row.pathway;
        entry["p_value"] = row.p_value;
        entry["tests"] = row.tests;
        j["combined"].push_back(std::move(entry));
    }
    j["skipped"] = nlohmann::ordered_json::array();
    for (const auto& s : report.skipped) {
        nlohmann::ordered_json entry;
        entry["pathway"] = s.pathway;
        entry["stage"] = s.stage;
        entry["reason"] = s.reason;
        j["skipped"].push_back(std::move(entry));
    }
    return j;
}

// results.csv, results.json, and skipped.csv under out_dir, with fixed
// formatting so repeated runs of the same manifest are byte-identical.
inline void write_scan_report(const ScanReport& report, const std::string& out_dir) {
    const std::string base = out_dir.empty() ? "." : out_dir;
    std::error_code ec;
    std::filesystem::create_directories(base, ec);
    if (ec) throw IoError("cannot create output directory " + base + ": " + ec.message());
    {
        std::ofstream out(base + "/results.csv");
        if (!out) throw IoError("cannot write " + base + "/results.csv");
        out << "pathway,gen_measure,gex_measure,statistic,p_value,method,n_permutations\n";
        for (const auto& row : report.rows) {
            out << row.pathway << ',' << measure_name(row.gen_measure) << ','
                << measure_name(row.gex_measure) << ',' << format_double(row.result.statistic)
                << ',' << format_double(row.result.p_value) << ','
                << method_name(row.result.method) << ',' << row.result.n_permutations << '\n';
        }
        out << "\n# combined (maxP over measure pairs), ranked\n";
        out << "pathway,combined_p,tests\n";
        for (const auto& row : report.combined)
            out << row.pathway << ',' << format_double(row.p_value) << ',' << row.tests << '\n';
        if (!out) throw IoError("failed writing " + base + "/results.csv");
    }
    {
        std::ofstream out(base + "/results.json");
        if (!out) throw IoError("cannot write " + base + "/results.json");
        out << scan_report_json(report).dump(2) << '\n';
        if (!out) throw IoError("failed writing " + base + "/results.json");
    }
    {
        std::ofstream out(base + "/skipped.csv");
        if (!out) throw IoError("cannot write " + base + "/skipped.csv");
        out << "pathway,stage,reason\n";
        for (const auto& s : report.skipped) {
            std::string reason = s.reason;
            std::replace(reason.begin(), reason.end(), ',', ';');
            out << s.pathway << ',' << s.stage << ',' << reason << '\n';
        }
        if (!out) throw IoError("failed writing " + base + "/skipped.csv");
    }
}

// Ranked pathway ids from a scan's combined table, for meta-analysis input.
inline RankedList scan_ranking(const ScanReport& report) {
    std::vector<std::string> ids;
    ids.reserve(report.combined.size());
    for (const auto& row : report.combined) ids.push_back(row.pathway);
    return RankedList::from_ids(std::move(ids));
}

}  // namespace grv
