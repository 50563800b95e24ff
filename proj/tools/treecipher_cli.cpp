#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "treecipher/analytics.hpp"
#include "treecipher/dag.hpp"
#include "treecipher/dag_rw.hpp"
#include "treecipher/miner.hpp"
#include "treecipher/solver.hpp"
#include "treecipher/synthgen.hpp"

namespace tc = treecipher;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNotIso = 1;
constexpr int kExitUsage = 2;
constexpr int kExitUnknown = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

tc::LabeledTree read_tree_file(const std::string& path) {
    std::string text = read_file(path);
    std::size_t i = 0;
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' || text[i] == '\r'))
        ++i;
    if (i < text.size() && text[i] == '{') return tc::tree_from_json(text);
    // strip trailing whitespace/newline for the text format
    std::size_t e = text.size();
    while (e > i && (text[e - 1] == ' ' || text[e - 1] == '\n' || text[e - 1] == '\r' || text[e - 1] == '\t'))
        --e;
    return tc::parse_tree(std::string_view(text).substr(i, e - i));
}

std::string format_tree(const tc::LabeledTree& t, const std::string& fmt) {
    if (fmt == "json") return tc::tree_to_json(t) + "\n";
    return tc::serialize_tree(t) + "\n";
}

nlohmann::json trace_json(const tc::SearchTrace& trace) {
    nlohmann::json j;
    auto& snaps = j["snapshots"] = nlohmann::json::array();
    for (const auto& [tag, n] : trace.snapshots)
        snaps.push_back({{"phase", tag}, {"size", n.str()}});
    j["states_visited"] = trace.states_visited;
    j["deductions"] = {{"rule1", trace.deductions.rule1},
                       {"rule2", trace.deductions.rule2},
                       {"rule3", trace.deductions.rule3},
                       {"rule4", trace.deductions.rule4}};
    j["map_nodes_calls"] = trace.map_nodes_calls_total;
    return j;
}

struct Range {
    long long start = 0, stop = 0, step = 1;
};

Range parse_range(const std::string& text) {
    Range r;
    char c1, c2;
    std::istringstream ss(text);
    if (!(ss >> r.start)) throw std::runtime_error("bad range: " + text);
    if (ss >> c1 >> r.stop) {
        if (!(ss >> c2 >> r.step)) r.step = 1;
    } else {
        r.stop = r.start;
    }
    if (r.step <= 0) throw std::runtime_error("range step must be positive");
    return r;
}

std::vector<double> parse_prop_range(const std::string& text) {
    // "0.1:0.9:0.1" or a single value
    std::vector<double> out;
    double start, stop, step = 1.0;
    char c;
    std::istringstream ss(text);
    if (!(ss >> start)) throw std::runtime_error("bad proportion range: " + text);
    if (ss >> c >> stop) {
        if (!(ss >> c >> step)) step = 1.0;
        for (double p = start; p <= stop + 1e-9; p += step) out.push_back(p);
    } else {
        out.push_back(start);
    }
    return out;
}

int worker_count() {
    const char* env = std::getenv("TREECIPHER_THREADS");
    int n = env ? std::atoi(env) : 1;
    if (n == 0) n = static_cast<int>(std::thread::hardware_concurrency());
    return std::max(1, n);
}

int run_iso(const std::string& a, const std::string& b, const std::string& relation,
            std::optional<long long> step_limit, const std::string& trace_path) {
    tc::LabeledTree t1 = read_tree_file(a), t2 = read_tree_file(b);
    nlohmann::json out;
    int code;
    if (relation == "topo" || relation == "label") {
        bool iso = relation == "topo" ? tc::topo_isomorphic(t1, t2)
                                      : tc::label_isomorphic(t1, t2);
        out["verdict"] = iso ? "isomorphic" : "not_isomorphic";
        code = iso ? kExitOk : kExitNotIso;
    } else {
        tc::IsoResult r = tc::is_ciphering_isomorphic(t1, t2, step_limit);
        out["verdict"] = tc::verdict_name(r.verdict);
        out["states_visited"] = r.trace.states_visited;
        if (r.mapping) {
            auto& m = out["mapping"] = nlohmann::json::array();
            const auto& rank1 = t1.preorder_rank();
            const auto& rank2 = t2.preorder_rank();
            for (tc::NodeId u = 0; u < t1.size(); ++u)
                m.push_back({rank1[u], rank2[(*r.mapping)[u]]});
        }
        if (r.cipher) {
            auto& c = out["cipher"] = nlohmann::json::array();
            for (const auto& [x, y] : *r.cipher) c.push_back({x, y});
        }
        auto& snaps = out["snapshots"] = nlohmann::json::array();
        for (const auto& [tag, n] : r.trace.snapshots)
            snaps.push_back({{"phase", tag}, {"size", n.str()}});
        if (!trace_path.empty()) write_file(trace_path, trace_json(r.trace).dump(2) + "\n");
        code = r.verdict == tc::Verdict::Isomorphic  ? kExitOk
               : r.verdict == tc::Verdict::Unknown   ? kExitUnknown
                                                     : kExitNotIso;
    }
    std::cout << out.dump(2) << "\n";
    return code;
}

int run_bench(const std::string& sizes, const std::string& props, int reps,
              std::uint64_t seed, const std::string& pair, const std::string& out_csv,
              const std::string& summary_path) {
    Range nr = parse_range(sizes);
    std::vector<double> ps = parse_prop_range(props);
    tc::PairKind kind = tc::pair_kind_from_name(pair);
    if (kind == tc::PairKind::Single) throw std::runtime_error("bench needs iso or noniso pairs");

    struct Row {
        int n;
        double p;
        int rep;
        std::string verdict;
        long long states = 0;
        std::string n_final = "0";
        long long wall_ns = 0;
    };
    std::vector<Row> rows;
    for (long long n = nr.start; n <= nr.stop; n += nr.step)
        for (double p : ps)
            for (int rep = 0; rep < reps; ++rep)
                rows.push_back(Row{static_cast<int>(n), p, rep, "", 0, "0", 0});

    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= rows.size()) return;
            Row& row = rows[i];
            std::uint64_t task_seed = seed;
            task_seed = task_seed * 1000003 + row.n;
            task_seed = task_seed * 1000003 + static_cast<std::uint64_t>(row.p * 1000);
            task_seed = task_seed * 1000003 + row.rep;
            tc::GenSpec spec{row.n, row.p, task_seed, kind};
            std::pair<tc::LabeledTree, tc::LabeledTree> pr =
                kind == tc::PairKind::IsoPair ? tc::gen_iso_pair(spec)
                                              : tc::gen_noniso_pair_resampling(spec);
            auto t0 = std::chrono::steady_clock::now();
            tc::IsoResult r = tc::is_ciphering_isomorphic(pr.first, pr.second);
            auto t1 = std::chrono::steady_clock::now();
            row.verdict = tc::verdict_name(r.verdict);
            row.states = r.trace.states_visited;
            if (!r.trace.snapshots.empty()) row.n_final = r.trace.snapshots.back().second.str();
            row.wall_ns =
                std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
        }
    };
    {
        std::vector<std::thread> pool;
        for (int w = 0; w < worker_count(); ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    std::ostringstream csv;
    csv << "n,p,rep,pair_kind,verdict,states_visited,deduction_N_final,wall_time_ns\n";
    for (const Row& r : rows)
        csv << r.n << "," << r.p << "," << r.rep << "," << pair << "," << r.verdict << ","
            << r.states << "," << r.n_final << "," << r.wall_ns << "\n";
    if (out_csv == "-")
        std::cout << csv.str();
    else
        write_file(out_csv, csv.str());

    // summary: per-(n, p) quantiles and outlier fraction (> 50x median)
    nlohmann::json summary;
    summary["rows"] = rows.size();
    auto& groups = summary["groups"] = nlohmann::json::array();
    for (long long n = nr.start; n <= nr.stop; n += nr.step) {
        for (double p : ps) {
            std::vector<long long> times;
            for (const Row& r : rows)
                if (r.n == n && r.p == p) times.push_back(r.wall_ns);
            if (times.empty()) continue;
            std::sort(times.begin(), times.end());
            auto quantile = [&](double q) {
                std::size_t idx = static_cast<std::size_t>(q * (times.size() - 1) + 0.5);
                return times[std::min(idx, times.size() - 1)];
            };
            long long median = quantile(0.5);
            int outliers = 0;
            for (long long t : times) outliers += (t > 50 * median);
            groups.push_back({{"n", n},
                              {"p", p},
                              {"count", times.size()},
                              {"q5_ns", quantile(0.05)},
                              {"median_ns", median},
                              {"q95_ns", quantile(0.95)},
                              {"outlier_fraction",
                               static_cast<double>(outliers) / times.size()}});
        }
    }
    if (!summary_path.empty())
        write_file(summary_path, summary.dump(2) + "\n");
    else if (out_csv != "-")
        std::cout << summary.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tree ciphering isomorphism, DAG / DAG-RW compression, and pattern mining"};
    app.require_subcommand(1);

    // iso
    std::string iso_a, iso_b, iso_relation = "cipher", iso_trace;
    long long iso_limit = -1;
    auto* iso = app.add_subcommand("iso", "decide isomorphism between two trees");
    iso->add_option("A", iso_a, "first tree file")->required();
    iso->add_option("B", iso_b, "second tree file")->required();
    iso->add_option("--relation", iso_relation, "topo|label|cipher")
        ->check(CLI::IsMember({"topo", "label", "cipher"}));
    iso->add_option("--step-limit", iso_limit, "max backtracking states");
    iso->add_option("--trace", iso_trace, "write the solve trace JSON here");

    // compress
    std::string cmp_in, cmp_relation = "cipher", cmp_out, cmp_dot;
    long long cmp_limit = -1;
    auto* cmp = app.add_subcommand("compress", "compress a tree into DAG / DAG-RW form");
    cmp->add_option("IN", cmp_in, "tree file")->required();
    cmp->add_option("--relation", cmp_relation, "topo|label|cipher")
        ->check(CLI::IsMember({"topo", "label", "cipher"}));
    cmp->add_option("--out", cmp_out, "output JSON path")->required();
    cmp->add_option("--dot", cmp_dot, "also write DOT here");
    cmp->add_option("--step-limit", cmp_limit, "per-test state limit (cipher only)");

    // decompress
    std::string dec_in, dec_out, dec_fmt = "text";
    auto* dec = app.add_subcommand("decompress", "rebuild a tree from DAG / DAG-RW JSON");
    dec->add_option("IN", dec_in, "DAG JSON file")->required();
    dec->add_option("--out", dec_out, "output tree path")->required();
    dec->add_option("--tree-format", dec_fmt, "text|json")
        ->check(CLI::IsMember({"text", "json"}));

    // mine
    std::string mine_in, mine_relation = "cipher", mine_out, mine_format = "json";
    double mine_support = 0.05;
    long long mine_limit = -1;
    bool mine_csv = false, mine_summary = false;
    auto* mn = app.add_subcommand("mine", "frequent subtree patterns over a dataset");
    mn->add_option("DATASET", mine_in, "one tree per line, # comments")->required();
    mn->add_option("--relation", mine_relation, "topo|label|cipher")
        ->check(CLI::IsMember({"topo", "label", "cipher"}));
    mn->add_option("--min-support", mine_support, "frequency threshold in (0,1]");
    mn->add_option("--out", mine_out, "output path (default stdout)");
    mn->add_option("--step-limit", mine_limit, "per-test state limit (cipher only)");
    mn->add_flag("--csv", mine_csv, "emit pattern,size,frequency,origin_count CSV");
    mn->add_option("--format", mine_format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    mn->add_flag("--summary", mine_summary,
                 "emit pattern and frequent-pattern counts for all three relations");

    // gen
    int gen_nodes = 1;
    double gen_prop = 1.0;
    std::uint64_t gen_seed = 0;
    std::string gen_pair = "single", gen_prefix, gen_fmt = "text";
    auto* gn = app.add_subcommand("gen", "generate random instances");
    gn->add_option("--nodes", gen_nodes, "tree size")->required();
    gn->add_option("--label-prop", gen_prop, "target distinct-label proportion")->required();
    gn->add_option("--seed", gen_seed, "64-bit seed")->required();
    gn->add_option("--pair", gen_pair, "iso|noniso|single")
        ->check(CLI::IsMember({"iso", "noniso", "single"}));
    gn->add_option("--out", gen_prefix, "output prefix (.1.tree / .2.tree)")->required();
    gn->add_option("--tree-format", gen_fmt, "text|json")->check(CLI::IsMember({"text", "json"}));

    // bench
    std::string bench_sizes = "50:500:50", bench_props = "0.1:0.9:0.1", bench_pair = "iso";
    std::string bench_out = "-", bench_summary;
    int bench_reps = 0;
    std::uint64_t bench_seed = 0;
    auto* bn = app.add_subcommand("bench", "timing study over random pairs");
    bn->add_option("--sizes", bench_sizes, "start:stop:step node counts");
    bn->add_option("--props", bench_props, "start:stop:step label proportions");
    bn->add_option("--reps", bench_reps, "pairs per (n,p) cell")->required();
    bn->add_option("--seed", bench_seed, "64-bit seed")->required();
    bn->add_option("--pair", bench_pair, "iso|noniso")->check(CLI::IsMember({"iso", "noniso"}));
    bn->add_option("--out", bench_out, "CSV path or - for stdout");
    bn->add_option("--summary", bench_summary, "write per-(n,p) quantile JSON here");

    // model
    long long model_an = -1;
    std::string model_f;
    std::vector<long long> model_delta;
    auto* md = app.add_subcommand("model", "backtracking-tree size model");
    md->add_option("--a-n", model_an, "evaluate a_n");
    md->add_option("--f", model_f, "evaluate variadic f over \"n:alpha,n:alpha,...\"");
    md->add_option("--delta", model_delta, "evaluate delta_f over m n alpha beta")
        ->expected(4);

    // stats
    std::string stats_in, stats_relation = "cipher";
    long long stats_limit = -1;
    auto* st = app.add_subcommand("stats", "compression statistics of a tree");
    st->add_option("INPUT", stats_in, "tree file")->required();
    st->add_option("--relation", stats_relation, "topo|label|cipher")
        ->check(CLI::IsMember({"topo", "label", "cipher"}));
    st->add_option("--step-limit", stats_limit, "per-test state limit (cipher only)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        auto limit_opt = [](long long v) {
            return v >= 0 ? std::optional<long long>(v) : std::nullopt;
        };

        if (iso->parsed())
            return run_iso(iso_a, iso_b, iso_relation, limit_opt(iso_limit), iso_trace);

        if (cmp->parsed()) {
            tc::LabeledTree t = read_tree_file(cmp_in);
            if (cmp_relation == "cipher") {
                tc::DagRw d = tc::compress_rw(t, limit_opt(cmp_limit));
                write_file(cmp_out, tc::dag_rw_to_json(d) + "\n");
                if (!cmp_dot.empty()) write_file(cmp_dot, tc::dag_rw_to_dot(d));
            } else {
                tc::Dag d = tc::compress(t, tc::relation_from_name(cmp_relation));
                write_file(cmp_out, tc::dag_to_json(d) + "\n");
                if (!cmp_dot.empty()) write_file(cmp_dot, tc::dag_to_dot(d));
            }
            return kExitOk;
        }

        if (dec->parsed()) {
            std::string text = read_file(dec_in);
            nlohmann::json j = nlohmann::json::parse(text);
            tc::LabeledTree t = j.contains("relation")
                                    ? tc::decompress(tc::dag_from_json(text))
                                    : tc::decompress_rw(tc::dag_rw_from_json(text));
            write_file(dec_out, format_tree(t, dec_fmt));
            return kExitOk;
        }

        if (mn->parsed()) {
            auto dataset = tc::parse_dataset(read_file(mine_in));
            if (mine_summary) {
                tc::PatternCounts counts = tc::pattern_counts(dataset, limit_opt(mine_limit));
                nlohmann::json j;
                j["data"] = dataset.size();
                j["min_support"] = mine_support;
                auto freq = [&](tc::Relation r) {
                    return tc::mine(dataset, r, mine_support, limit_opt(mine_limit))
                        .entries.size();
                };
                j["relations"] = {
                    {"topo",
                     {{"patterns", counts.topo}, {"frequent_patterns", freq(tc::Relation::Topo)}}},
                    {"cipher",
                     {{"patterns", counts.cipher},
                      {"frequent_patterns", freq(tc::Relation::Cipher)}}},
                    {"label",
                     {{"patterns", counts.label},
                      {"frequent_patterns", freq(tc::Relation::Label)}}}};
                std::string out = j.dump(2) + "\n";
                mine_out.empty() ? (void)(std::cout << out) : write_file(mine_out, out);
                return kExitOk;
            }
            tc::PatternReport report = tc::mine(dataset, tc::relation_from_name(mine_relation),
                                                mine_support, limit_opt(mine_limit));
            std::string out = (mine_csv || mine_format == "csv")
                                  ? tc::report_to_csv(report)
                                  : tc::report_to_json(report) + "\n";
            mine_out.empty() ? (void)(std::cout << out) : write_file(mine_out, out);
            return kExitOk;
        }

        if (gn->parsed()) {
            tc::GenSpec spec{gen_nodes, gen_prop, gen_seed,
                             tc::pair_kind_from_name(gen_pair)};
            spec.validate();
            if (spec.pair_kind == tc::PairKind::Single) {
                write_file(gen_prefix + ".1.tree", format_tree(tc::gen_tree(spec), gen_fmt));
            } else {
                auto [t1, t2] = spec.pair_kind == tc::PairKind::IsoPair
                                    ? tc::gen_iso_pair(spec)
                                    : tc::gen_noniso_pair_resampling(spec);
                write_file(gen_prefix + ".1.tree", format_tree(t1, gen_fmt));
                write_file(gen_prefix + ".2.tree", format_tree(t2, gen_fmt));
            }
            return kExitOk;
        }

        if (bn->parsed())
            return run_bench(bench_sizes, bench_props, bench_reps, bench_seed, bench_pair,
                             bench_out, bench_summary);

        if (md->parsed()) {
            if (model_an >= 0) {
                std::cout << tc::a_n(static_cast<int>(model_an)).str() << "\n";
            } else if (!model_f.empty()) {
                tc::TupleSeq seq;
                std::istringstream ss(model_f);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    auto colon = item.find(':');
                    if (colon == std::string::npos)
                        throw std::runtime_error("expected n:alpha, got " + item);
                    seq.push_back(tc::ModelTuple{std::stoi(item.substr(0, colon)),
                                                 std::stoi(item.substr(colon + 1))});
                }
                std::cout << tc::f_variadic(seq).str() << "\n";
            } else if (!model_delta.empty()) {
                std::cout << tc::delta_f(static_cast<int>(model_delta[0]),
                                         static_cast<int>(model_delta[1]),
                                         static_cast<int>(model_delta[2]),
                                         static_cast<int>(model_delta[3]))
                                 .str()
                          << "\n";
            } else {
                throw std::runtime_error("model needs one of --a-n, --f, --delta");
            }
            return kExitOk;
        }

        if (st->parsed()) {
            tc::LabeledTree t = read_tree_file(stats_in);
            nlohmann::json j;
            if (stats_relation == "cipher") {
                tc::RwStats s = tc::rw_stats(tc::compress_rw(t, limit_opt(stats_limit)));
                j = {{"relation", "cipher"},
                     {"vertex_count", s.vertex_count},
                     {"edge_count", s.edge_count},
                     {"cipher_payload", s.cipher_payload},
                     {"identity_edge_count", s.identity_edge_count}};
            } else {
                tc::DagStats s =
                    tc::dag_stats(tc::compress(t, tc::relation_from_name(stats_relation)));
                j = {{"relation", stats_relation},
                     {"vertex_count", s.vertex_count},
                     {"edge_count", s.edge_count},
                     {"compaction_ratio", s.compaction_ratio}};
            }
            std::cout << j.dump(2) << "\n";
            return kExitOk;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
