// Command-line front end: synth, run, eval, inspect.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 partial success
// (some requested methods were skipped).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "fuse/baselines.hpp"
#include "fuse/config.hpp"
#include "fuse/core.hpp"
#include "fuse/dataset.hpp"
#include "fuse/diagnostics.hpp"
#include "fuse/ensemble.hpp"
#include "fuse/metrics.hpp"
#include "fuse/synth.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitPartial = 4;

std::string slurp_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw fuse::ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Environment overrides are restricted to io paths.
void apply_env_overrides(fuse::RunConfig& cfg) {
    if (const char* v = std::getenv("FUSE_MANIFEST")) cfg.manifest_path = v;
    if (const char* v = std::getenv("FUSE_RECORDS")) cfg.records_path = v;
    if (const char* v = std::getenv("FUSE_OUT")) cfg.out_path = v;
}

fuse::RunConfig parse_run_config(const json& doc) {
    fuse::RunConfig cfg;
    const std::string mode = doc.value("mode", "query");
    if (mode == "query")
        cfg.mode = fuse::RunConfig::Mode::query;
    else if (mode == "batched")
        cfg.mode = fuse::RunConfig::Mode::batched;
    else
        throw fuse::ConfigError("mode must be query or batched");
    cfg.methods = doc.value("methods", std::vector<std::string>{});
    for (const auto& m : cfg.methods)
        if (!fuse::baselines::is_method(m)) throw fuse::ConfigError("unknown method id: " + m);
    cfg.clip_delta = doc.value("clip_delta", 1e-3);
    cfg.reg = doc.value("reg", 1e-3);
    cfg.max_sweeps = doc.value("max_sweeps", 10);
    if (doc.contains("ks")) cfg.ks = doc["ks"].get<std::vector<std::size_t>>();
    cfg.seed = doc.value("seed", std::uint64_t{0});
    cfg.label_fraction = doc.value("label_fraction", 0.05);
    cfg.fallback_policy = doc.value("fallback", "naive-ensemble");
    if (cfg.fallback_policy != "naive-ensemble" && cfg.fallback_policy != "uniform")
        throw fuse::ConfigError("fallback must be naive-ensemble or uniform");
    cfg.workers = doc.value("workers", 0);
    cfg.manifest_path = doc.value("manifest", "");
    cfg.records_path = doc.value("records", "");
    cfg.out_path = doc.value("out", "");
    if (doc.contains("flags")) {
        const auto& f = doc["flags"];
        cfg.flags.pass1_literal = f.value("pass1_literal", false);
        cfg.flags.eq9_compat = f.value("eq9_compat", false);
        cfg.flags.tci_index_alt = f.value("tci_index_alt", false);
        cfg.flags.global_norm = f.value("global_norm", false);
    }
    if (cfg.clip_delta <= 0.0) throw fuse::ConfigError("clip_delta must be positive");
    if (cfg.reg < 0.0) throw fuse::ConfigError("reg must be nonnegative");
    if (cfg.max_sweeps < 1) throw fuse::ConfigError("max_sweeps must be at least 1");
    return cfg;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
    const fuse::synth::SynthSpec spec = fuse::synth::parse_spec_json(slurp_file(spec_path));
    const fuse::dataset::Batch batch = fuse::synth::generate(spec);
    std::filesystem::create_directories(out_dir);
    fuse::dataset::write_manifest(batch.manifest, out_dir + "/manifest.json");
    fuse::dataset::write_records(batch, out_dir + "/records.jsonl");
    std::cout << "wrote " << out_dir << "/manifest.json and records.jsonl (" << batch.blocks.size()
              << " queries x " << spec.n << " responses x " << spec.m << " verifiers)\n";
    return kExitOk;
}

int cmd_run(fuse::RunConfig cfg, const std::string& diagnostics_dir, bool emit_scores) {
    apply_env_overrides(cfg);
    if (cfg.manifest_path.empty() || cfg.records_path.empty() || cfg.out_path.empty())
        throw fuse::ConfigError("run needs manifest, records and out paths");

    fuse::dataset::LoadOptions lopt;
    lopt.global_normalization = cfg.flags.global_norm;
    const fuse::dataset::Batch batch =
        fuse::dataset::load_dataset(cfg.manifest_path, cfg.records_path, lopt);

    std::vector<std::string> methods =
        cfg.methods.empty() ? fuse::baselines::method_ids() : cfg.methods;

    std::map<std::string, std::vector<fuse::ensemble::SelectionResult>> results;
    std::vector<std::string> skipped;
    for (const auto& id : methods) {
        try {
            if (id == "fuse" && !diagnostics_dir.empty()) {
                std::vector<fuse::BlockDiagnostics> diags;
                results[id] = fuse::ensemble::run_fuse(batch, cfg, &diags);
                std::filesystem::create_directories(diagnostics_dir);
                for (const auto& d : diags) {
                    std::ofstream out(diagnostics_dir + "/" + d.query_id + ".json");
                    out << fuse::diagnostics_to_json(d) << "\n";
                }
            } else {
                results[id] = fuse::baselines::run_method(id, batch, cfg);
            }
        } catch (const fuse::UnavailableError& e) {
            std::cerr << "notice: skipping " << id << ": " << e.what() << "\n";
            skipped.push_back(id);
        }
    }
    if (results.empty()) throw fuse::DataError("every requested method was skipped");

    std::ofstream out(cfg.out_path);
    if (!out) throw fuse::DataError("cannot write " + cfg.out_path);
    for (std::size_t b = 0; b < batch.blocks.size(); ++b) {
        const auto& blk = batch.blocks[b];
        for (const auto& id : methods) {
            auto it = results.find(id);
            if (it == results.end()) continue;
            const auto& sel = it->second[b];
            json line;
            line["query_id"] = blk.query_id;
            line["method"] = id;
            json chosen = json::array();
            for (std::size_t i : sel.selected) chosen.push_back(blk.response_ids[i]);
            line["selected"] = std::move(chosen);
            if (sel.fallback) line["fallback"] = *sel.fallback;
            if (emit_scores) line["scores"] = sel.scores;
            out << line.dump() << "\n";
        }
    }
    out.close();
    std::cout << "wrote " << cfg.out_path << " (" << batch.blocks.size() << " queries, "
              << results.size() << " methods)\n";
    return skipped.empty() ? kExitOk : kExitPartial;
}

int cmd_eval(const std::string& manifest_path, const std::string& records_path,
             const std::string& selections_path, std::vector<std::size_t> ks,
             const std::string& out_json, const std::string& out_table, bool global_norm) {
    fuse::dataset::LoadOptions lopt;
    lopt.global_normalization = global_norm;
    const fuse::dataset::Batch batch =
        fuse::dataset::load_dataset(manifest_path, records_path, lopt);

    std::map<std::string, std::size_t> block_of;
    for (std::size_t b = 0; b < batch.blocks.size(); ++b)
        block_of[batch.blocks[b].query_id] = b;

    std::map<std::string, std::vector<fuse::ensemble::SelectionResult>> by_method;
    std::ifstream in(selections_path);
    if (!in) throw fuse::DataError("cannot open " + selections_path);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw fuse::ParseError(std::string("bad selection line: ") + e.what(), lineno);
        }
        const std::string qid = rec.at("query_id").get<std::string>();
        const std::string method = rec.value("method", "unknown");
        auto bit = block_of.find(qid);
        if (bit == block_of.end())
            throw fuse::DataError("selections reference unknown query " + qid);
        const auto& blk = batch.blocks[bit->second];

        fuse::ensemble::SelectionResult sel;
        sel.query_id = qid;
        for (const auto& rid : rec.at("selected")) {
            const std::string id = rid.get<std::string>();
            const auto pos = std::find(blk.response_ids.begin(), blk.response_ids.end(), id);
            if (pos == blk.response_ids.end())
                throw fuse::DataError("selection names unknown response " + id + " for " + qid);
            sel.selected.push_back(static_cast<std::size_t>(pos - blk.response_ids.begin()));
        }
        if (rec.contains("fallback")) sel.fallback = rec["fallback"].get<std::string>();
        by_method[method].push_back(std::move(sel));
    }
    if (by_method.empty()) throw fuse::DataError("no selections in " + selections_path);

    std::string fingerprint = manifest_path + "|" + records_path + "|" + selections_path + "|" +
                              (global_norm ? "g" : "b");
    for (std::size_t k : ks) fingerprint += "|" + std::to_string(k);
    const fuse::metrics::EvalReport report =
        fuse::metrics::evaluate(batch, by_method, ks, fuse::fnv1a(fingerprint));
    const std::string table = fuse::metrics::report_to_table(report);
    std::cout << table;
    if (!out_table.empty()) {
        std::ofstream f(out_table);
        f << table;
    }
    if (!out_json.empty()) {
        std::ofstream f(out_json);
        f << fuse::metrics::report_to_json(report) << "\n";
    }
    return kExitOk;
}

int cmd_inspect(const std::string& manifest_path, const std::string& records_path,
                const std::string& query_id, const std::string& config_path) {
    fuse::RunConfig cfg;
    if (!config_path.empty()) cfg = parse_run_config(json::parse(slurp_file(config_path)));
    fuse::dataset::LoadOptions lopt;
    lopt.global_normalization = cfg.flags.global_norm;
    const fuse::dataset::Batch batch =
        fuse::dataset::load_dataset(manifest_path, records_path, lopt);

    for (const auto& blk : batch.blocks) {
        if (blk.query_id != query_id) continue;
        fuse::BlockDiagnostics diag;
        diag.query_id = blk.query_id;
        try {
            fuse::ensemble::run_pipeline(blk.norm_scores, blk.active, cfg, &diag);
        } catch (const fuse::Error& e) {
            diag.fallback = cfg.fallback_policy + " (" + e.what() + ")";
        }
        std::cout << fuse::diagnostics_to_json(diag) << "\n";
        return kExitOk;
    }
    throw fuse::DataError("unknown query id: " + query_id);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fully unsupervised verifier-score ensembling"};
    app.require_subcommand(1);

    std::string spec_path, out_dir = ".";
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--spec", spec_path, "synth spec JSON")->required();
    synth->add_option("--out-dir", out_dir, "output directory");

    std::string config_path, diagnostics_dir;
    std::string manifest_path, records_path, out_path, mode_override;
    std::vector<std::string> methods_override;
    int workers_override = -1;
    bool emit_scores = false;
    auto* run = app.add_subcommand("run", "select responses with every requested method");
    run->add_option("--config", config_path, "run config JSON");
    run->add_option("--manifest", manifest_path, "manifest path (overrides config)");
    run->add_option("--records", records_path, "records path (overrides config)");
    run->add_option("--out", out_path, "selections output path (overrides config)");
    run->add_option("--mode", mode_override, "query|batched (overrides config)");
    run->add_option("--methods", methods_override, "method ids (overrides config)");
    run->add_option("--workers", workers_override, "worker threads (overrides config)");
    run->add_option("--diagnostics", diagnostics_dir, "dump per-block estimation JSON here");
    run->add_flag("--emit-scores", emit_scores, "include per-response scores in the output");

    std::string selections_path, out_json, out_table;
    std::vector<std::size_t> ks = {1, 5, 0};
    bool global_norm = false;
    auto* eval = app.add_subcommand("eval", "score selections against labels");
    eval->add_option("--manifest", manifest_path, "manifest path")->required();
    eval->add_option("--records", records_path, "records path")->required();
    eval->add_option("--selections", selections_path, "selections JSONL")->required();
    eval->add_option("--ks", ks, "pass@k values; 0 means per-query N");
    eval->add_option("--out-json", out_json, "JSON report path");
    eval->add_option("--out-table", out_table, "table report path");
    eval->add_flag("--global-norm", global_norm, "normalize per verifier over the whole file");

    std::string query_id;
    auto* inspect = app.add_subcommand("inspect", "dump estimation diagnostics for one query");
    inspect->add_option("--manifest", manifest_path, "manifest path")->required();
    inspect->add_option("--records", records_path, "records path")->required();
    inspect->add_option("--query", query_id, "query id")->required();
    inspect->add_option("--config", config_path, "run config JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(spec_path, out_dir);
        if (run->parsed()) {
            fuse::RunConfig cfg;
            if (!config_path.empty()) cfg = parse_run_config(json::parse(slurp_file(config_path)));
            if (!manifest_path.empty()) cfg.manifest_path = manifest_path;
            if (!records_path.empty()) cfg.records_path = records_path;
            if (!out_path.empty()) cfg.out_path = out_path;
            if (!mode_override.empty()) {
                if (mode_override == "query")
                    cfg.mode = fuse::RunConfig::Mode::query;
                else if (mode_override == "batched")
                    cfg.mode = fuse::RunConfig::Mode::batched;
                else
                    throw fuse::ConfigError("mode must be query or batched");
            }
            if (!methods_override.empty()) {
                for (const auto& m : methods_override)
                    if (!fuse::baselines::is_method(m))
                        throw fuse::ConfigError("unknown method id: " + m);
                cfg.methods = methods_override;
            }
            if (workers_override >= 0) cfg.workers = workers_override;
            return cmd_run(cfg, diagnostics_dir, emit_scores);
        }
        if (eval->parsed())
            return cmd_eval(manifest_path, records_path, selections_path, ks, out_json, out_table,
                            global_norm);
        if (inspect->parsed())
            return cmd_inspect(manifest_path, records_path, query_id, config_path);
    } catch (const fuse::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fuse::ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const fuse::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
