#include "fuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fuse/baselines.hpp"
#include "json.hpp"

namespace fuse::metrics {

using nlohmann::json;

double tie_broken_accuracy(const ensemble::SelectionResult& result, std::span<const int> labels) {
    if (labels.empty()) throw UnavailableError("tie-broken accuracy needs labels");
    if (result.selected.empty()) throw DataError("empty selection for " + result.query_id);
    std::size_t correct = 0;
    for (std::size_t i : result.selected)
        if (labels[i] > 0) ++correct;
    return static_cast<double>(correct) / static_cast<double>(result.selected.size());
}

EvalReport evaluate(const dataset::Batch& batch,
                    const std::map<std::string, std::vector<ensemble::SelectionResult>>& by_method,
                    std::span<const std::size_t> ks, std::uint64_t config_hash) {
    const std::size_t nb = batch.blocks.size();
    EvalReport rep;
    rep.dataset_id = batch.manifest.dataset_id;
    rep.config_hash = config_hash;

    for (const auto& blk : batch.blocks)
        if (!blk.has_labels())
            throw UnavailableError("evaluation needs labels (query " + blk.query_id + ")");

    for (const auto& [method, results] : by_method) {
        std::vector<std::string> missing;
        std::map<std::string, const ensemble::SelectionResult*> by_query;
        for (const auto& r : results) by_query[r.query_id] = &r;
        for (const auto& blk : batch.blocks)
            if (!by_query.contains(blk.query_id)) missing.push_back(blk.query_id);
        if (!missing.empty()) {
            std::string msg = "method " + method + " missing results for:";
            for (const auto& q : missing) msg += " " + q;
            throw DataError(msg);
        }
    }

    rep.queries.resize(nb);
    double pass1 = 0.0;
    std::map<std::size_t, double> passk;
    for (std::size_t b = 0; b < nb; ++b) {
        const auto& blk = batch.blocks[b];
        QueryRow& row = rep.queries[b];
        row.query_id = blk.query_id;
        row.n = blk.n_responses();
        for (int y : blk.labels)
            if (y > 0) ++row.n_correct;
        pass1 += static_cast<double>(row.n_correct) / static_cast<double>(row.n);
        for (std::size_t k : ks) {
            const std::size_t k_eff = std::min(k == 0 ? row.n : k, row.n);
            passk[k] += baselines::pass_at_k(row.n_correct, row.n, k_eff);
        }
    }
    rep.pass_at_1 = pass1 / static_cast<double>(nb);
    for (auto& [k, v] : passk) rep.pass_at_k[k] = v / static_cast<double>(nb);

    for (const auto& [method, results] : by_method) {
        std::map<std::string, const ensemble::SelectionResult*> by_query;
        for (const auto& r : results) by_query[r.query_id] = &r;
        MethodStats stats;
        for (std::size_t b = 0; b < nb; ++b) {
            const auto& blk = batch.blocks[b];
            const auto* r = by_query.at(blk.query_id);
            const double acc = tie_broken_accuracy(*r, blk.labels);
            stats.selection_accuracy += acc;
            if (r->fallback) stats.fallback_rate += 1.0;
            rep.queries[b].per_method_accuracy[method] = acc;
        }
        stats.selection_accuracy /= static_cast<double>(nb);
        stats.fallback_rate /= static_cast<double>(nb);
        rep.methods[method] = stats;
    }
    return rep;
}

double balanced_accuracy_extended(std::span<const double> scores, std::span<const int> labels) {
    double pos = 0.0, neg = 0.0;
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] > 0) {
            pos += 0.5 * (1.0 + scores[i]);
            ++n_pos;
        } else {
            neg += 0.5 * (1.0 - scores[i]);
            ++n_neg;
        }
    }
    if (n_pos == 0 || n_neg == 0) throw DataError("balanced accuracy needs both classes");
    return 0.5 * (pos / static_cast<double>(n_pos) + neg / static_cast<double>(n_neg));
}

double balanced_accuracy_binary(std::span<const double> verdicts, std::span<const int> labels) {
    return balanced_accuracy_extended(verdicts, labels);
}

std::string report_to_json(const EvalReport& rep) {
    json doc;
    doc["dataset_id"] = rep.dataset_id;
    doc["config_hash"] = rep.config_hash;
    doc["pass_at_1"] = rep.pass_at_1;
    json pk = json::object();
    for (const auto& [k, v] : rep.pass_at_k) pk[k == 0 ? "N" : std::to_string(k)] = v;
    doc["pass_at_k"] = std::move(pk);
    json methods = json::object();
    for (const auto& [m, s] : rep.methods)
        methods[m] = {{"selection_accuracy", s.selection_accuracy},
                      {"fallback_rate", s.fallback_rate}};
    doc["methods"] = std::move(methods);
    json queries = json::array();
    for (const auto& q : rep.queries) {
        json row = {{"query_id", q.query_id}, {"n", q.n}, {"n_correct", q.n_correct}};
        row["per_method_accuracy"] = q.per_method_accuracy;
        queries.push_back(std::move(row));
    }
    doc["queries"] = std::move(queries);
    return doc.dump(2);
}

std::string report_to_table(const EvalReport& rep) {
    std::ostringstream out;
    out << "dataset: " << rep.dataset_id << "   queries: " << rep.queries.size() << "\n";
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-24s %12s %10s\n", "method", "accuracy", "fallback");
    out << buf;
    std::snprintf(buf, sizeof buf, "%-24s %11.4f%%\n", "pass@1", 100.0 * rep.pass_at_1);
    out << buf;
    for (const auto& [k, v] : rep.pass_at_k) {
        const std::string name = k == 0 ? "pass@N" : "pass@" + std::to_string(k);
        std::snprintf(buf, sizeof buf, "%-24s %11.4f%%\n", name.c_str(), 100.0 * v);
        out << buf;
    }
    for (const auto& [m, s] : rep.methods) {
        std::snprintf(buf, sizeof buf, "%-24s %11.4f%% %9.2f%%\n", m.c_str(),
                      100.0 * s.selection_accuracy, 100.0 * s.fallback_rate);
        out << buf;
    }
    return out.str();
}

}  // namespace fuse::metrics
