#include "fuse/diagnostics.hpp"

#include "fuse/config.hpp"
#include "json.hpp"

namespace fuse {

using nlohmann::json;

std::string diagnostics_to_json(const BlockDiagnostics& d) {
    json doc;
    doc["query_id"] = d.query_id;
    doc["mu"] = d.mu;
    doc["u"] = d.u;
    doc["lambda3"] = d.lambda3;
    doc["b_hat"] = d.b_hat;
    doc["psi"] = d.psi;
    doc["eta"] = d.eta;
    doc["pi"] = d.pi;
    doc["quality_clip_count"] = d.quality_clip_count;
    doc["tci_clip_count"] = d.tci_clip_count;
    doc["statistic"] = d.statistic;
    doc["sweep_trace"] = d.sweep_trace;
    doc["threshold_fallback"] = d.threshold_fallback;
    doc["tau"] = d.tau;
    doc["active"] = d.active;
    doc["kept"] = d.kept;
    doc["p_hat_histogram"] = d.p_hat_histogram;
    if (!d.fallback.empty()) doc["fallback"] = d.fallback;
    return doc.dump(2);
}

std::string RunConfig::canonical() const {
    json doc;
    doc["mode"] = mode == Mode::query ? "query" : "batched";
    doc["methods"] = methods;
    doc["clip_delta"] = clip_delta;
    doc["reg"] = reg;
    doc["max_sweeps"] = max_sweeps;
    doc["ks"] = ks;
    doc["seed"] = seed;
    doc["label_fraction"] = label_fraction;
    doc["fallback_policy"] = fallback_policy;
    doc["flags"] = {{"pass1_literal", flags.pass1_literal},
                    {"eq9_compat", flags.eq9_compat},
                    {"tci_index_alt", flags.tci_index_alt},
                    {"global_norm", flags.global_norm}};
    return doc.dump();
}

}  // namespace fuse
