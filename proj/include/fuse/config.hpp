#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fuse {

struct CompatFlags {
    bool pass1_literal = false;  // pass1 selects the first response instead of the random rule
    bool eq9_compat = false;     // JCI MLE uses the printed coefficient form
    bool tci_index_alt = false;  // TCI statistic pairs: all pairs excluding j3
    bool global_norm = false;    // min-max per verifier over the whole file
};

struct RunConfig {
    enum class Mode { query, batched };

    Mode mode = Mode::query;
    std::vector<std::string> methods;  // empty = every registered method
    double clip_delta = 1e-3;
    double reg = 1e-3;
    int max_sweeps = 10;
    // Requested k values for pass@k; 0 stands for the per-query N.
    std::vector<std::size_t> ks = {1, 5, 0};
    std::uint64_t seed = 0;
    double label_fraction = 0.05;  // labeled-query share for semi-supervised baselines
    std::string fallback_policy = "naive-ensemble";  // or "uniform"
    int workers = 0;                                 // 0 = hardware concurrency

    std::string manifest_path;
    std::string records_path;
    std::string out_path;

    CompatFlags flags;
    bool collect_diagnostics = false;

    // Canonical serialization; the eval report embeds fnv1a() of this.
    std::string canonical() const;
};

}  // namespace fuse
