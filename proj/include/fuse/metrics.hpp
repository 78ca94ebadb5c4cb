#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fuse/dataset.hpp"
#include "fuse/ensemble.hpp"

namespace fuse::metrics {

// Credit for a (possibly tied) selection: fraction of the tie set that is
// correct.
double tie_broken_accuracy(const ensemble::SelectionResult& result, std::span<const int> labels);

struct MethodStats {
    double selection_accuracy = 0.0;
    double fallback_rate = 0.0;
};

struct QueryRow {
    std::string query_id;
    std::size_t n = 0;
    std::size_t n_correct = 0;
    std::map<std::string, double> per_method_accuracy;
};

struct EvalReport {
    std::string dataset_id;
    std::uint64_t config_hash = 0;
    double pass_at_1 = 0.0;
    std::map<std::size_t, double> pass_at_k;  // requested k (capped at per-query N)
    std::map<std::string, MethodStats> methods;
    std::vector<QueryRow> queries;
};

// Aggregate Table-1-style results. ks entries of 0 stand for the per-query N;
// larger k are capped at each query's N. Throws when labels are missing or a
// method lacks results for some query.
EvalReport evaluate(const dataset::Batch& batch,
                    const std::map<std::string, std::vector<ensemble::SelectionResult>>& by_method,
                    std::span<const std::size_t> ks, std::uint64_t config_hash = 0);

// Extended balanced accuracy of scores in [-1,1]:
// (E[(1+s)/2 | y=+1] + E[(1-s)/2 | y=-1]) / 2, empirically.
double balanced_accuracy_extended(std::span<const double> scores, std::span<const int> labels);

// Plain balanced accuracy of +-1 verdicts.
double balanced_accuracy_binary(std::span<const double> verdicts, std::span<const int> labels);

std::string report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);

}  // namespace fuse::metrics
