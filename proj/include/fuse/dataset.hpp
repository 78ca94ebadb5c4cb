#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fuse/core.hpp"

namespace fuse::dataset {

enum class VerifierKind { binary, discrete, real };

struct VerifierDecl {
    std::string id;
    VerifierKind kind = VerifierKind::real;
    double range_lo = -1.0;
    double range_hi = 1.0;
};

// Ordered verifier set; list order defines column order everywhere downstream.
struct Manifest {
    std::string dataset_id;
    std::vector<VerifierDecl> verifiers;

    std::size_t n_verifiers() const { return verifiers.size(); }
    // Column index by verifier id, or nullopt.
    std::optional<std::size_t> column_of(const std::string& id) const;
    void validate() const;  // unique ids, lo < hi
};

// One query's scores. raw_scores holds post-imputation raw values;
// norm_scores is the per-column min-max rescale into [-1,1]. Columns that
// were constant within the block normalize to all zeros and are marked
// inactive here.
struct ScoreBlock {
    std::string query_id;
    std::vector<std::string> response_ids;
    Matrix raw_scores;
    Matrix norm_scores;
    std::vector<std::uint8_t> active;     // per column, false for constant columns
    std::vector<int> labels;              // +-1; empty when absent
    std::vector<std::string> answer_keys; // empty when absent

    std::size_t n_responses() const { return response_ids.size(); }
    bool has_labels() const { return !labels.empty(); }
    bool has_answer_keys() const { return !answer_keys.empty(); }
};

struct Batch {
    Manifest manifest;
    std::vector<ScoreBlock> blocks;
    Matrix concat_view;                                    // stacked norm_scores
    std::vector<std::pair<std::size_t, std::size_t>> row_origin;  // (block, row)

    std::size_t total_rows() const { return row_origin.size(); }
};

// Replace gaps (NaN) by raw value 0; everything else untouched.
Matrix impute_missing(const Matrix& raw_with_gaps);

// Per-column min-max rescale into [-1,1]; constant columns map to zeros.
// `active_out`, when given, records which columns were non-constant.
Matrix normalize_block(const Matrix& raw, std::vector<std::uint8_t>* active_out = nullptr);

// Stack blocks (shared manifest already checked by the caller) into a
// concatenated view with invertible row back-references.
void concat_batch(Batch& batch);

// Split a concatenated row range back out of the batch; inverse of
// concat_batch for testing and per-block selection.
Matrix block_rows_of_concat(const Batch& batch, std::size_t block_index);

struct LoadOptions {
    bool global_normalization = false;  // min-max per verifier over the whole file
};

Manifest load_manifest(const std::string& path);

// Parse manifest + JSONL records (gzip accepted for records) into one
// ScoreBlock per query, rows ordered by response_id, imputed and normalized.
Batch load_dataset(const std::string& manifest_path, const std::string& records_path,
                   const LoadOptions& opt = {});

// Serialization used by the synth subcommand; emits exactly the schema
// load_dataset reads.
void write_manifest(const Manifest& m, const std::string& path);
void write_records(const Batch& batch, const std::string& path);

}  // namespace fuse::dataset
