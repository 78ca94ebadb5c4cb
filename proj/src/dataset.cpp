#include "fuse/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fuse::dataset {

using nlohmann::json;

std::optional<std::size_t> Manifest::column_of(const std::string& id) const {
    for (std::size_t j = 0; j < verifiers.size(); ++j)
        if (verifiers[j].id == id) return j;
    return std::nullopt;
}

void Manifest::validate() const {
    if (verifiers.empty()) throw ParseError("manifest declares no verifiers");
    std::set<std::string> seen;
    for (const auto& v : verifiers) {
        if (v.id.empty()) throw ParseError("manifest verifier with empty id");
        if (!seen.insert(v.id).second)
            throw ParseError("duplicate verifier id in manifest: " + v.id);
        if (!(v.range_lo < v.range_hi))
            throw ParseError("verifier " + v.id + " has empty declared range");
    }
}

Matrix impute_missing(const Matrix& raw) {
    Matrix out = raw;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j)
            if (std::isnan(out(i, j))) out(i, j) = 0.0;
    return out;
}

Matrix normalize_block(const Matrix& raw, std::vector<std::uint8_t>* active_out) {
    const std::size_t n = raw.rows(), m = raw.cols();
    Matrix out(n, m, 0.0);
    if (active_out) active_out->assign(m, 1);
    for (std::size_t j = 0; j < m; ++j) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            lo = std::min(lo, raw(i, j));
            hi = std::max(hi, raw(i, j));
        }
        if (hi == lo) {
            if (active_out) (*active_out)[j] = 0;
            continue;  // constant column -> all zeros, inactive
        }
        if (lo == -1.0 && hi == 1.0) {
            // Already normalized: pass through bit-exactly.
            for (std::size_t i = 0; i < n; ++i) out(i, j) = raw(i, j);
            continue;
        }
        // Per-element division maps the endpoints to exactly +-1 and keeps
        // every entry inside [-1, 1].
        const double width = hi - lo;
        for (std::size_t i = 0; i < n; ++i)
            out(i, j) = 2.0 * ((raw(i, j) - lo) / width) - 1.0;
    }
    return out;
}

void concat_batch(Batch& batch) {
    const std::size_t m = batch.manifest.n_verifiers();
    std::size_t total = 0;
    for (const auto& b : batch.blocks) {
        if (b.norm_scores.cols() != m)
            throw DataError("block " + b.query_id + " column count does not match manifest");
        total += b.n_responses();
    }
    batch.concat_view = Matrix(total, m);
    batch.row_origin.clear();
    batch.row_origin.reserve(total);
    std::size_t r = 0;
    for (std::size_t bi = 0; bi < batch.blocks.size(); ++bi) {
        const auto& b = batch.blocks[bi];
        for (std::size_t i = 0; i < b.n_responses(); ++i, ++r) {
            std::copy_n(b.norm_scores.row(i), m, batch.concat_view.row(r));
            batch.row_origin.emplace_back(bi, i);
        }
    }
}

Matrix block_rows_of_concat(const Batch& batch, std::size_t block_index) {
    const std::size_t m = batch.concat_view.cols();
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < batch.row_origin.size(); ++r)
        if (batch.row_origin[r].first == block_index) rows.push_back(r);
    Matrix out(rows.size(), m);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(batch.concat_view.row(rows[i]), m, out.row(i));
    return out;
}

namespace {

VerifierKind parse_kind(const std::string& s, long line) {
    if (s == "binary") return VerifierKind::binary;
    if (s == "discrete") return VerifierKind::discrete;
    if (s == "real") return VerifierKind::real;
    throw ParseError("unknown verifier kind: " + s, line);
}

const char* kind_name(VerifierKind k) {
    switch (k) {
        case VerifierKind::binary: return "binary";
        case VerifierKind::discrete: return "discrete";
        default: return "real";
    }
}

// Reads a whole text file, transparently inflating gzip (".gz" or magic).
std::string slurp(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw DataError("cannot open " + path);
    std::string out;
    char buf[1 << 16];
    int got;
    while ((got = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(got));
    const bool bad = got < 0;
    gzclose(f);
    if (bad) throw DataError("read error on " + path);
    return out;
}

struct RawRecord {
    std::string response_id;
    std::vector<double> scores;  // NaN marks gaps
    std::optional<int> label;
    std::optional<std::string> answer_key;
};

}  // namespace

Manifest load_manifest(const std::string& path) {
    json doc;
    try {
        doc = json::parse(slurp(path));
    } catch (const json::exception& e) {
        throw ParseError(std::string("manifest ") + path + ": " + e.what());
    }
    Manifest m;
    m.dataset_id = doc.value("dataset_id", "");
    if (!doc.contains("verifiers") || !doc["verifiers"].is_array())
        throw ParseError("manifest missing verifiers array");
    for (const auto& v : doc["verifiers"]) {
        VerifierDecl d;
        d.id = v.at("id").get<std::string>();
        d.kind = parse_kind(v.value("kind", "real"), -1);
        if (v.contains("range")) {
            d.range_lo = v["range"].at(0).get<double>();
            d.range_hi = v["range"].at(1).get<double>();
        }
        m.verifiers.push_back(std::move(d));
    }
    m.validate();
    return m;
}

Batch load_dataset(const std::string& manifest_path, const std::string& records_path,
                   const LoadOptions& opt) {
    Batch batch;
    batch.manifest = load_manifest(manifest_path);
    const std::size_t m = batch.manifest.n_verifiers();
    const double gap = std::numeric_limits<double>::quiet_NaN();

    // query_id -> response_id -> record; map keeps both orderings stable.
    std::map<std::string, std::map<std::string, RawRecord>> queries;

    const std::string text = slurp(records_path);
    std::istringstream in(text);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad record: ") + e.what(), lineno);
        }
        if (!rec.contains("query_id") || !rec.contains("response_id") || !rec.contains("scores"))
            throw ParseError("record missing query_id/response_id/scores", lineno);

        RawRecord r;
        const std::string qid = rec["query_id"].get<std::string>();
        r.response_id = rec["response_id"].get<std::string>();
        r.scores.assign(m, gap);
        for (const auto& [vid, val] : rec["scores"].items()) {
            auto col = batch.manifest.column_of(vid);
            if (!col) throw ParseError("record references unknown verifier \"" + vid + "\"", lineno);
            if (!val.is_null()) {
                if (!val.is_number()) throw ParseError("score for " + vid + " is not a number", lineno);
                r.scores[*col] = val.get<double>();
            }
        }
        if (rec.contains("label") && !rec["label"].is_null()) {
            const int lab = rec["label"].get<int>();
            if (lab != 1 && lab != -1) throw ParseError("label must be +1 or -1", lineno);
            r.label = lab;
        }
        if (rec.contains("answer_key") && !rec["answer_key"].is_null())
            r.answer_key = rec["answer_key"].get<std::string>();

        auto& q = queries[qid];
        if (!q.emplace(r.response_id, std::move(r)).second)
            throw ParseError("duplicate (query_id, response_id): (" + qid + ", " +
                                 rec["response_id"].get<std::string>() + ")",
                             lineno);
    }

    std::vector<std::string> rejected;
    for (auto& [qid, recs] : queries) {
        if (recs.size() < 2) {
            rejected.push_back(qid);
            continue;
        }
        ScoreBlock blk;
        blk.query_id = qid;
        const std::size_t n = recs.size();
        Matrix raw(n, m, gap);
        std::size_t n_labeled = 0, n_keyed = 0, i = 0;
        for (auto& [rid, r] : recs) {
            blk.response_ids.push_back(rid);
            std::copy(r.scores.begin(), r.scores.end(), raw.row(i));
            if (r.label) ++n_labeled;
            if (r.answer_key) ++n_keyed;
            ++i;
        }
        if (n_labeled != 0 && n_labeled != n)
            throw DataError("query " + qid + " has labels on some responses but not all");
        if (n_keyed != 0 && n_keyed != n)
            throw DataError("query " + qid + " has answer keys on some responses but not all");
        if (n_labeled == n) {
            i = 0;
            blk.labels.resize(n);
            for (auto& [rid, r] : recs) blk.labels[i++] = *r.label;
        }
        if (n_keyed == n) {
            i = 0;
            blk.answer_keys.resize(n);
            for (auto& [rid, r] : recs) blk.answer_keys[i++] = *r.answer_key;
        }
        blk.raw_scores = impute_missing(raw);
        batch.blocks.push_back(std::move(blk));
    }
    if (!rejected.empty()) {
        std::string msg = "queries with fewer than 2 responses:";
        for (const auto& q : rejected) msg += " " + q;
        throw DataError(msg);
    }
    if (batch.blocks.empty()) throw DataError("no queries in " + records_path);

    if (opt.global_normalization) {
        // Min-max per verifier over every row of the file, then apply to each
        // block; a globally constant column is inactive everywhere.
        std::vector<double> lo(m, std::numeric_limits<double>::infinity());
        std::vector<double> hi(m, -std::numeric_limits<double>::infinity());
        for (const auto& b : batch.blocks)
            for (std::size_t r = 0; r < b.n_responses(); ++r)
                for (std::size_t j = 0; j < m; ++j) {
                    lo[j] = std::min(lo[j], b.raw_scores(r, j));
                    hi[j] = std::max(hi[j], b.raw_scores(r, j));
                }
        for (auto& b : batch.blocks) {
            const std::size_t n = b.n_responses();
            b.norm_scores = Matrix(n, m, 0.0);
            b.active.assign(m, 1);
            for (std::size_t j = 0; j < m; ++j) {
                if (hi[j] == lo[j]) {
                    b.active[j] = 0;
                    continue;
                }
                if (lo[j] == -1.0 && hi[j] == 1.0) {
                    for (std::size_t r = 0; r < n; ++r)
                        b.norm_scores(r, j) = b.raw_scores(r, j);
                    continue;
                }
                const double width = hi[j] - lo[j];
                for (std::size_t r = 0; r < n; ++r)
                    b.norm_scores(r, j) = 2.0 * ((b.raw_scores(r, j) - lo[j]) / width) - 1.0;
            }
        }
    } else {
        for (auto& b : batch.blocks) b.norm_scores = normalize_block(b.raw_scores, &b.active);
    }

    concat_batch(batch);
    return batch;
}

void write_manifest(const Manifest& m, const std::string& path) {
    json doc;
    doc["dataset_id"] = m.dataset_id;
    doc["verifiers"] = json::array();
    for (const auto& v : m.verifiers)
        doc["verifiers"].push_back(
            {{"id", v.id}, {"kind", kind_name(v.kind)}, {"range", {v.range_lo, v.range_hi}}});
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << doc.dump(2) << "\n";
}

void write_records(const Batch& batch, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    for (const auto& b : batch.blocks) {
        for (std::size_t i = 0; i < b.n_responses(); ++i) {
            json rec;
            rec["query_id"] = b.query_id;
            rec["response_id"] = b.response_ids[i];
            json scores = json::object();
            for (std::size_t j = 0; j < batch.manifest.n_verifiers(); ++j)
                scores[batch.manifest.verifiers[j].id] = b.raw_scores(i, j);
            rec["scores"] = std::move(scores);
            if (b.has_labels()) rec["label"] = b.labels[i];
            if (b.has_answer_keys()) rec["answer_key"] = b.answer_keys[i];
            out << rec.dump() << "\n";
        }
    }
}

}  // namespace fuse::dataset
