#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fuse {

// Per-block estimation dump for the inspect subcommand and the --diagnostics
// flag.
struct BlockDiagnostics {
    std::string query_id;
    std::vector<double> mu;
    std::vector<double> u;
    double lambda3 = 0.0;
    double b_hat = 0.0;
    std::vector<double> psi;
    std::vector<double> eta;
    std::vector<double> pi;
    std::uint32_t quality_clip_count = 0;
    std::size_t tci_clip_count = 0;
    double statistic = 0.0;
    std::vector<double> sweep_trace;
    bool threshold_fallback = false;
    std::vector<double> tau;
    std::vector<std::uint8_t> active;
    std::vector<std::uint8_t> kept;
    std::vector<std::size_t> p_hat_histogram;  // 10 bins over [0,1]
    std::string fallback;                      // empty when the pipeline completed
};

std::string diagnostics_to_json(const BlockDiagnostics& d);

}  // namespace fuse
