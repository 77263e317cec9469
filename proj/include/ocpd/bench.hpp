#pragma once

#include "ocpd/nesgd.hpp"
#include "ocpd/tensor.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace ocpd {

struct BenchOptions {
    std::size_t rank = 2;
    std::vector<OptimizerKind> optimizers{OptimizerKind::Sgd, OptimizerKind::Psgd, OptimizerKind::Nesgd};
    std::size_t steps = 2000;     // sampled slices per optimizer
    std::size_t log_every = 50;   // RMSE over the whole tensor every this many steps
    std::uint64_t init_seed = 0;  // shared factor initialization
    std::uint64_t shuffle_seed = 1; // shared sample order (reshuffled every pass over K)
    NesgdOptions nesgd = [] {
        NesgdOptions o;
        o.temporal_row = TemporalRow::LeastSquares;
        return o;
    }();
};

struct BenchPoint {
    std::size_t step = 0;
    double rmse = 0.0;
};

struct BenchTrace {
    OptimizerKind kind = OptimizerKind::Sgd;
    std::vector<BenchPoint> points; // starts with step 0 (initialization)
    bool diverged = false;          // trace truncated at the failing step
};

std::vector<BenchTrace> bench_optimizers(const DenseTensor3& t, const BenchOptions& opts);

/// CSV `step,rmse,optimizer`.
void write_bench_csv(const std::vector<BenchTrace>& traces, std::ostream& out);

/// First logged step with rmse <= tau, or nullopt if never reached.
std::optional<std::size_t> steps_to_reach(const BenchTrace& trace, double tau);

/// Smallest final RMSE over traces that did not diverge.
double best_final_rmse(const std::vector<BenchTrace>& traces);

} // namespace ocpd
