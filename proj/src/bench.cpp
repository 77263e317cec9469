#include "ocpd/bench.hpp"

#include "ocpd/cp_als.hpp"
#include "ocpd/error.hpp"
#include "ocpd/tensor_io.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace ocpd {

namespace {

std::vector<std::size_t> sample_order(std::size_t K, std::size_t steps, std::uint64_t seed) {
    std::vector<std::size_t> pass(K), order;
    std::iota(pass.begin(), pass.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    order.reserve(steps);
    while (order.size() < steps) {
        std::shuffle(pass.begin(), pass.end(), rng);
        for (std::size_t k : pass) {
            if (order.size() == steps) break;
            order.push_back(k);
        }
    }
    return order;
}

} // namespace

std::vector<BenchTrace> bench_optimizers(const DenseTensor3& t, const BenchOptions& opts) {
    if (opts.rank == 0 || opts.log_every == 0) {
        throw Error(ErrorCode::InvalidArgument, "rank and log_every must be positive");
    }
    opts.nesgd.validate();
    const KruskalFactors init(random_factor(t.dim_i(), opts.rank, opts.init_seed),
                              random_factor(t.dim_j(), opts.rank, opts.init_seed + 1),
                              random_factor(t.dim_k(), opts.rank, opts.init_seed + 2));
    const std::vector<std::size_t> order = sample_order(t.dim_k(), opts.steps, opts.shuffle_seed);

    std::vector<BenchTrace> traces;
    for (OptimizerKind kind : opts.optimizers) {
        BenchTrace trace;
        trace.kind = kind;
        KruskalFactors f = init;
        NesgdState state = NesgdState::init(f, opts.nesgd);
        trace.points.push_back({0, rmse(t, f)});
        for (std::size_t s = 0; s < order.size(); ++s) {
            try {
                sgd_step(t, order[s], f, state, kind);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::Diverged) throw;
                trace.diverged = true;
                break;
            }
            if ((s + 1) % opts.log_every == 0 || s + 1 == order.size()) {
                trace.points.push_back({s + 1, rmse(t, f)});
            }
        }
        traces.push_back(std::move(trace));
    }
    return traces;
}

void write_bench_csv(const std::vector<BenchTrace>& traces, std::ostream& out) {
    out << "step,rmse,optimizer\n";
    for (const auto& tr : traces)
        for (const auto& p : tr.points) out << p.step << ',' << format_double(p.rmse) << ',' << to_string(tr.kind) << '\n';
}

std::optional<std::size_t> steps_to_reach(const BenchTrace& trace, double tau) {
    for (const auto& p : trace.points)
        if (p.rmse <= tau) return p.step;
    return std::nullopt;
}

double best_final_rmse(const std::vector<BenchTrace>& traces) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& tr : traces)
        if (!tr.diverged && !tr.points.empty()) best = std::min(best, tr.points.back().rmse);
    return best;
}

} // namespace ocpd
