#pragma once

// Finite-difference gradient verification. Runs in double precision (the
// widest available here) against graphs built through Tape<double>.
//
// For each checked entry x_i the step is h = h_rel * max(1, |x_i|) and the
// numeric gradient is the central difference (f(x+h) - f(x-h)) / 2h. The
// relative error denominator is floored so that near-zero gradients are
// compared absolutely instead of blowing up the ratio.

#include <functional>
#include <string>
#include <vector>

#include "cso/autodiff.hpp"

namespace cso::nn {

struct GradCheckOptions {
    double h_rel = 1e-3;
    double tolerance = 1e-4;
    double denom_floor = 1e-2;
    // 0 checks every entry; otherwise this many entries are sampled per
    // input tensor (uniformly, seeded) -- needed for large parameter sets.
    int max_entries_per_input = 0;
    uint64_t sample_seed = 1;
};

struct GradCheckRow {
    std::string name;
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    int entries_checked = 0;
    bool pass = false;
};

struct GradCheckReport {
    double tolerance = 0.0;
    std::vector<GradCheckRow> rows;
    bool all_pass() const {
        for (const auto& r : rows)
            if (!r.pass) return false;
        return true;
    }
};

// Builds the graph from leaves registered for `inputs` (in order) and returns
// the scalar output node.
using GraphBuilder = std::function<Tape<double>::NodeId(
    Tape<double>&, const std::vector<Tape<double>::NodeId>&)>;

GradCheckRow check_gradients(const GraphBuilder& build,
                             std::vector<Tensor<double>> inputs,
                             const std::string& name,
                             const GradCheckOptions& opt = {});

// Per-op report over randomized small shapes; `seeds` graphs per op.
// Backs the `gradcheck` CLI subcommand and the correctness acceptance gate.
GradCheckReport standard_gradcheck_report(int seeds, const GradCheckOptions& opt = {});

}  // namespace cso::nn
