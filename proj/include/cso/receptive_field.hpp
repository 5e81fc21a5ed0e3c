#pragma once

// Receptive-field and jump bookkeeping along a forward layer stack, using the
// recurrence r <- r + (k-1)*j, j <- j*s. Transposed convolutions move to a
// finer grid: j <- j/s first, then r grows by (k-1) of the finer jump, so
// jumps are kept as doubles.

#include <span>
#include <string>
#include <vector>

namespace cso::nn {

struct LayerSpec {
    enum class Kind { conv, pool, tconv };
    Kind kind = Kind::conv;
    int kernel = 3;
    int stride = 1;
    int padding = 0;
    std::string label;
};

struct RfEntry {
    std::string label;
    double rf = 1.0;
    double jump = 1.0;
};

std::vector<RfEntry> receptive_field(std::span<const LayerSpec> layers);

}  // namespace cso::nn
