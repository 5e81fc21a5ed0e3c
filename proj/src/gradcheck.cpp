#include "cso/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cso/rng.hpp"

namespace cso::nn {

namespace {

double eval_forward(const GraphBuilder& build, const std::vector<Tensor<double>>& inputs) {
    Tape<double> tape;
    std::vector<Tape<double>::NodeId> ids;
    ids.reserve(inputs.size());
    for (const auto& in : inputs) ids.push_back(tape.leaf(in, false));
    return tape.value(build(tape, ids)).data[0];
}

}  // namespace

GradCheckRow check_gradients(const GraphBuilder& build,
                             std::vector<Tensor<double>> inputs,
                             const std::string& name,
                             const GradCheckOptions& opt) {
    // Analytic pass.
    std::vector<Tensor<double>> analytic;
    {
        Tape<double> tape;
        std::vector<Tape<double>::NodeId> ids;
        for (const auto& in : inputs) ids.push_back(tape.leaf(in, true));
        auto out = build(tape, ids);
        if (tape.value(out).numel() != 1)
            throw ShapeMismatch("check_gradients requires a scalar-valued graph");
        tape.backward(out);
        for (auto id : ids) analytic.push_back(tape.grad(id));
    }

    GradCheckRow row;
    row.name = name;
    for (size_t t = 0; t < inputs.size(); ++t) {
        const size_t n = inputs[t].numel();
        std::vector<size_t> entries;
        if (opt.max_entries_per_input > 0 &&
            n > static_cast<size_t>(opt.max_entries_per_input)) {
            Rng rng(hash_seed(opt.sample_seed, 0x6D6Cu, t));
            for (int i = 0; i < opt.max_entries_per_input; ++i)
                entries.push_back(static_cast<size_t>(
                    rng.uniform_int(0, static_cast<int64_t>(n) - 1)));
            std::sort(entries.begin(), entries.end());
            entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
        } else {
            entries.resize(n);
            for (size_t i = 0; i < n; ++i) entries[i] = i;
        }

        for (size_t idx : entries) {
            double& x = inputs[t].data[idx];
            const double orig = x;
            const double h = opt.h_rel * std::max(1.0, std::abs(orig));
            x = orig + h;
            const double fp = eval_forward(build, inputs);
            x = orig - h;
            const double fm = eval_forward(build, inputs);
            x = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[t].data[idx];
            const double abs_err = std::abs(a - numeric);
            const double rel_err =
                abs_err / std::max({std::abs(a), std::abs(numeric), opt.denom_floor});
            row.max_abs_err = std::max(row.max_abs_err, abs_err);
            row.max_rel_err = std::max(row.max_rel_err, rel_err);
            ++row.entries_checked;
        }
    }
    row.pass = row.max_rel_err <= opt.tolerance;
    return row;
}

namespace {

Tensor<double> randn(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.data) v = rng.normal() * scale;
    return t;
}

// Random weights for the scalarizing weighted_sum; kept O(1) so gradient
// magnitudes stay O(1) and the relative error is meaningful.
Tensor<double> rand_weights(const std::vector<int>& shape, Rng& rng) {
    Tensor<double> t(shape);
    for (auto& v : t.data) v = 0.5 + rng.uniform_real();
    return t;
}

// Values bounded away from 0 so the finite-difference step never crosses the
// relu kink.
Tensor<double> rand_away_from_zero(std::vector<int> shape, Rng& rng) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.data) {
        const double mag = 0.05 + 0.95 * rng.uniform_real();
        v = rng.uniform_int(0, 1) ? mag : -mag;
    }
    return t;
}

void merge(GradCheckRow& into, const GradCheckRow& r) {
    into.max_rel_err = std::max(into.max_rel_err, r.max_rel_err);
    into.max_abs_err = std::max(into.max_abs_err, r.max_abs_err);
    into.entries_checked += r.entries_checked;
    into.pass = into.pass && r.pass;
}

}  // namespace

GradCheckReport standard_gradcheck_report(int seeds, const GradCheckOptions& opt) {
    GradCheckReport report;
    report.tolerance = opt.tolerance;

    GradCheckRow conv{"conv2d", 0, 0, 0, true};
    GradCheckRow tconv{"transposed_conv2d", 0, 0, 0, true};
    GradCheckRow pool{"maxpool2d", 0, 0, 0, true};
    GradCheckRow rel{"relu", 0, 0, 0, true};
    GradCheckRow cat{"concat_channels", 0, 0, 0, true};
    GradCheckRow ce{"softmax_cross_entropy", 0, 0, 0, true};

    for (int s = 0; s < seeds; ++s) {
        Rng rng(hash_seed(0xC0FFEEULL, static_cast<uint64_t>(s)));

        {
            const int n = 1 + static_cast<int>(rng.uniform_int(0, 1));
            const int c = 1 + static_cast<int>(rng.uniform_int(0, 2));
            const int o = 1 + static_cast<int>(rng.uniform_int(0, 3));
            const int hw = 4 + static_cast<int>(rng.uniform_int(0, 3));
            const int pad = static_cast<int>(rng.uniform_int(0, 1));
            const int stride = 1 + static_cast<int>(rng.uniform_int(0, 1));
            const int oh = (hw + 2 * pad - 3) / stride + 1;
            auto wts = rand_weights({n, o, oh, oh}, rng);
            std::vector<Tensor<double>> inputs = {randn({n, c, hw, hw}, rng),
                                                  randn({o, c, 3, 3}, rng, 0.5),
                                                  randn({o}, rng, 0.1)};
            merge(conv, check_gradients(
                            [=](Tape<double>& t, const std::vector<Tape<double>::NodeId>& in) {
                                return t.weighted_sum(t.conv2d(in[0], in[1], in[2], stride, pad), wts);
                            },
                            std::move(inputs), "conv2d", opt));
        }
        {
            const int n = 1 + static_cast<int>(rng.uniform_int(0, 1));
            const int c = 1 + static_cast<int>(rng.uniform_int(0, 2));
            const int o = 1 + static_cast<int>(rng.uniform_int(0, 2));
            const int hw = 3 + static_cast<int>(rng.uniform_int(0, 2));
            auto wts = rand_weights({n, o, 2 * hw, 2 * hw}, rng);
            std::vector<Tensor<double>> inputs = {randn({n, c, hw, hw}, rng),
                                                  randn({c, o, 2, 2}, rng, 0.5)};
            merge(tconv, check_gradients(
                             [=](Tape<double>& t, const std::vector<Tape<double>::NodeId>& in) {
                                 return t.weighted_sum(t.transposed_conv2d(in[0], in[1], 2, 2), wts);
                             },
                             std::move(inputs), "transposed_conv2d", opt));
        }
        {
            const int n = 1 + static_cast<int>(rng.uniform_int(0, 1));
            const int c = 1 + static_cast<int>(rng.uniform_int(0, 1));
            const int hw = 4 + 2 * static_cast<int>(rng.uniform_int(0, 1));
            // windows built from well-separated values so FD never flips the
            // argmax
            Tensor<double> x({n, c, hw, hw});
            for (int i = 0; i < n * c; ++i)
                for (int y = 0; y < hw; y += 2)
                    for (int xx = 0; xx < hw; xx += 2) {
                        double base = rng.uniform_real() * 0.4;
                        int order[4] = {0, 1, 2, 3};
                        for (int k = 3; k > 0; --k)
                            std::swap(order[k], order[rng.uniform_int(0, k)]);
                        const int off[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
                        for (int k = 0; k < 4; ++k)
                            x.data[(static_cast<size_t>(i) * hw + y + off[k][0]) * hw +
                                   xx + off[k][1]] = base + 0.12 * order[k];
                    }
            auto wts = rand_weights({n, c, hw / 2, hw / 2}, rng);
            merge(pool, check_gradients(
                            [=](Tape<double>& t, const std::vector<Tape<double>::NodeId>& in) {
                                return t.weighted_sum(t.maxpool2d(in[0]), wts);
                            },
                            {std::move(x)}, "maxpool2d", opt));
        }
        {
            auto x = rand_away_from_zero({2, 3, 4, 4}, rng);
            auto wts = rand_weights({2, 3, 4, 4}, rng);
            merge(rel, check_gradients(
                           [=](Tape<double>& t, const std::vector<Tape<double>::NodeId>& in) {
                               return t.weighted_sum(t.relu(in[0]), wts);
                           },
                           {std::move(x)}, "relu", opt));
        }
        {
            const int ca = 1 + static_cast<int>(rng.uniform_int(0, 2));
            const int cb = 1 + static_cast<int>(rng.uniform_int(0, 2));
            auto wts = rand_weights({1, ca + cb, 3, 3}, rng);
            std::vector<Tensor<double>> inputs = {randn({1, ca, 3, 3}, rng),
                                                  randn({1, cb, 3, 3}, rng)};
            merge(cat, check_gradients(
                           [=](Tape<double>& t, const std::vector<Tape<double>::NodeId>& in) {
                               return t.weighted_sum(t.concat_channels(in[0], in[1]), wts);
                           },
                           std::move(inputs), "concat_channels", opt));
        }
        {
            const int n = 1 + static_cast<int>(rng.uniform_int(0, 1));
            const int c = 2 + static_cast<int>(rng.uniform_int(0, 2));
            const int hw = 2 + static_cast<int>(rng.uniform_int(0, 2));
            Tensor<int32_t> target({n, hw, hw});
            for (auto& v : target.data)
                v = static_cast<int32_t>(rng.uniform_int(0, c - 1));
            merge(ce, check_gradients(
                          [=](Tape<double>& t, const std::vector<Tape<double>::NodeId>& in) {
                              return t.softmax_cross_entropy(in[0], target);
                          },
                          {randn({n, c, hw, hw}, rng)}, "softmax_cross_entropy", opt));
        }
    }

    report.rows = {conv, tconv, pool, rel, cat, ce};
    return report;
}

}  // namespace cso::nn
