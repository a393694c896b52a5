#include "bpec/harness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bpec {

namespace {

int scaled(int n, double scale) { return std::max(1, static_cast<int>(std::lround(n * scale))); }

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

std::vector<double> random_simplex(Rng& rng, int n, double zero_prob) {
    std::vector<double> v(n);
    double sum = 0;
    for (auto& x : v) {
        x = uniform01(rng) < zero_prob ? 0.0 : -std::log(1.0 - uniform01(rng));
        sum += x;
    }
    if (sum <= 0) {
        v[static_cast<int>(uniform01(rng) * n) % n] = 1.0;
        sum = 1.0;
    }
    for (auto& x : v) x /= sum;
    return v;
}

struct NamedChannel {
    std::string name;
    ChannelModel model;
};

std::vector<NamedChannel> reference_channels() {
    std::vector<NamedChannel> out;
    out.push_back({"example_chain(0)", ChannelModel::example_chain(0.0)});
    out.push_back({"example_chain(0.3)", ChannelModel::example_chain(0.3)});
    out.push_back({"ge(.6,.3,.4,.7)", ChannelModel::gilbert_elliot_visible(0.6, 0.3, 0.4, 0.7)});
    out.push_back({"ge(.6,.1,.5,.2)", ChannelModel::gilbert_elliot_visible(0.6, 0.1, 0.5, 0.2)});
    out.push_back({"ge(.5,.8,.5,.9)", ChannelModel::gilbert_elliot_visible(0.5, 0.8, 0.5, 0.9)});
    out.push_back({"memoryless(.6,.4,.24)", ChannelModel::single_state({0.24, 0.16, 0.36, 0.24})});
    return out;
}

}  // namespace

ChannelModel random_channel(Rng& rng, int max_states, bool memoryless, bool positive_emissions) {
    const int n = 1 + static_cast<int>(uniform01(rng) * max_states) % max_states;
    Matrix P(n, n), E(n, 4);
    std::vector<double> shared = random_simplex(rng, n, 0.0);
    for (int r = 0; r < n; ++r) {
        // Strictly positive rows keep the chain irreducible and aperiodic.
        std::vector<double> row = memoryless ? shared : random_simplex(rng, n, 0.0);
        for (int c = 0; c < n; ++c) P(r, c) = 0.9 * row[c] + 0.1 / n;
        std::vector<double> e = random_simplex(rng, 4, positive_emissions ? 0.0 : 0.25);
        for (int k = 0; k < 4; ++k) E(r, k) = positive_emissions ? 0.95 * e[k] + 0.0125 : e[k];
    }
    return ChannelModel(P, E);
}

ActionDistribution random_action_distribution(Rng& rng, const ConditionedStats& cells) {
    ActionDistribution d;
    d.keys = cells.keys;
    for (size_t c = 0; c < cells.size(); ++c) {
        auto v = random_simplex(rng, kNumActions, 0.3);
        std::array<double, kNumActions> row{};
        std::copy(v.begin(), v.end(), row.begin());
        d.rows.push_back(row);
    }
    return d;
}

std::vector<CheckResult> verify_inclusions(std::uint64_t seed, double scale) {
    std::vector<CheckResult> out;
    auto channels = reference_channels();
    Rng rng(seed);
    for (int k = 0; k < scaled(4, scale); ++k)
        channels.push_back({"random#" + std::to_string(k), random_channel(rng, 3, false)});
    for (const auto& [name, model] : channels) {
        const ConditionedStats cells = visible_cells(model);
        const RateRegion unc = region_uncoded(cells), rea = region_reactive(cells), vis = region_visible(cells);
        const RateRegion mink = region_minkowski(cells);
        const ErasureStats avg = averaged_stats(cells);
        const RateRegion nofb = region_memoryless_nofb(avg.eps1, avg.eps2);
        const RateRegion fb = region_memoryless_fb(avg.eps1, avg.eps2, avg.eps12);
        const double tol = 1e-9;
        bool ok = region_subset(unc, rea, tol) && region_subset(rea, vis, tol) && region_subset(mink, rea, tol) &&
                  region_subset(nofb, fb, tol);
        out.push_back({"inclusion chain " + name, ok, ""});
    }
    return out;
}

std::vector<CheckResult> verify_min_cut(std::uint64_t seed, double scale) {
    Rng rng(seed);
    const int n = scaled(200, scale);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        ChannelModel model = random_channel(rng, 4, false);
        const ConditionedStats cells = visible_cells(model);
        const ActionDistribution dist = random_action_distribution(rng, cells);
        for (int j = 1; j <= 2; ++j) {
            const double flow = max_flow(link_capacities(dist, cells, j));
            worst = std::max(worst, std::abs(flow - cut_values(dist, cells, j).min()));
        }
    }
    return {{"max-flow equals min-cut (" + std::to_string(n) + " instances)", worst <= 1e-9,
             "worst gap " + fmt_double(worst)}};
}

std::vector<CheckResult> verify_redundancy_transform(std::uint64_t seed, double scale) {
    // A and D do not move under the transform, so the minimum can only rise to min(A, D); it is
    // kept exactly whenever the original minimum is attained by A or D.
    Rng rng(seed);
    const int n = scaled(100, scale);
    double worst_ad = 0.0, worst_kept = 0.0, worst_drop = 0.0;
    int raised = 0;
    bool dominance = true;
    for (int i = 0; i < n; ++i) {
        ChannelModel model = random_channel(rng, 4, false);
        const ConditionedStats cells = visible_cells(model);
        const ActionDistribution dist = random_action_distribution(rng, cells);
        const ActionDistribution star = redundancy_transform(dist, cells);
        for (int j = 1; j <= 2; ++j) {
            const CutValues before = cut_values(dist, cells, j), after = cut_values(star, cells, j);
            const double ad = std::min(after.A, after.D);
            worst_ad = std::max(worst_ad, std::abs(after.min() - ad));
            worst_drop = std::max(worst_drop, before.min() - after.min());
            if (std::min(before.A, before.D) <= before.min() + 1e-12)
                worst_kept = std::max(worst_kept, std::abs(after.min() - before.min()));
            else
                ++raised;
            if (after.B < ad - 1e-10 || after.C < ad - 1e-10) dominance = false;
        }
    }
    std::vector<CheckResult> out;
    const std::string count = " (" + std::to_string(n) + " instances)";
    out.push_back({"transformed min cut equals min(A*, D*)" + count, worst_ad <= 1e-10, "worst " + fmt_double(worst_ad)});
    out.push_back({"transform never lowers the min cut" + count, worst_drop <= 1e-10,
                   "worst drop " + fmt_double(std::max(worst_drop, 0.0))});
    out.push_back({"min cut kept where A or D was binding" + count, worst_kept <= 1e-10,
                   "worst " + fmt_double(worst_kept) + ", " + std::to_string(raised) + " receiver cuts raised from B or C"});
    out.push_back({"transformed B and C dominate min(A, D)", dominance, ""});
    return out;
}

std::vector<CheckResult> verify_decodability(std::uint64_t seed, double scale) {
    Rng rng(seed);
    const int runs = scaled(500, scale);
    int audit_fail = 0, conservation_fail = 0;
    std::string first;
    for (int i = 0; i < runs; ++i) {
        ChannelModel model = random_channel(rng, 3, false);
        Scenario sc;
        sc.horizon = 10000;
        sc.seed = seed * 1000003ULL + static_cast<std::uint64_t>(i);
        sc.stride = 1000;
        sc.rates = {0.6 * uniform01(rng), 0.6 * uniform01(rng)};
        const int kind = static_cast<int>(uniform01(rng) * 7);
        std::unique_ptr<Policy> policy;
        try {
            switch (kind) {
                case 0: policy = std::make_unique<MaxWeightVisible>(model, ActionSet::A2); break;
                case 1: policy = std::make_unique<MaxWeightVisible>(model, ActionSet::A3); break;
                case 2: policy = std::make_unique<MaxWeightVisible>(model, ActionSet::A5); break;
                case 3:
                    sc.visibility = Visibility::hidden;
                    policy = std::make_unique<MaxWeightHidden>(model, ActionSet::A5);
                    break;
                case 4:
                    policy = std::make_unique<PerStateMemoryless>(model, sc.rates);
                    break;
                default: {
                    // Probabilistic policy at a point inside the region, overloaded on purpose half the time.
                    const bool hid = kind == 6;
                    const int L = 1;
                    const ConditionedStats cells = hid ? hidden_cells(model, L) : visible_cells(model);
                    RatePoint target{0.0, 0.0};
                    for (size_t c = 0; c < cells.size(); ++c) {
                        target.r1 += cells.weight[c] * (1 - cells.stats[c].eps1);
                        target.r2 += cells.weight[c] * (1 - cells.stats[c].eps2);
                    }
                    target.r1 *= uniform01(rng);
                    target.r2 *= uniform01(rng);
                    PolicySynthesis syn;
                    for (int tries = 0;; ++tries) {
                        try {
                            syn = synthesize_policy(cells, target, false);
                            break;
                        } catch (const std::domain_error&) {
                            target.r1 *= 0.5;
                            target.r2 *= 0.5;
                            if (tries > 60) throw;
                        }
                    }
                    const double load = 0.5 + 0.7 * uniform01(rng);
                    sc.rates = {std::min(1.0, target.r1 * load), std::min(1.0, target.r2 * load)};
                    if (hid) sc.visibility = Visibility::hidden;
                    sc.policy.window = L;
                    policy = std::make_unique<ProbabilisticPolicy>(syn, hid ? L : -1);
                }
            }
            SimTrace tr = run(sc, model, *policy);
            if (!tr.audit || !tr.audit->ok) {
                ++audit_fail;
                if (first.empty())
                    first = "run " + std::to_string(i) + " (" + policy->name() + ") packet " +
                            std::to_string(tr.audit ? tr.audit->counterexample : 0);
            }
            if (!tr.conservation_ok) ++conservation_fail;
        } catch (const std::exception& e) {
            ++audit_fail;
            if (first.empty()) first = "run " + std::to_string(i) + " threw: " + e.what();
        }
    }
    return {{"decodability audit (" + std::to_string(runs) + " runs)", audit_fail == 0,
             audit_fail ? first : std::string()},
            {"conservation identity", conservation_fail == 0, std::to_string(conservation_fail) + " failing runs"}};
}

std::vector<CheckResult> verify_forgetting(std::uint64_t seed, double scale) {
    ChannelModel model = ChannelModel::gilbert_elliot_hidden({0.6, 0.1, 0.15, 0.2, 0.866}, {0.5, 0.2, 0.2, 0.2, 0.8});
    const int len = scaled(100000, scale);
    const double tv = forgetting_check(model, 10, len, seed);
    return {{"hidden-state forgetting L=10 over " + std::to_string(len) + " slots", tv <= 1e-2,
             "max TV " + fmt_double(tv)}};
}

}  // namespace bpec
