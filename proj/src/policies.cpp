#include "bpec/policies.hpp"

#include <algorithm>
#include <stdexcept>

namespace bpec {

std::string to_string(ActionSet s) {
    switch (s) {
        case ActionSet::A2: return "A2";
        case ActionSet::A3: return "A3";
        case ActionSet::A5: return "A5";
    }
    return "?";
}

ActionSet action_set_from_string(const std::string& name) {
    if (name == "A2" || name == "uncoded") return ActionSet::A2;
    if (name == "A3" || name == "reactive") return ActionSet::A3;
    if (name == "A5" || name == "full") return ActionSet::A5;
    throw std::invalid_argument("unknown action set: " + name);
}

namespace {

double pos(double v) { return v > 0 ? v : 0.0; }

// Links each action can serve, per receiver index.
std::vector<std::pair<int, int>> action_links(int action) {
    switch (action) {
        case 1: return {{0, L12}, {0, L14}};
        case 2: return {{1, L12}, {1, L14}};
        case 3: return {{0, L24}, {1, L24}};
        case 4: return {{0, L13}, {1, L13}};
        case 5: return {{0, L32}, {0, L34}, {1, L32}, {1, L34}};
        default: return {};
    }
}

}  // namespace

Weights maxweight_weights(const QueueNetwork& net, const ErasureStats& st, ActionSet set) {
    const double q1a = static_cast<double>(net.q1_size(1)), q1b = static_cast<double>(net.q1_size(2));
    const double q2a = static_cast<double>(net.q2_size(1)), q2b = static_cast<double>(net.q2_size(2));
    const double q3a = static_cast<double>(net.q3_size(1)), q3b = static_cast<double>(net.q3_size(2));
    Weights w{};
    if (set == ActionSet::A2) {
        w[1] = (1 - st.eps1) * q1a;
        w[2] = (1 - st.eps2) * q1b;
        return w;
    }
    w[1] = (1 - st.eps1) * q1a + st.eps1_not2 * pos(q1a - q2a);
    w[2] = (1 - st.eps2) * q1b + st.eps_not1_2 * pos(q1b - q2b);
    w[3] = (1 - st.eps1) * q2a + (1 - st.eps2) * q2b;
    if (set == ActionSet::A5) {
        w[4] = (1 - st.eps12) * (pos(q1a - q3a) + pos(q1b - q3b));
        w[5] = st.eps1_not2 * pos(q3a - q2a) + (1 - st.eps1) * q3a + st.eps_not1_2 * pos(q3b - q2b) +
               (1 - st.eps2) * q3b;
    }
    return w;
}

LinkFlags backpressure_intents(const QueueNetwork& net, int action, ActionSet set) {
    LinkFlags e{};
    for (auto [r, link] : action_links(action)) {
        const int j = r + 1;
        const long q1 = static_cast<long>(net.q1_size(j)), q2 = static_cast<long>(net.q2_size(j));
        const long q3 = static_cast<long>(net.q3_size(j));
        long diff = 0;
        switch (link) {
            case L12: diff = set == ActionSet::A2 ? 0 : q1 - q2; break;
            case L13: diff = q1 - q3; break;
            case L14: diff = q1; break;
            case L24: diff = q2; break;
            case L32: diff = q3 - q2; break;
            case L34: diff = q3; break;
            default: break;
        }
        e[r][link] = diff > 0 ? 1 : 0;
    }
    return e;
}

PolicyDecision maxweight_decide(const QueueNetwork& net, const ErasureStats& stats, ActionSet set) {
    const Weights w = maxweight_weights(net, stats, set);
    PolicyDecision d;
    double best = 0.0;
    for (int a = 1; a < kNumActions; ++a)
        if (w[a] > best) {
            best = w[a];
            d.action = a;
        }
    d.intents = backpressure_intents(net, d.action, set);
    return d;
}

PolicyDecision probabilistic_decide(const ActionDistribution& dist, const std::array<LinkArray, 2>& ratios,
                                    std::uint32_t key, Rng& rng) {
    const int row = dist.index_of(key);
    if (row < 0) throw std::out_of_range("observation key not present in the action distribution");
    const auto& p = dist.rows[row];
    double u = uniform01(rng), acc = 0.0;
    PolicyDecision d;
    d.action = kNumActions - 1;
    for (int a = 0; a < kNumActions; ++a) {
        acc += p[a];
        if (u < acc) {
            d.action = a;
            break;
        }
    }
    // Guard against rounding selecting a zero-probability tail action.
    while (d.action > 0 && p[d.action] == 0.0) --d.action;
    for (auto [r, link] : action_links(d.action)) {
        const double q = ratios[r][link];
        d.intents[r][link] = (q >= 1.0 || (q > 0.0 && uniform01(rng) < q)) ? 1 : 0;
    }
    return d;
}

// ---- policy objects ----

MaxWeightVisible::MaxWeightVisible(const ChannelModel& model, ActionSet set, int delay)
    : stats_(visible_stats_table(model, delay)), set_(set) {}

std::string MaxWeightVisible::name() const { return "maxweight_" + to_string(set_); }

PolicyDecision MaxWeightVisible::decide(const Observation& obs, const std::vector<QueueNetwork>& nets, Rng&) {
    if (obs.state < 0 || obs.state >= static_cast<int>(stats_.size()))
        throw std::out_of_range("visible max-weight needs the previous state");
    return maxweight_decide(nets.front(), stats_[obs.state], set_);
}

MaxWeightHidden::MaxWeightHidden(const ChannelModel& model, ActionSet set) : model_(&model), set_(set) {}

std::string MaxWeightHidden::name() const { return "maxweight_hidden_" + to_string(set_); }

PolicyDecision MaxWeightHidden::decide(const Observation& obs, const std::vector<QueueNetwork>& nets, Rng&) {
    if (!obs.belief) throw std::invalid_argument("hidden max-weight needs the belief");
    return maxweight_decide(nets.front(), cond_erasure_hidden(*model_, *obs.belief), set_);
}

ProbabilisticPolicy::ProbabilisticPolicy(PolicySynthesis synthesis, int hidden_window)
    : synth_(std::move(synthesis)), window_(hidden_window) {}

PolicyDecision ProbabilisticPolicy::decide(const Observation& obs, const std::vector<QueueNetwork>&, Rng& rng) {
    if (window_ >= 0) {
        if (!obs.window_ready) return {};
        return probabilistic_decide(synth_.dist, synth_.ratios, obs.window, rng);
    }
    if (obs.state < 0) throw std::out_of_range("probabilistic policy needs the previous state");
    return probabilistic_decide(synth_.dist, synth_.ratios, static_cast<std::uint32_t>(obs.state), rng);
}

ArrivalSplit per_state_split(const ConditionedStats& cells, RatePoint target) {
    const int K = static_cast<int>(cells.size());
    lp::LinearProgram prog;
    std::vector<int> a(K), b(K);
    for (int s = 0; s < K; ++s) {
        a[s] = prog.add_var(0.0, 1.0);
        b[s] = prog.add_var(0.0, 1.0);
    }
    const double cap = 1e6;
    const int t = prog.add_var(0.0, cap, 1.0);
    for (int s = 0; s < K; ++s) {
        const auto& st = cells.stats[s];
        const double w = cells.weight[s];
        prog.add_row({{a[s], 1 - st.eps12}, {b[s], 1 - st.eps1}}, lp::Relation::Le, w * (1 - st.eps1) * (1 - st.eps12));
        prog.add_row({{a[s], 1 - st.eps2}, {b[s], 1 - st.eps12}}, lp::Relation::Le, w * (1 - st.eps2) * (1 - st.eps12));
    }
    std::vector<std::pair<int, double>> sum_a{{t, -target.r1}}, sum_b{{t, -target.r2}};
    for (int s = 0; s < K; ++s) {
        sum_a.emplace_back(a[s], 1.0);
        sum_b.emplace_back(b[s], 1.0);
    }
    prog.add_row(sum_a, lp::Relation::Eq, 0.0);
    prog.add_row(sum_b, lp::Relation::Eq, 0.0);
    auto sol = lp::solve(prog);
    if (!sol.optimal()) throw std::logic_error("per-state split LP failed");

    ArrivalSplit out;
    out.scale = sol.value;
    double ta = 0, tb = 0;
    for (int s = 0; s < K; ++s) {
        ta += sol.witness[a[s]];
        tb += sol.witness[b[s]];
    }
    for (int s = 0; s < K; ++s) {
        out.alpha.push_back(ta > 0 ? sol.witness[a[s]] / ta : cells.weight[s]);
        out.beta.push_back(tb > 0 ? sol.witness[b[s]] / tb : cells.weight[s]);
    }
    return out;
}

PolicyDecision per_state_memoryless_decide(const std::vector<QueueNetwork>& nets,
                                           const std::vector<ErasureStats>& stats, int state) {
    if (state < 0 || state >= static_cast<int>(nets.size()) || nets.size() != stats.size())
        throw std::out_of_range("per-state policy needs one network per state");
    PolicyDecision d = maxweight_decide(nets[state], stats[state], ActionSet::A3);
    d.network = state;
    return d;
}

PerStateMemoryless::PerStateMemoryless(const ChannelModel& model, RatePoint target, int delay)
    : stats_(visible_stats_table(model, delay)) {
    split_ = per_state_split(ConditionedStats::from_states(stats_, model.stationary()), target);
}

PerStateMemoryless::PerStateMemoryless(std::vector<ErasureStats> stats, ArrivalSplit split)
    : stats_(std::move(stats)), split_(std::move(split)) {
    if (split_.alpha.size() != stats_.size() || split_.beta.size() != stats_.size())
        throw std::invalid_argument("arrival split does not match the number of states");
}

int PerStateMemoryless::route_arrival(int session, Rng& rng) {
    const auto& f = session == 1 ? split_.alpha : split_.beta;
    double u = uniform01(rng), acc = 0.0;
    for (size_t s = 0; s < f.size(); ++s) {
        acc += f[s];
        if (u < acc) return static_cast<int>(s);
    }
    for (size_t s = f.size(); s-- > 0;)
        if (f[s] > 0) return static_cast<int>(s);
    return 0;
}

PolicyDecision PerStateMemoryless::decide(const Observation& obs, const std::vector<QueueNetwork>& nets, Rng&) {
    return per_state_memoryless_decide(nets, stats_, obs.state);
}

}  // namespace bpec
