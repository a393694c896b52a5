#include "bpec/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace bpec {

using nlohmann::json;

namespace {

Matrix matrix_from_json(const json& j, int n, const char* what) {
    if (!j.is_array() || j.empty()) throw std::invalid_argument(std::string(what) + " must be a nonempty array");
    if (j.front().is_array()) {
        const int rows = static_cast<int>(j.size());
        const int cols = static_cast<int>(j.front().size());
        Matrix m(rows, cols);
        for (int r = 0; r < rows; ++r) {
            if (static_cast<int>(j[r].size()) != cols) throw std::invalid_argument(std::string(what) + " is ragged");
            for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
        }
        return m;
    }
    // Flat row-major layout needs the state count.
    if (n <= 0) throw std::invalid_argument(std::string(what) + " given flat without \"states\"");
    const int cols = static_cast<int>(j.size()) / n;
    if (cols * n != static_cast<int>(j.size())) throw std::invalid_argument(std::string(what) + " has a bad size");
    Matrix m(n, cols);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = j[r * cols + c].get<double>();
    return m;
}

ChannelModel::GeUser ge_user(const json& g, int j) {
    const std::string k = std::to_string(j);
    ChannelModel::GeUser u;
    u.eps = g.at("eps" + k).get<double>();
    u.g = g.at("g" + k).get<double>();
    u.b = g.value("b" + k, -1.0);
    u.eps_good = g.value("eps_good" + k, g.value("epsG" + k, 0.0));
    u.eps_bad = g.value("eps_bad" + k, g.value("epsB" + k, 1.0));
    return u;
}

}  // namespace

ChannelModel channel_from_json(const json& j) {
    if (j.contains("gilbert_elliot")) {
        const json& g = j.at("gilbert_elliot");
        const std::string mode = g.value("mode", "visible");
        if (mode == "visible")
            return ChannelModel::gilbert_elliot_visible(g.at("eps1").get<double>(), g.at("g1").get<double>(),
                                                        g.at("eps2").get<double>(), g.at("g2").get<double>());
        if (mode == "hidden") return ChannelModel::gilbert_elliot_hidden(ge_user(g, 1), ge_user(g, 2));
        throw std::invalid_argument("gilbert_elliot mode must be visible or hidden");
    }
    if (j.contains("example_chain")) return ChannelModel::example_chain(j.at("example_chain").value("delta", 0.0));
    if (j.contains("memoryless")) {
        const json& m = j.at("memoryless");
        const double e1 = m.at("eps1").get<double>(), e2 = m.at("eps2").get<double>();
        const double e12 = m.value("eps12", e1 * e2);
        return ChannelModel::single_state({1 - e1 - e2 + e12, e2 - e12, e1 - e12, e12});
    }
    const int n = j.value("states", 0);
    Matrix P = matrix_from_json(j.at("transition"), n, "transition");
    Matrix E = matrix_from_json(j.at("emission"), static_cast<int>(P.rows()), "emission");
    return ChannelModel(P, E, j.value("allow_periodic", false));
}

Scenario scenario_from_json(const json& j) {
    Scenario s;
    s.channel = j.at("channel");
    const std::string vis = j.value("visibility", "visible");
    if (vis == "visible") s.visibility = Visibility::visible;
    else if (vis == "hidden") s.visibility = Visibility::hidden;
    else throw std::invalid_argument("visibility must be visible or hidden");
    s.delay = j.value("delay", 1);
    if (j.contains("rates")) {
        s.rates = {j["rates"].at(0).get<double>(), j["rates"].at(1).get<double>()};
    } else {
        s.rates = {j.value("r1", 0.0), j.value("r2", 0.0)};
    }
    if (j.contains("policy")) {
        const json& p = j["policy"];
        if (p.is_string()) {
            s.policy.name = p.get<std::string>();
        } else {
            s.policy.name = p.value("name", "maxweight");
            s.policy.action_set = action_set_from_string(p.value("action_set", "A5"));
            s.policy.window = p.value("window", p.value("L", 2));
            s.policy.reactive_witness = p.value("reactive_witness", false);
            if (p.contains("target")) s.policy.target = RatePoint{p["target"].at(0).get<double>(), p["target"].at(1).get<double>()};
        }
    }
    s.horizon = j.value("horizon", s.horizon);
    s.seed = j.value("seed", s.seed);
    s.stride = j.value("stride", s.stride);
    s.audit = j.value("audit", s.audit);
    if (s.rates.r1 < 0 || s.rates.r1 > 1 || s.rates.r2 < 0 || s.rates.r2 > 1)
        throw std::invalid_argument("arrival rates must lie in [0, 1]");
    if (s.horizon < 1) throw std::invalid_argument("horizon must be positive");
    if (s.delay < 1) throw std::invalid_argument("delay must be at least 1");
    if (s.stride < 1) s.stride = 1;
    return s;
}

json to_json(const Scenario& s) {
    json p = {{"name", s.policy.name}, {"action_set", to_string(s.policy.action_set)}, {"window", s.policy.window},
              {"reactive_witness", s.policy.reactive_witness}};
    if (s.policy.target) p["target"] = {s.policy.target->r1, s.policy.target->r2};
    return {{"channel", s.channel},
            {"visibility", s.visibility == Visibility::visible ? "visible" : "hidden"},
            {"delay", s.delay},
            {"rates", {s.rates.r1, s.rates.r2}},
            {"policy", p},
            {"horizon", s.horizon},
            {"seed", s.seed},
            {"stride", s.stride},
            {"audit", s.audit}};
}

std::string SimTrace::to_csv() const {
    std::ostringstream os;
    os << "t,backlog,q1_1,q1_2,q2_1,q2_2,q3_1,q3_2,exits_1,exits_2,arrivals_1,arrivals_2\n";
    for (const auto& r : rows)
        os << r.t << ',' << r.backlog << ',' << r.q1[0] << ',' << r.q1[1] << ',' << r.q2[0] << ',' << r.q2[1] << ','
           << r.q3[0] << ',' << r.q3[1] << ',' << r.exits[0] << ',' << r.exits[1] << ',' << r.arrivals[0] << ','
           << r.arrivals[1] << '\n';
    return os.str();
}

json StabilityVerdict::to_json() const {
    return {{"stable", stable}, {"final_backlog_over_n", final_backlog_over_n}, {"tail_slope", tail_slope}};
}

std::unique_ptr<Policy> make_policy(const Scenario& sc, const ChannelModel& model) {
    const auto& p = sc.policy;
    const bool visible = sc.visibility == Visibility::visible;
    if (p.name == "maxweight" || p.name == "uncoded" || p.name == "reactive") {
        ActionSet set = p.name == "uncoded" ? ActionSet::A2 : p.name == "reactive" ? ActionSet::A3 : p.action_set;
        if (visible) return std::make_unique<MaxWeightVisible>(model, set, sc.delay);
        return std::make_unique<MaxWeightHidden>(model, set);
    }
    const RatePoint target = p.target.value_or(sc.rates);
    if (p.name == "probabilistic") {
        if (visible)
            return std::make_unique<ProbabilisticPolicy>(
                synthesize_policy(visible_cells(model, sc.delay), target, p.reactive_witness));
        if (sc.delay != 1) throw std::invalid_argument("the hidden probabilistic policy assumes delay 1");
        return std::make_unique<ProbabilisticPolicy>(
            synthesize_policy(hidden_cells(model, p.window), target, p.reactive_witness), p.window);
    }
    if (p.name == "per_state_memoryless") {
        if (!visible) throw std::invalid_argument("per-state policy needs the visible state");
        return std::make_unique<PerStateMemoryless>(model, target, sc.delay);
    }
    throw std::invalid_argument("unknown policy: " + p.name);
}

SimTrace run(const Scenario& sc) {
    ChannelModel model = channel_from_json(sc.channel);
    auto policy = make_policy(sc, model);
    return run(sc, model, *policy);
}

SimTrace run(const Scenario& sc, const ChannelModel& model, Policy& policy) {
    Rng rng(sc.seed);
    const int d = sc.delay;
    const bool hidden = sc.visibility == Visibility::hidden;
    std::vector<QueueNetwork> nets(policy.num_networks(), QueueNetwork(sc.audit));

    // States S_{t-d} .. S_{t-1}; the chain is pre-rolled so the first slot already has a delayed state.
    std::deque<int> states;
    int s = sample_initial_state(model, rng);
    states.push_back(s);
    for (int k = 1; k < d; ++k) {
        s = sample_step(model, s, rng).first;
        states.push_back(s);
    }

    const int L = std::clamp(sc.policy.window, 0, kMaxWindow);
    Belief raw = model.stationary();
    Belief delayed = raw;
    Matrix lag = Matrix::Identity(model.num_states(), model.num_states());
    for (int k = 1; k < d; ++k) lag = lag * model.transition();
    const Matrix lag_t = lag.transpose();
    std::deque<Erasure> pending, window;
    std::uint64_t released = 0;

    SimTrace trace;
    trace.stride = sc.stride;
    trace.horizon = sc.horizon;
    trace.policy = policy.name();
    std::array<std::uint64_t, 2> arrivals{0, 0};
    Observation obs;

    auto totals = [&](TraceRow& row) {
        row = TraceRow{};
        for (const auto& n : nets)
            for (int j = 1; j <= 2; ++j) {
                row.q1[j - 1] += n.q1_size(j);
                row.q2[j - 1] += n.q2_size(j);
                row.q3[j - 1] += n.q3_size(j);
                row.exits[j - 1] += n.exit_count(j);
            }
        row.arrivals = arrivals;
        for (int j = 0; j < 2; ++j) row.backlog += row.q1[j] + row.q2[j] + row.q3[j];
    };

    TraceRow row;
    for (std::uint64_t t = 1; t <= sc.horizon; ++t) {
        const double rates[2] = {sc.rates.r1, sc.rates.r2};
        for (int j = 1; j <= 2; ++j)
            if (rates[j - 1] > 0 && uniform01(rng) < rates[j - 1]) {
                nets[policy.route_arrival(j, rng)].arrive(j);
                ++arrivals[j - 1];
            }

        if (hidden) {
            obs.state = -1;
            obs.belief = &delayed;
            obs.window_ready = released >= static_cast<std::uint64_t>(L);
            obs.window = obs.window_ready ? encode_window(std::vector<Erasure>(window.begin(), window.end())) : 0;
        } else {
            obs.state = states.front();
        }
        PolicyDecision dec = policy.decide(obs, nets, rng);

        auto [next, z] = sample_step(model, s, rng);
        s = next;
        states.push_back(s);
        states.pop_front();

        const LinkFlags C = compute_capacities(dec.action, z);
        LinkFlags E{};
        for (int j = 0; j < 2; ++j)
            for (int l = 0; l < kNumLinks; ++l) E[j][l] = dec.intents[j][l] & C[j][l];
        nets[dec.network].apply_slot(dec.action, z, E);

        if (hidden) {
            pending.push_back(z);
            bool changed = false;
            while (pending.size() > static_cast<std::size_t>(d - 1)) {
                const Erasure f = pending.front();
                pending.pop_front();
                raw = belief_update(model, raw, f);
                window.push_back(f);
                if (window.size() > static_cast<std::size_t>(L)) window.pop_front();
                ++released;
                changed = true;
            }
            if (changed) delayed = d == 1 ? raw : Belief(lag_t * raw);
        }

        std::uint64_t exits = 0, backlog = 0;
        for (const auto& n : nets) {
            exits += n.exit_count(1) + n.exit_count(2);
            backlog += n.backlog();
        }
        if (arrivals[0] + arrivals[1] != exits + backlog) trace.conservation_ok = false;

        if (t % sc.stride == 0 || t == sc.horizon) {
            totals(row);
            row.t = t;
            trace.rows.push_back(row);
        }
    }

    trace.arrivals = arrivals;
    totals(row);
    trace.exits = row.exits;
    trace.final_backlog = row.backlog;
    if (sc.audit) {
        AuditResult agg;
        for (const auto& n : nets) {
            AuditResult a = audit_decodability(n);
            if (!a.ok) {
                agg = a;
                break;
            }
        }
        trace.audit = agg;
    }
    return trace;
}

double tail_slope(const SimTrace& trace) {
    const double half = static_cast<double>(trace.horizon) / 2.0;
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& r : trace.rows) {
        if (static_cast<double>(r.t) < half) continue;
        const double x = static_cast<double>(r.t), y = static_cast<double>(r.backlog);
        n += 1;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    if (n < 2) return 0.0;
    const double den = n * sxx - sx * sx;
    return den > 0 ? (n * sxy - sx * sy) / den : 0.0;
}

StabilityVerdict stability_verdict(const SimTrace& trace, const StabilityThresholds& th) {
    if (trace.horizon < th.min_horizon) throw std::invalid_argument("horizon too short for a stability verdict");
    StabilityVerdict v;
    v.final_backlog_over_n = static_cast<double>(trace.final_backlog) / static_cast<double>(trace.horizon);
    v.tail_slope = tail_slope(trace);
    v.stable = v.final_backlog_over_n < th.backlog_ratio && v.tail_slope < th.slope;
    return v;
}

std::array<double, 2> throughput_check(const SimTrace& trace, const Scenario&) {
    const double n = static_cast<double>(trace.horizon);
    return {static_cast<double>(trace.exits[0]) / n, static_cast<double>(trace.exits[1]) / n};
}

std::string policy_label(const PolicySpec& p) {
    if (p.name == "maxweight") return "maxweight_" + to_string(p.action_set);
    return p.name;
}

std::vector<SweepCell> sweep(const SweepRequest& req) {
    struct Task {
        RatePoint rates;
        const PolicySpec* policy;
    };
    std::vector<Task> tasks;
    for (const auto& pt : req.points)
        for (const auto& p : req.policies) tasks.push_back({pt, &p});
    std::vector<SweepCell> out(tasks.size());
    std::vector<std::string> errors(tasks.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            Scenario sc = req.base;
            sc.rates = tasks[i].rates;
            sc.policy = *tasks[i].policy;
            SweepCell& cell = out[i];
            cell.rates = sc.rates;
            cell.policy = policy_label(sc.policy);
            try {
                SimTrace tr = run(sc);
                cell.verdict = stability_verdict(tr, req.thresholds);
                cell.throughput = throughput_check(tr, sc);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    unsigned n = req.threads > 0 ? static_cast<unsigned>(req.threads) : std::max(1u, std::thread::hardware_concurrency());
    n = std::min<unsigned>(n, static_cast<unsigned>(std::max<std::size_t>(tasks.size(), 1)));
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty()) throw std::runtime_error("sweep cell " + std::to_string(i) + ": " + errors[i]);
    return out;
}

std::string sweep_csv(const std::vector<SweepCell>& cells) {
    std::ostringstream os;
    os.precision(10);
    os << "r1,r2,policy,stable,slope,backlog_over_n,throughput_1,throughput_2\n";
    for (const auto& c : cells)
        os << c.rates.r1 << ',' << c.rates.r2 << ',' << c.policy << ',' << (c.verdict.stable ? 1 : 0) << ','
           << c.verdict.tail_slope << ',' << c.verdict.final_backlog_over_n << ',' << c.throughput[0] << ','
           << c.throughput[1] << '\n';
    return os.str();
}

}  // namespace bpec
