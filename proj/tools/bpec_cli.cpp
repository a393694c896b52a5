#include "bpec/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace bpec;
using nlohmann::json;

namespace {

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return json::parse(in);
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::vector<double> parse_range(const std::string& spec) {
    // lo:hi:count or a comma separated list
    std::vector<double> v;
    if (spec.find(':') != std::string::npos) {
        double lo, hi;
        int n;
        char c1, c2;
        std::istringstream is(spec);
        if (!(is >> lo >> c1 >> hi >> c2 >> n) || n < 1) throw std::invalid_argument("bad range " + spec);
        for (int i = 0; i < n; ++i) v.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
        return v;
    }
    std::istringstream is(spec);
    std::string tok;
    while (std::getline(is, tok, ',')) v.push_back(std::stod(tok));
    return v;
}

PolicySpec parse_policy(const std::string& s) {
    PolicySpec p;
    auto colon = s.find(':');
    p.name = s.substr(0, colon);
    if (colon != std::string::npos) p.action_set = action_set_from_string(s.substr(colon + 1));
    return p;
}

json region_json(const RateRegion& r) {
    json pts = json::array();
    for (size_t i = 0; i < r.boundary.size(); ++i) {
        json p = {{"r1", r.boundary[i].r1}, {"r2", r.boundary[i].r2}};
        if (i < r.witnesses.size() && !r.witnesses[i].params.empty()) {
            json w = json::array();
            for (size_t c = 0; c < r.witnesses[i].params.size(); ++c)
                w.push_back({{"key", r.witnesses[i].keys.at(c)},
                             {"x", r.witnesses[i].params[c][0]},
                             {"y", r.witnesses[i].params[c][1]}});
            p["witness"] = w;
        }
        pts.push_back(p);
    }
    return {{"kind", to_string(r.kind)}, {"boundary", pts}};
}

std::string region_csv(const RateRegion& r) {
    std::ostringstream os;
    os.precision(12);
    os << "r1,r2\n";
    for (const auto& p : r.boundary) os << p.r1 << ',' << p.r2 << '\n';
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Broadcast packet erasure channel: rate regions, queue simulation and checks"};
    app.require_subcommand(1);

    // region
    auto* region_cmd = app.add_subcommand("region", "compute a rate region boundary");
    std::string channel_path, kind_name = "visible", region_format = "csv", region_out;
    int region_L = 1, region_delay = 1;
    region_cmd->add_option("channel", channel_path, "channel JSON (or scenario JSON with a channel field)")->required();
    region_cmd->add_option("--kind", kind_name,
                           "visible|reactive|hidden_L|memoryless_fb|memoryless_nofb|minkowski|uncoded");
    region_cmd->add_option("--L", region_L, "feedback window for hidden_L");
    region_cmd->add_option("--delay", region_delay, "state delay for conditioning");
    region_cmd->add_option("--format", region_format, "csv or json");
    region_cmd->add_option("-o,--out", region_out, "output file (stdout by default)");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "run one scenario");
    std::string scenario_path, trace_out, verdict_out, policy_override;
    std::optional<std::uint64_t> seed, horizon, stride;
    std::optional<double> r1, r2;
    sim_cmd->add_option("scenario", scenario_path, "scenario JSON")->required();
    sim_cmd->add_option("--seed", seed);
    sim_cmd->add_option("--horizon", horizon);
    sim_cmd->add_option("--stride", stride);
    sim_cmd->add_option("--r1", r1);
    sim_cmd->add_option("--r2", r2);
    sim_cmd->add_option("--policy", policy_override, "name[:action_set], e.g. maxweight:A3");
    sim_cmd->add_option("--trace", trace_out, "trace CSV path");
    sim_cmd->add_option("--verdict", verdict_out, "verdict JSON path (stdout by default)");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "stability map over a rate grid");
    std::string sweep_path, r1_spec = "0.1:0.5:5", r2_spec = "0.1:0.5:5", sweep_out;
    std::vector<std::string> policies{"maxweight:A5"};
    int threads = 0;
    std::optional<std::uint64_t> sweep_seed, sweep_horizon;
    sweep_cmd->add_option("scenario", sweep_path, "scenario template JSON")->required();
    sweep_cmd->add_option("--r1", r1_spec, "lo:hi:count or list");
    sweep_cmd->add_option("--r2", r2_spec, "lo:hi:count or list");
    sweep_cmd->add_option("--policies", policies, "policy list, name[:action_set]");
    sweep_cmd->add_option("--threads", threads);
    sweep_cmd->add_option("--seed", sweep_seed);
    sweep_cmd->add_option("--horizon", sweep_horizon);
    sweep_cmd->add_option("-o,--out", sweep_out, "CSV path (stdout by default)");

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "run the property suites");
    std::uint64_t verify_seed = 7;
    double verify_scale = 1.0;
    verify_cmd->add_option("--seed", verify_seed);
    verify_cmd->add_option("--scale", verify_scale, "multiplier on instance counts");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*region_cmd) {
            json cfg = read_json(channel_path);
            const json& chan = cfg.contains("channel") ? cfg["channel"] : cfg;
            ChannelModel model = channel_from_json(chan);
            const RegionKind kind = region_kind_from_string(kind_name);
            const ConditionedStats cells = visible_cells(model, region_delay);
            const ErasureStats avg = averaged_stats(cells);
            RateRegion r;
            switch (kind) {
                case RegionKind::visible: r = region_visible(cells); break;
                case RegionKind::reactive: r = region_reactive(cells); break;
                case RegionKind::hidden_L: r = region_hidden_L(model, region_L); break;
                case RegionKind::memoryless_fb: r = region_memoryless_fb(avg.eps1, avg.eps2, avg.eps12); break;
                case RegionKind::memoryless_nofb: r = region_memoryless_nofb(avg.eps1, avg.eps2); break;
                case RegionKind::minkowski: r = region_minkowski(cells); break;
                case RegionKind::uncoded: r = region_uncoded(cells); break;
            }
            write_text(region_out, region_format == "json" ? region_json(r).dump(2) + "\n" : region_csv(r));
            return 0;
        }
        if (*sim_cmd) {
            Scenario sc = scenario_from_json(read_json(scenario_path));
            if (seed) sc.seed = *seed;
            if (horizon) sc.horizon = *horizon;
            if (stride) sc.stride = *stride;
            if (r1) sc.rates.r1 = *r1;
            if (r2) sc.rates.r2 = *r2;
            if (!policy_override.empty()) sc.policy = parse_policy(policy_override);
            SimTrace tr = run(sc);
            if (!trace_out.empty()) write_text(trace_out, tr.to_csv());
            json out = {{"scenario", to_json(sc)}, {"policy", tr.policy}};
            StabilityThresholds th;
            if (sc.horizon >= th.min_horizon) out["verdict"] = stability_verdict(tr, th).to_json();
            auto tp = throughput_check(tr, sc);
            out["throughput"] = {tp[0], tp[1]};
            out["conservation_ok"] = tr.conservation_ok;
            if (tr.audit)
                out["audit"] = {{"ok", tr.audit->ok}, {"receiver", tr.audit->receiver},
                                {"counterexample", tr.audit->counterexample}};
            write_text(verdict_out, out.dump(2) + "\n");
            return (tr.audit && !tr.audit->ok) || !tr.conservation_ok ? 2 : 0;
        }
        if (*sweep_cmd) {
            SweepRequest req;
            req.base = scenario_from_json(read_json(sweep_path));
            if (sweep_seed) req.base.seed = *sweep_seed;
            if (sweep_horizon) req.base.horizon = *sweep_horizon;
            req.base.audit = false;
            for (double a : parse_range(r1_spec))
                for (double b : parse_range(r2_spec)) req.points.push_back({a, b});
            for (const auto& p : policies) req.policies.push_back(parse_policy(p));
            req.threads = threads;
            write_text(sweep_out, sweep_csv(sweep(req)));
            return 0;
        }
        if (*verify_cmd) {
            std::vector<CheckResult> all;
            for (auto* suite : {&verify_inclusions, &verify_min_cut, &verify_redundancy_transform,
                                &verify_decodability, &verify_forgetting}) {
                auto part = (*suite)(verify_seed, verify_scale);
                all.insert(all.end(), part.begin(), part.end());
            }
            bool ok = true;
            for (const auto& c : all) {
                std::cout << (c.ok ? "ok    " : "FAIL  ") << c.name;
                if (!c.detail.empty()) std::cout << "  [" << c.detail << "]";
                std::cout << '\n';
                ok = ok && c.ok;
            }
            return ok ? 0 : 2;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
