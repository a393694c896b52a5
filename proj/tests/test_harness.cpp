#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bpec/harness.hpp"

#include <cmath>

using namespace bpec;
using nlohmann::json;

namespace {

class IdlePolicy : public Policy {
public:
    std::string name() const override { return "idle"; }
    PolicyDecision decide(const Observation&, const std::vector<QueueNetwork>&, Rng&) override { return {}; }
};

Scenario base(const json& channel, double r1, double r2, std::uint64_t n = 100000) {
    Scenario s;
    s.channel = channel;
    s.rates = {r1, r2};
    s.horizon = n;
    s.seed = 1;
    s.stride = 1000;
    return s;
}

// Boundary point of a region along the ray through `dir`.
RatePoint on_ray(const RateRegion& r, RatePoint dir) {
    double lo = 0, hi = 2;
    for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (lo + hi);
        (r.contains_geometric({mid * dir.r1, mid * dir.r2}, 0.0) ? lo : hi) = mid;
    }
    return {lo * dir.r1, lo * dir.r2};
}

const json kFig10 = {{"gilbert_elliot", {{"eps1", 0.6}, {"g1", 0.1}, {"eps2", 0.5}, {"g2", 0.2}}}};

}  // namespace

TEST_CASE("zero arrivals leave the network empty") {
    Scenario s = base(kFig10, 0, 0);
    const SimTrace tr = run(s);
    for (const auto& row : tr.rows) CHECK(row.backlog == 0);
    const StabilityVerdict v = stability_verdict(tr);
    CHECK(v.stable);
    const auto tp = throughput_check(tr, s);
    CHECK(tp[0] == 0.0);
    CHECK(tp[1] == 0.0);
}

TEST_CASE("erasure-free channel delivers every arrival") {
    Scenario s = base({{"memoryless", {{"eps1", 0.0}, {"eps2", 0.0}, {"eps12", 0.0}}}}, 0.4, 0.4);
    s.policy.name = "uncoded";
    s.policy.action_set = ActionSet::A2;
    const SimTrace tr = run(s);
    std::uint64_t peak = 0;
    for (const auto& row : tr.rows) peak = std::max(peak, row.backlog);
    CHECK(peak < 100);
    const auto tp = throughput_check(tr, s);
    CHECK(tp[0] == doctest::Approx(0.4).epsilon(0.02));
    CHECK(tp[1] == doctest::Approx(0.4).epsilon(0.02));
    CHECK(tr.conservation_ok);
    REQUIRE(tr.audit);
    CHECK(tr.audit->ok);
}

TEST_CASE("runs are deterministic given the seed") {
    Scenario s = base(kFig10, 0.3, 0.3, 20000);
    s.stride = 100;
    const SimTrace a = run(s), b = run(s);
    CHECK(a.to_csv() == b.to_csv());
    s.seed = 2;
    CHECK(run(s).to_csv() != a.to_csv());
}

TEST_CASE("verdict on a server that never serves") {
    Scenario s = base(kFig10, 1.0, 0.0);
    const ChannelModel m = channel_from_json(s.channel);
    IdlePolicy idle;
    const SimTrace tr = run(s, m, idle);
    const StabilityVerdict v = stability_verdict(tr);
    CHECK_FALSE(v.stable);
    CHECK(v.tail_slope == doctest::Approx(1.0).epsilon(1e-6));
    Scenario shorter = base(kFig10, 0.1, 0.1, 5000);
    CHECK_THROWS(stability_verdict(run(shorter)));
}

TEST_CASE("conservation holds on every recorded row") {
    Scenario s = base(kFig10, 0.3, 0.33, 50000);
    s.stride = 50;
    const SimTrace tr = run(s);
    for (const auto& row : tr.rows) {
        CHECK(row.arrivals[0] + row.arrivals[1] == row.exits[0] + row.exits[1] + row.backlog);
        CHECK(row.backlog == row.q1[0] + row.q1[1] + row.q2[0] + row.q2[1] + row.q3[0] + row.q3[1]);
    }
    for (size_t k = 1; k < tr.rows.size(); ++k) {
        CHECK(tr.rows[k].exits[0] >= tr.rows[k - 1].exits[0]);
        CHECK(tr.rows[k].exits[1] >= tr.rows[k - 1].exits[1]);
    }
}

TEST_CASE("scenario JSON") {
    const json j = json::parse(R"({
        "channel": {"gilbert_elliot": {"mode": "hidden", "eps1": 0.6, "g1": 0.1, "eps_bad1": 0.866, "eps_good1": 0.15,
                                       "b1": 0.2, "eps2": 0.5, "g2": 0.2, "b2": 0.2, "eps_good2": 0.2, "eps_bad2": 0.8}},
        "visibility": "hidden",
        "rates": [0.2, 0.25],
        "policy": {"name": "maxweight", "action_set": "A3"},
        "horizon": 123456, "seed": 9, "stride": 10
    })");
    const Scenario s = scenario_from_json(j);
    CHECK(s.visibility == Visibility::hidden);
    CHECK(s.rates.r2 == 0.25);
    CHECK(s.policy.action_set == ActionSet::A3);
    CHECK(s.horizon == 123456);
    CHECK(channel_from_json(s.channel).num_states() == 4);
    const Scenario back = scenario_from_json(to_json(s));
    CHECK(to_json(back) == to_json(s));

    json bad = j;
    bad["rates"] = {1.5, 0.1};
    CHECK_THROWS(scenario_from_json(bad));
    bad = j;
    bad["visibility"] = "partial";
    CHECK_THROWS(scenario_from_json(bad));

    const json flat = json::parse(R"({"states": 2, "transition": [0.5, 0.5, 0.2, 0.8],
                                      "emission": [1, 0, 0, 0, 0, 0, 0, 1]})");
    CHECK(channel_from_json(flat).num_states() == 2);
    CHECK(channel_from_json(json{{"example_chain", {{"delta", 0.0}}}}).periodic());
}

TEST_CASE("sweep separates the inner region from the outer bound") {
    const ChannelModel m = channel_from_json(kFig10);
    const ConditionedStats cells = visible_cells(m);
    const RateRegion unc = region_uncoded(cells), vis = region_visible(cells);
    SweepRequest req;
    req.base = base(kFig10, 0, 0, 200000);
    req.base.audit = false;
    const std::vector<RatePoint> dirs{{1, 0.2}, {1, 1}, {0.3, 1}};
    std::vector<RatePoint> inner, outer;
    for (auto d : dirs) {
        const RatePoint u = on_ray(unc, d), v = on_ray(vis, d);
        inner.push_back({0.9 * u.r1, 0.9 * u.r2});
        outer.push_back({1.05 * v.r1, 1.05 * v.r2});
    }
    req.points = inner;
    req.points.insert(req.points.end(), outer.begin(), outer.end());
    PolicySpec a5, a2;
    a2.name = "uncoded";
    a2.action_set = ActionSet::A2;
    req.policies = {a5, a2};
    const auto cells_out = sweep(req);
    REQUIRE(cells_out.size() == 12);
    for (const auto& c : cells_out) {
        bool is_inner = false;
        for (auto p : inner) is_inner = is_inner || (p.r1 == c.rates.r1 && p.r2 == c.rates.r2);
        CAPTURE(c.policy);
        CAPTURE(c.rates.r1);
        CAPTURE(c.rates.r2);
        CHECK(c.verdict.stable == is_inner);
    }
    CHECK(sweep_csv(cells_out).rfind("r1,r2,policy,stable", 0) == 0);
}

TEST_CASE("stale state information lowers the stable frontier") {
    const json chan = {{"gilbert_elliot", {{"eps1", 0.6}, {"g1", 0.1}, {"eps2", 0.5}, {"g2", 0.1}}}};
    const ChannelModel m = channel_from_json(chan);
    const double r_near = visible_max_symmetric_rate(visible_cells(m, 1));
    const double r_far = visible_max_symmetric_rate(visible_cells(m, 10));
    REQUIRE(r_near > r_far + 0.01);
    const double r = 0.5 * (r_near + r_far);
    Scenario s = base(chan, r, r, 1000000);
    s.audit = false;
    s.delay = 1;
    CHECK(stability_verdict(run(s)).stable);
    s.delay = 10;
    CHECK_FALSE(stability_verdict(run(s)).stable);
}

TEST_CASE("hidden max-weight tracks the windowed region") {
    const json chan = json::parse(R"({"gilbert_elliot": {"mode": "hidden", "eps1": 0.6, "g1": 0.1, "eps_good1": 0.15,
        "b1": 0.2, "eps_bad1": 0.866, "eps2": 0.5, "g2": 0.2, "eps_good2": 0.2, "b2": 0.2, "eps_bad2": 0.8}})");
    const ChannelModel m = channel_from_json(chan);
    const RateRegion h5 = region_hidden_L(m, 5);
    SweepRequest req;
    req.base = base(chan, 0, 0, 2000000);
    req.base.visibility = Visibility::hidden;
    req.base.audit = false;
    std::vector<RatePoint> lo, hi;
    for (auto d : std::vector<RatePoint>{{1, 0.1}, {1, 0.5}, {1, 1}, {0.5, 1}, {0.1, 1}}) {
        const RatePoint b = on_ray(h5, d);
        lo.push_back({0.97 * b.r1, 0.97 * b.r2});
        hi.push_back({1.03 * b.r1, 1.03 * b.r2});
    }
    req.points = lo;
    req.points.insert(req.points.end(), hi.begin(), hi.end());
    req.policies = {PolicySpec{}};
    const auto out = sweep(req);
    for (size_t k = 0; k < out.size(); ++k) {
        CAPTURE(out[k].rates.r1);
        CAPTURE(out[k].rates.r2);
        CHECK(out[k].verdict.stable == (k < lo.size()));
    }
}
