#pragma once

#include "bpec/channel.hpp"
#include "bpec/policies.hpp"
#include "bpec/queue_net.hpp"
#include "bpec/regions.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bpec {

enum class Visibility { visible, hidden };

struct PolicySpec {
    std::string name = "maxweight";  // maxweight | probabilistic | per_state_memoryless | uncoded
    ActionSet action_set = ActionSet::A5;
    int window = 2;                  // hidden probabilistic policy: feedback window L
    bool reactive_witness = false;   // probabilistic: synthesize from the reactive region LP
    std::optional<RatePoint> target; // probabilistic / per-state design point, defaults to the rates
};

struct Scenario {
    nlohmann::json channel;  // raw channel config, kept for reporting
    Visibility visibility = Visibility::visible;
    int delay = 1;
    RatePoint rates;
    PolicySpec policy;
    std::uint64_t horizon = 100000;
    std::uint64_t seed = 1;
    std::uint64_t stride = 1000;
    bool audit = true;  // keep the reception ledger and run the decodability audit
};

ChannelModel channel_from_json(const nlohmann::json& j);
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scenario& s);

struct TraceRow {
    std::uint64_t t = 0;
    std::uint64_t backlog = 0;
    std::array<std::uint64_t, 2> q1{}, q2{}, q3{}, exits{}, arrivals{};
};

struct SimTrace {
    std::uint64_t stride = 1;
    std::uint64_t horizon = 0;
    std::vector<TraceRow> rows;
    std::array<std::uint64_t, 2> arrivals{}, exits{};
    std::uint64_t final_backlog = 0;
    bool conservation_ok = true;
    std::optional<AuditResult> audit;
    std::string policy;

    std::string to_csv() const;
};

struct StabilityThresholds {
    double backlog_ratio = 1e-3;
    double slope = 1e-3;
    std::uint64_t min_horizon = 100000;
};

struct StabilityVerdict {
    bool stable = false;
    double final_backlog_over_n = 0.0;
    double tail_slope = 0.0;
    nlohmann::json to_json() const;
};

std::unique_ptr<Policy> make_policy(const Scenario& scenario, const ChannelModel& model);

SimTrace run(const Scenario& scenario);
SimTrace run(const Scenario& scenario, const ChannelModel& model, Policy& policy);
// Least-squares slope of the backlog over the last half of the recorded rows.
double tail_slope(const SimTrace& trace);
StabilityVerdict stability_verdict(const SimTrace& trace, const StabilityThresholds& th = {});
std::array<double, 2> throughput_check(const SimTrace& trace, const Scenario& scenario);

struct SweepCell {
    RatePoint rates;
    std::string policy;
    StabilityVerdict verdict;
    std::array<double, 2> throughput{};
};

struct SweepRequest {
    Scenario base;
    std::vector<RatePoint> points;
    std::vector<PolicySpec> policies;
    int threads = 0;  // 0 picks hardware concurrency
    StabilityThresholds thresholds;
};

std::vector<SweepCell> sweep(const SweepRequest& req);
std::string sweep_csv(const std::vector<SweepCell>& cells);
std::string policy_label(const PolicySpec& p);

struct CheckResult {
    std::string name;
    bool ok = false;
    std::string detail;
};

// Randomized property suites used by `verify`; `scale` multiplies instance counts.
std::vector<CheckResult> verify_inclusions(std::uint64_t seed, double scale = 1.0);
std::vector<CheckResult> verify_min_cut(std::uint64_t seed, double scale = 1.0);
std::vector<CheckResult> verify_redundancy_transform(std::uint64_t seed, double scale = 1.0);
std::vector<CheckResult> verify_decodability(std::uint64_t seed, double scale = 1.0);
std::vector<CheckResult> verify_forgetting(std::uint64_t seed, double scale = 1.0);

// Random channels used by the property suites.
ChannelModel random_channel(Rng& rng, int max_states, bool memoryless, bool positive_emissions = false);
ActionDistribution random_action_distribution(Rng& rng, const ConditionedStats& cells);

}  // namespace bpec
