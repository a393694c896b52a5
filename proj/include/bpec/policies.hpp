#pragma once

#include "bpec/channel.hpp"
#include "bpec/queue_net.hpp"
#include "bpec/regions.hpp"

#include <array>
#include <memory>
#include <string>
#include <vector>

namespace bpec {

enum class ActionSet { A2, A3, A5 };
std::string to_string(ActionSet s);
ActionSet action_set_from_string(const std::string& name);

// What the transmitter sees before choosing the action of slot t.
struct Observation {
    int state = -1;             // previous (possibly delayed) state, visible mode
    std::uint32_t window = 0;   // last L feedback samples, oldest first
    bool window_ready = false;  // fewer than L samples seen so far
    const Belief* belief = nullptr;
};

struct PolicyDecision {
    int action = 0;
    LinkFlags intents{};  // masked with the slot's capacities by the caller
    int network = 0;      // sub-network served (per-state policy only)
};

using Weights = std::array<double, kNumActions>;

Weights maxweight_weights(const QueueNetwork& net, const ErasureStats& stats, ActionSet set);
// E_lm = 1 iff Q_l - Q_m > 0 on the links of the action (Q4 counts as empty).
LinkFlags backpressure_intents(const QueueNetwork& net, int action, ActionSet set);
PolicyDecision maxweight_decide(const QueueNetwork& net, const ErasureStats& stats, ActionSet set);

// Samples the action for the observed key and the link intents with probabilities f/c.
PolicyDecision probabilistic_decide(const ActionDistribution& dist, const std::array<LinkArray, 2>& ratios,
                                    std::uint32_t key, Rng& rng);

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    virtual int num_networks() const { return 1; }
    virtual int route_arrival(int /*session*/, Rng& /*rng*/) { return 0; }
    virtual PolicyDecision decide(const Observation& obs, const std::vector<QueueNetwork>& nets, Rng& rng) = 0;
};

class MaxWeightVisible : public Policy {
public:
    MaxWeightVisible(const ChannelModel& model, ActionSet set, int delay = 1);
    std::string name() const override;
    PolicyDecision decide(const Observation& obs, const std::vector<QueueNetwork>& nets, Rng& rng) override;

private:
    std::vector<ErasureStats> stats_;
    ActionSet set_;
};

class MaxWeightHidden : public Policy {
public:
    MaxWeightHidden(const ChannelModel& model, ActionSet set);
    std::string name() const override;
    PolicyDecision decide(const Observation& obs, const std::vector<QueueNetwork>& nets, Rng& rng) override;

private:
    const ChannelModel* model_;
    ActionSet set_;
};

class ProbabilisticPolicy : public Policy {
public:
    // hidden_window < 0 selects the visible keying by previous state.
    ProbabilisticPolicy(PolicySynthesis synthesis, int hidden_window = -1);
    std::string name() const override { return "probabilistic"; }
    PolicyDecision decide(const Observation& obs, const std::vector<QueueNetwork>& nets, Rng& rng) override;
    const PolicySynthesis& synthesis() const { return synth_; }

private:
    PolicySynthesis synth_;
    int window_;
};

struct ArrivalSplit {
    std::vector<double> alpha, beta;  // fractions of each session routed to state s
    double scale = 0.0;               // largest t with t * target supported
};

// Chooses alpha_s, beta_s so that the per-state rates sit inside pi_s * C_fb(s).
ArrivalSplit per_state_split(const ConditionedStats& cells, RatePoint target);

PolicyDecision per_state_memoryless_decide(const std::vector<QueueNetwork>& nets,
                                           const std::vector<ErasureStats>& stats, int state);

class PerStateMemoryless : public Policy {
public:
    PerStateMemoryless(const ChannelModel& model, RatePoint target, int delay = 1);
    PerStateMemoryless(std::vector<ErasureStats> stats, ArrivalSplit split);
    std::string name() const override { return "per_state_memoryless"; }
    int num_networks() const override { return static_cast<int>(stats_.size()); }
    int route_arrival(int session, Rng& rng) override;
    PolicyDecision decide(const Observation& obs, const std::vector<QueueNetwork>& nets, Rng& rng) override;
    const ArrivalSplit& split() const { return split_; }

private:
    std::vector<ErasureStats> stats_;
    ArrivalSplit split_;
};

}  // namespace bpec
