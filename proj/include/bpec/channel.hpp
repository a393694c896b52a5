#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace bpec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

// Erasure pair (z1, z2); zj = 1 means the packet was erased at receiver j.
struct Erasure {
    int z1 = 0;
    int z2 = 0;
    bool operator==(const Erasure&) const = default;
};

// Emission columns use the fixed order (0,0), (0,1), (1,0), (1,1).
inline int outcome_index(Erasure z) { return 2 * z.z1 + z.z2; }
inline Erasure outcome_from_index(int k) { return {k >> 1, k & 1}; }

struct ErasureStats {
    double eps1 = 0, eps2 = 0, eps12 = 0;
    double eps1_not2 = 0, eps_not1_2 = 0, eps_not1_not2 = 1;

    // p is a joint law over the four outcomes in emission order.
    static ErasureStats from_joint(const std::array<double, 4>& p);
    static ErasureStats from_joint(const Eigen::RowVectorXd& p);
    // Independent-looking memoryless stats; throws if eps12 > min(eps1, eps2).
    static ErasureStats from_marginals(double eps1, double eps2, double eps12);

    bool valid(double tol = 1e-12) const;
};

double uniform01(Rng& rng);

class ChannelModel {
public:
    ChannelModel(Matrix transition, Matrix emission, bool allow_periodic = false);

    int num_states() const { return static_cast<int>(transition_.rows()); }
    const Matrix& transition() const { return transition_; }
    const Matrix& emission() const { return emission_; }
    const Vector& stationary() const { return stationary_; }
    bool periodic() const { return periodic_; }
    bool memoryless() const;
    bool strictly_positive_emissions() const;

    // Per-user Gilbert-Elliot parameters. b is derived from eps and g when left negative.
    struct GeUser {
        double eps = 0.5;
        double g = 0.5;
        double b = -1;
        double eps_good = 0.0;  // hidden variant only
        double eps_bad = 1.0;
    };
    // States GG, GB, BG, BB; the first letter belongs to user 1.
    static ChannelModel gilbert_elliot_visible(double eps1, double g1, double eps2, double g2);
    static ChannelModel gilbert_elliot_hidden(const GeUser& u1, const GeUser& u2);
    // The two-state chain of the proactive-coding example; delta = 0 is periodic.
    static ChannelModel example_chain(double delta);
    static ChannelModel single_state(const std::array<double, 4>& emission_row);

private:
    Matrix transition_;
    Matrix emission_;
    Vector stationary_;
    bool periodic_ = false;
};

Vector stationary_distribution(const ChannelModel& model);

ErasureStats cond_erasure_visible(const ChannelModel& model, int prev_state, int delay = 1);
std::vector<ErasureStats> visible_stats_table(const ChannelModel& model, int delay = 1);

// Belief holds P(S_t | Z^{t-1}): the predictive state law for the next slot.
using Belief = Vector;

Belief belief_update(const ChannelModel& model, const Belief& belief, Erasure observed);
ErasureStats cond_erasure_hidden(const ChannelModel& model, const Belief& belief);
// Window samples are ordered oldest first; the recursion starts from pi.
ErasureStats cond_erasure_hidden(const ChannelModel& model, const std::vector<Erasure>& window);
Belief window_belief(const ChannelModel& model, const std::vector<Erasure>& window);

constexpr int kMaxWindow = 8;

// Window z^L is encoded base 4 with the oldest sample as the most significant digit.
std::vector<Erasure> decode_window(std::uint32_t key, int L);
std::uint32_t encode_window(const std::vector<Erasure>& window);

struct WindowTable {
    int L = 0;
    std::vector<double> prob;          // P_{Z^L}(z^L)
    std::vector<ErasureStats> stats;   // next-slot stats given z^L (valid where prob > 0)
};

std::vector<double> window_distribution(const ChannelModel& model, int L);
WindowTable window_table(const ChannelModel& model, int L);

double forgetting_check(const ChannelModel& model, int L, int trace_len, std::uint64_t seed);

std::pair<int, Erasure> sample_step(const ChannelModel& model, int current_state, Rng& rng);
int sample_initial_state(const ChannelModel& model, Rng& rng);

}  // namespace bpec
