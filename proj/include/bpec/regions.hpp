#pragma once

#include "bpec/channel.hpp"
#include "bpec/lp.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bpec {

struct RatePoint {
    double r1 = 0.0;
    double r2 = 0.0;
};

enum class RegionKind { visible, reactive, hidden_L, memoryless_fb, memoryless_nofb, minkowski, uncoded };

std::string to_string(RegionKind kind);
RegionKind region_kind_from_string(const std::string& name);

// Conditioning cells of a region LP: previous states (visible) or feedback windows (hidden).
struct ConditionedStats {
    std::vector<ErasureStats> stats;
    std::vector<double> weight;
    std::vector<std::uint32_t> keys;

    std::size_t size() const { return stats.size(); }
    static ConditionedStats from_states(const std::vector<ErasureStats>& stats, const Vector& pi);
};

ConditionedStats visible_cells(const ChannelModel& model, int delay = 1);
// Zero-probability windows are dropped.
ConditionedStats hidden_cells(const ChannelModel& model, int L);
ErasureStats averaged_stats(const ConditionedStats& cells);

// Per cell (x, y) for coding regions, (p(1), p(2)) for the uncoded region.
struct RegionWitness {
    RegionKind kind = RegionKind::visible;
    std::vector<std::uint32_t> keys;
    std::vector<std::array<double, 2>> params;
};

struct TraceOptions {
    int directions = 257;
    int refine_depth = 24;
    double refine_tol = 1e-11;
};

class RateRegion {
public:
    RegionKind kind = RegionKind::visible;
    // From (R1max, 0) to (0, R2max); r2 nondecreasing along the list.
    std::vector<RatePoint> boundary;
    std::vector<RegionWitness> witnesses;  // aligned with boundary where available

    bool contains(RatePoint p, double tol = 1e-9) const;
    bool contains_geometric(RatePoint p, double tol = 1e-9) const;
    double support(double u1, double u2) const;
    double max_r1() const;
    double max_r2() const;

    std::function<bool(RatePoint, double)> member;  // LP membership when set
};

// Largest (r1, r2) = (r, r) on the polygon.
double max_symmetric_rate(const RateRegion& region);
double distance_to_region(const RateRegion& region, RatePoint p);
double hausdorff_distance(const RateRegion& a, const RateRegion& b);
// Every boundary vertex of inner lies in outer (tolerance tol).
bool region_subset(const RateRegion& inner, const RateRegion& outer, double tol = 1e-9);

// Concave boundary of the downward closure of a point set in the nonnegative quadrant.
std::vector<RatePoint> monotone_boundary(std::vector<RatePoint> points);

RateRegion region_visible(const ConditionedStats& cells, const TraceOptions& opt = {});
RateRegion region_visible(const std::vector<ErasureStats>& stats, const Vector& pi, const TraceOptions& opt = {});
RateRegion region_reactive(const ConditionedStats& cells, const TraceOptions& opt = {});
RateRegion region_reactive(const std::vector<ErasureStats>& stats, const Vector& pi, const TraceOptions& opt = {});
constexpr int kMaxRegionWindow = 5;
RateRegion region_hidden_L(const ChannelModel& model, int L, const TraceOptions& opt = {});
RateRegion region_memoryless_fb(double eps1, double eps2, double eps12);
RateRegion region_memoryless_nofb(double eps1, double eps2);
RateRegion region_minkowski(const ConditionedStats& cells, int directions = 720);
RateRegion region_uncoded(const ConditionedStats& cells, const TraceOptions& opt = {});

// The coding LP over (x, y, R1, R2); reactive adds x + y >= 1 per cell.
struct CodingLp {
    lp::LinearProgram program;
    int r1 = 0, r2 = 0;
    int num_cells = 0;
    int x(int c) const { return 2 * c; }
    int y(int c) const { return 2 * c + 1; }
};
CodingLp build_coding_lp(const ConditionedStats& cells, bool reactive);
bool coding_feasible(const ConditionedStats& cells, bool reactive, RatePoint p);
double reactive_max_symmetric_rate(const ConditionedStats& cells);
double visible_max_symmetric_rate(const ConditionedStats& cells);

// ---- cut calculus and policy synthesis ----

constexpr int kNumActions = 6;  // idle(0), 1..5

struct ActionDistribution {
    std::vector<std::uint32_t> keys;
    std::vector<std::array<double, kNumActions>> rows;

    std::size_t size() const { return rows.size(); }
    int index_of(std::uint32_t key) const;
    bool valid(double tol = 1e-12) const;
};

enum Link { L12 = 0, L13, L14, L24, L32, L34 };
constexpr int kNumLinks = 6;
using LinkArray = std::array<double, kNumLinks>;

struct CutValues {
    double A = 0, B = 0, C = 0, D = 0;
    double min() const;
};

// Receiver j in {1, 2}.
LinkArray link_capacities(const ActionDistribution& dist, const ConditionedStats& cells, int j);
CutValues cut_values(const ActionDistribution& dist, const ConditionedStats& cells, int j);
// Max flow from Q1 to Q4 of one receiver's network; flows returned in link order.
double max_flow(const LinkArray& caps, LinkArray* flows = nullptr);

ActionDistribution redundancy_transform(const ActionDistribution& dist, const ConditionedStats& cells);

struct PolicySynthesis {
    ActionDistribution dist;
    std::array<LinkArray, 2> capacities{};
    std::array<LinkArray, 2> flows{};
    std::array<LinkArray, 2> ratios{};  // f / c per receiver, 0 where c = 0
    RegionWitness witness;
    double scale = 1.0;  // largest t with t * target still feasible
};

// Maps (x, y) to actions with p3 + p5 = max(0, x + y - 1), p4 = 1 - x - y + p3 + p5.
ActionDistribution actions_from_witness(const RegionWitness& witness);
PolicySynthesis synthesize_policy(const RegionWitness& witness, RatePoint target, const ConditionedStats& cells);
// Solves the witness LP for the target itself (maximal scaling), then synthesizes.
PolicySynthesis synthesize_policy(const ConditionedStats& cells, RatePoint target, bool reactive = false);

}  // namespace bpec
