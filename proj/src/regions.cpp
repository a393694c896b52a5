#include "bpec/regions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>

namespace bpec {

namespace {

double cross(RatePoint o, RatePoint a, RatePoint b) {
    return (a.r1 - o.r1) * (b.r2 - o.r2) - (a.r2 - o.r2) * (b.r1 - o.r1);
}

double dot(double u1, double u2, RatePoint p) { return u1 * p.r1 + u2 * p.r2; }

double segment_distance(RatePoint p, RatePoint a, RatePoint b) {
    const double dx = b.r1 - a.r1, dy = b.r2 - a.r2;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((p.r1 - a.r1) * dx + (p.r2 - a.r2) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.r1 - (a.r1 + t * dx), p.r2 - (a.r2 + t * dy));
}

struct SupportResult {
    RatePoint point;
    RegionWitness witness;
};
using SupportOracle = std::function<SupportResult(double, double)>;

void refine(const SupportOracle& oracle, const SupportResult& a, const SupportResult& b, int depth, double tol,
            std::vector<SupportResult>& out) {
    if (depth <= 0) return;
    // a has the larger r1; the outward normal of segment a-b points into the positive quadrant
    double n1 = b.point.r2 - a.point.r2;
    double n2 = a.point.r1 - b.point.r1;
    const double len = std::hypot(n1, n2);
    if (len <= 1e-14 || n1 < 0 || n2 < 0) return;
    n1 /= len;
    n2 /= len;
    SupportResult c = oracle(n1, n2);
    if (dot(n1, n2, c.point) <= dot(n1, n2, a.point) + tol) return;
    out.push_back(c);
    refine(oracle, a, c, depth - 1, tol, out);
    refine(oracle, c, b, depth - 1, tol, out);
}

RateRegion trace_region(RegionKind kind, const SupportOracle& oracle, const TraceOptions& opt) {
    const int K = std::max(opt.directions, 2);
    constexpr double eta = 1e-7;
    std::vector<SupportResult> found;
    for (int k = 0; k < K; ++k) {
        double lam = static_cast<double>(k) / (K - 1);
        double u1 = lam, u2 = 1.0 - lam;
        if (k == 0) u1 = eta;
        if (k == K - 1) u2 = eta;
        found.push_back(oracle(u1, u2));
    }
    auto order = [](const SupportResult& a, const SupportResult& b) {
        if (a.point.r1 != b.point.r1) return a.point.r1 > b.point.r1;
        return a.point.r2 < b.point.r2;
    };
    std::sort(found.begin(), found.end(), order);
    std::vector<SupportResult> unique;
    for (auto& f : found)
        if (unique.empty() || std::abs(unique.back().point.r1 - f.point.r1) > 1e-12 ||
            std::abs(unique.back().point.r2 - f.point.r2) > 1e-12)
            unique.push_back(f);
    std::vector<SupportResult> extra;
    for (size_t i = 0; i + 1 < unique.size(); ++i)
        refine(oracle, unique[i], unique[i + 1], opt.refine_depth, opt.refine_tol, extra);
    unique.insert(unique.end(), extra.begin(), extra.end());

    std::vector<RatePoint> pts;
    for (auto& u : unique) pts.push_back(u.point);
    RateRegion region;
    region.kind = kind;
    region.boundary = monotone_boundary(pts);
    for (const auto& v : region.boundary) {
        // a dominating support point's witness is also feasible for v
        const SupportResult* best = nullptr;
        double best_gap = std::numeric_limits<double>::infinity();
        for (const auto& u : unique) {
            if (u.point.r1 < v.r1 - 1e-9 || u.point.r2 < v.r2 - 1e-9) continue;
            double gap = (u.point.r1 - v.r1) + (u.point.r2 - v.r2);
            if (gap < best_gap) {
                best_gap = gap;
                best = &u;
            }
        }
        region.witnesses.push_back(best ? best->witness : RegionWitness{kind, {}, {}});
    }
    return region;
}

struct Halfplane {
    double a1, a2, b;
};

RateRegion halfplane_region(RegionKind kind, std::vector<Halfplane> hps) {
    hps.push_back({1, 0, 1});
    hps.push_back({0, 1, 1});
    std::vector<RatePoint> cand{{0, 0}};
    auto feasible_pt = [&](RatePoint p) {
        if (p.r1 < -1e-12 || p.r2 < -1e-12) return false;
        for (auto& h : hps)
            if (h.a1 * p.r1 + h.a2 * p.r2 > h.b + 1e-12) return false;
        return true;
    };
    for (auto& h : hps) {
        if (h.a1 > 0) cand.push_back({h.b / h.a1, 0});
        if (h.a2 > 0) cand.push_back({0, h.b / h.a2});
    }
    for (size_t i = 0; i < hps.size(); ++i)
        for (size_t k = i + 1; k < hps.size(); ++k) {
            double det = hps[i].a1 * hps[k].a2 - hps[i].a2 * hps[k].a1;
            if (std::abs(det) < 1e-15) continue;
            cand.push_back({(hps[i].b * hps[k].a2 - hps[i].a2 * hps[k].b) / det,
                            (hps[i].a1 * hps[k].b - hps[i].b * hps[k].a1) / det});
        }
    std::vector<RatePoint> pts;
    for (auto& p : cand)
        if (feasible_pt(p)) pts.push_back({std::max(p.r1, 0.0), std::max(p.r2, 0.0)});
    RateRegion region;
    region.kind = kind;
    region.boundary = monotone_boundary(pts);
    region.witnesses.assign(region.boundary.size(), RegionWitness{kind, {}, {}});
    return region;
}

std::vector<RatePoint> memoryless_fb_vertices(const ErasureStats& s) {
    return region_memoryless_fb(s.eps1, s.eps2, s.eps12).boundary;
}

void check_alignment(const ActionDistribution& dist, const ConditionedStats& cells) {
    if (dist.size() != cells.size()) throw std::invalid_argument("action distribution does not match the cells");
    for (size_t c = 0; c < cells.size(); ++c)
        if (dist.keys[c] != cells.keys[c]) throw std::invalid_argument("action distribution keys are misaligned");
}

RegionWitness witness_from(const CodingLp& clp, const ConditionedStats& cells, const std::vector<double>& x,
                           RegionKind kind) {
    RegionWitness w;
    w.kind = kind;
    w.keys = cells.keys;
    for (int c = 0; c < clp.num_cells; ++c)
        w.params.push_back({std::clamp(x[clp.x(c)], 0.0, 1.0), std::clamp(x[clp.y(c)], 0.0, 1.0)});
    return w;
}

SupportOracle coding_oracle(const ConditionedStats& cells, bool reactive, RegionKind kind) {
    auto clp = std::make_shared<CodingLp>(build_coding_lp(cells, reactive));
    auto cells_copy = std::make_shared<ConditionedStats>(cells);
    return [clp, cells_copy, kind](double u1, double u2) {
        lp::LinearProgram prog = clp->program;
        prog.objective[clp->r1] = u1;
        prog.objective[clp->r2] = u2;
        auto sol = lp::solve(prog);
        if (!sol.optimal()) throw std::logic_error("region LP is not optimal");
        return SupportResult{{sol.witness[clp->r1], sol.witness[clp->r2]},
                             witness_from(*clp, *cells_copy, sol.witness, kind)};
    };
}

std::function<bool(RatePoint, double)> coding_member(const ConditionedStats& cells, bool reactive) {
    auto cells_copy = std::make_shared<ConditionedStats>(cells);
    return [cells_copy, reactive](RatePoint p, double tol) {
        RatePoint q{std::max(p.r1 - tol, 0.0), std::max(p.r2 - tol, 0.0)};
        return coding_feasible(*cells_copy, reactive, q);
    };
}

}  // namespace

std::string to_string(RegionKind kind) {
    switch (kind) {
        case RegionKind::visible: return "visible";
        case RegionKind::reactive: return "reactive";
        case RegionKind::hidden_L: return "hidden_L";
        case RegionKind::memoryless_fb: return "memoryless_fb";
        case RegionKind::memoryless_nofb: return "memoryless_nofb";
        case RegionKind::minkowski: return "minkowski";
        case RegionKind::uncoded: return "uncoded";
    }
    return "unknown";
}

RegionKind region_kind_from_string(const std::string& name) {
    for (auto k : {RegionKind::visible, RegionKind::reactive, RegionKind::hidden_L, RegionKind::memoryless_fb,
                   RegionKind::memoryless_nofb, RegionKind::minkowski, RegionKind::uncoded})
        if (to_string(k) == name) return k;
    throw std::invalid_argument("unknown region kind: " + name);
}

ConditionedStats ConditionedStats::from_states(const std::vector<ErasureStats>& stats, const Vector& pi) {
    if (static_cast<Eigen::Index>(stats.size()) != pi.size())
        throw std::invalid_argument("stats and pi differ in length");
    ConditionedStats cells;
    cells.stats = stats;
    for (Eigen::Index s = 0; s < pi.size(); ++s) {
        cells.weight.push_back(pi(s));
        cells.keys.push_back(static_cast<std::uint32_t>(s));
    }
    return cells;
}

ConditionedStats visible_cells(const ChannelModel& model, int delay) {
    return ConditionedStats::from_states(visible_stats_table(model, delay), model.stationary());
}

ConditionedStats hidden_cells(const ChannelModel& model, int L) {
    WindowTable table = window_table(model, L);
    ConditionedStats cells;
    for (size_t k = 0; k < table.prob.size(); ++k) {
        if (table.prob[k] <= 0.0) continue;
        cells.stats.push_back(table.stats[k]);
        cells.weight.push_back(table.prob[k]);
        cells.keys.push_back(static_cast<std::uint32_t>(k));
    }
    return cells;
}

ErasureStats averaged_stats(const ConditionedStats& cells) {
    std::array<double, 4> p{0, 0, 0, 0};
    for (size_t c = 0; c < cells.size(); ++c) {
        const auto& s = cells.stats[c];
        p[0] += cells.weight[c] * s.eps_not1_not2;
        p[1] += cells.weight[c] * s.eps_not1_2;
        p[2] += cells.weight[c] * s.eps1_not2;
        p[3] += cells.weight[c] * s.eps12;
    }
    return ErasureStats::from_joint(p);
}

// ---- RateRegion ----

double RateRegion::max_r1() const {
    double m = 0;
    for (auto& p : boundary) m = std::max(m, p.r1);
    return m;
}

double RateRegion::max_r2() const {
    double m = 0;
    for (auto& p : boundary) m = std::max(m, p.r2);
    return m;
}

double RateRegion::support(double u1, double u2) const {
    double best = 0.0;
    for (auto& p : boundary) best = std::max(best, dot(u1, u2, p));
    return best;
}

bool RateRegion::contains_geometric(RatePoint p, double tol) const {
    p.r1 = std::max(p.r1, 0.0);
    p.r2 = std::max(p.r2, 0.0);
    if (boundary.empty()) return false;
    if (p.r1 > max_r1() + tol || p.r2 > max_r2() + tol) return false;
    for (size_t i = 0; i + 1 < boundary.size(); ++i) {
        const RatePoint a = boundary[i], b = boundary[i + 1];
        const double len = std::hypot(b.r1 - a.r1, b.r2 - a.r2);
        if (len <= 0) continue;
        if (cross(a, b, p) / len < -tol) return false;
    }
    return true;
}

bool RateRegion::contains(RatePoint p, double tol) const {
    if (member) return member(p, tol);
    return contains_geometric(p, tol);
}

double max_symmetric_rate(const RateRegion& region) {
    const auto& b = region.boundary;
    if (b.size() == 1) return std::min(b[0].r1, b[0].r2);
    for (size_t i = 0; i + 1 < b.size(); ++i) {
        double fa = b[i].r1 - b[i].r2, fb = b[i + 1].r1 - b[i + 1].r2;
        if (fa >= 0 && fb <= 0) {
            double t = fa == fb ? 0.0 : fa / (fa - fb);
            return b[i].r1 + t * (b[i + 1].r1 - b[i].r1);
        }
    }
    return 0.0;
}

double distance_to_region(const RateRegion& region, RatePoint p) {
    if (region.contains_geometric(p, 0.0)) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    const auto& b = region.boundary;
    if (b.size() == 1) return std::hypot(p.r1 - b[0].r1, p.r2 - b[0].r2);
    for (size_t i = 0; i + 1 < b.size(); ++i) best = std::min(best, segment_distance(p, b[i], b[i + 1]));
    // axis segments of the downward closure
    best = std::min(best, segment_distance(p, {0, 0}, b.front()));
    best = std::min(best, segment_distance(p, {0, 0}, b.back()));
    return best;
}

double hausdorff_distance(const RateRegion& a, const RateRegion& b) {
    double d = 0.0;
    for (auto& p : a.boundary) d = std::max(d, distance_to_region(b, p));
    for (auto& p : b.boundary) d = std::max(d, distance_to_region(a, p));
    return d;
}

bool region_subset(const RateRegion& inner, const RateRegion& outer, double tol) {
    for (auto& p : inner.boundary)
        if (!outer.contains(p, tol)) return false;
    return true;
}

std::vector<RatePoint> monotone_boundary(std::vector<RatePoint> points) {
    double m1 = 0, m2 = 0;
    for (auto& p : points) {
        // snap rounding noise so that axis points coincide exactly
        p.r1 = p.r1 < 1e-14 ? 0.0 : p.r1;
        p.r2 = p.r2 < 1e-14 ? 0.0 : p.r2;
        m1 = std::max(m1, p.r1);
        m2 = std::max(m2, p.r2);
    }
    if (m1 <= 0 && m2 <= 0) return {{0, 0}};
    points.push_back({0, 0});
    points.push_back({m1, 0});
    points.push_back({0, m2});
    std::sort(points.begin(), points.end(), [](RatePoint a, RatePoint b) {
        if (a.r1 != b.r1) return a.r1 < b.r1;
        return a.r2 < b.r2;
    });
    std::vector<RatePoint> hull;
    for (auto& p : points) {
        while (hull.size() >= 2) {
            const double c = cross(hull[hull.size() - 2], hull.back(), p);
            const double scale = std::max(1e-300, std::hypot(p.r1 - hull[hull.size() - 2].r1,
                                                             p.r2 - hull[hull.size() - 2].r2));
            if (c / scale >= -1e-13) hull.pop_back();
            else break;
        }
        hull.push_back(p);
    }
    // drop the origin that starts the upper hull
    if (hull.size() >= 2 && hull[0].r1 == 0 && hull[0].r2 == 0 && hull[1].r1 == 0) hull.erase(hull.begin());
    std::reverse(hull.begin(), hull.end());
    if (hull.front().r2 > 0) hull.insert(hull.begin(), RatePoint{hull.front().r1, 0});
    if (hull.back().r1 > 0) hull.push_back({0, hull.back().r2});
    return hull;
}

// ---- region LPs ----

CodingLp build_coding_lp(const ConditionedStats& cells, bool reactive) {
    CodingLp out;
    out.num_cells = static_cast<int>(cells.size());
    auto& prog = out.program;
    for (int c = 0; c < out.num_cells; ++c) {
        prog.add_var(0, 1);
        prog.add_var(0, 1);
    }
    out.r1 = prog.add_var(0, 1);
    out.r2 = prog.add_var(0, 1);
    std::vector<std::pair<int, double>> row0{{out.r1, 1}}, row1{{out.r1, 1}}, row2{{out.r2, 1}}, row3{{out.r2, 1}};
    double tot12 = 0;
    for (int c = 0; c < out.num_cells; ++c) {
        const auto& s = cells.stats[c];
        const double w = cells.weight[c];
        row0.push_back({out.x(c), -w * (1 - s.eps1)});
        row1.push_back({out.y(c), w * (1 - s.eps12)});
        row2.push_back({out.y(c), -w * (1 - s.eps2)});
        row3.push_back({out.x(c), w * (1 - s.eps12)});
        tot12 += w * (1 - s.eps12);
    }
    prog.add_row(row0, lp::Relation::Le, 0);
    prog.add_row(row1, lp::Relation::Le, tot12);
    prog.add_row(row2, lp::Relation::Le, 0);
    prog.add_row(row3, lp::Relation::Le, tot12);
    if (reactive)
        for (int c = 0; c < out.num_cells; ++c) prog.add_row({{out.x(c), 1}, {out.y(c), 1}}, lp::Relation::Ge, 1);
    return out;
}

bool coding_feasible(const ConditionedStats& cells, bool reactive, RatePoint p) {
    CodingLp clp = build_coding_lp(cells, reactive);
    clp.program.lower[clp.r1] = clp.program.upper[clp.r1] = p.r1;
    clp.program.lower[clp.r2] = clp.program.upper[clp.r2] = p.r2;
    return lp::feasible(clp.program);
}

namespace {
double symmetric_lp(const ConditionedStats& cells, bool reactive) {
    CodingLp clp = build_coding_lp(cells, reactive);
    clp.program.add_row({{clp.r1, 1}, {clp.r2, -1}}, lp::Relation::Eq, 0);
    clp.program.objective[clp.r1] = 1;
    auto sol = lp::solve(clp.program);
    if (!sol.optimal()) throw std::logic_error("symmetric-rate LP failed");
    return sol.value;
}
}  // namespace

double reactive_max_symmetric_rate(const ConditionedStats& cells) { return symmetric_lp(cells, true); }
double visible_max_symmetric_rate(const ConditionedStats& cells) { return symmetric_lp(cells, false); }

RateRegion region_visible(const ConditionedStats& cells, const TraceOptions& opt) {
    RateRegion r = trace_region(RegionKind::visible, coding_oracle(cells, false, RegionKind::visible), opt);
    r.member = coding_member(cells, false);
    return r;
}

RateRegion region_visible(const std::vector<ErasureStats>& stats, const Vector& pi, const TraceOptions& opt) {
    return region_visible(ConditionedStats::from_states(stats, pi), opt);
}

RateRegion region_reactive(const ConditionedStats& cells, const TraceOptions& opt) {
    RateRegion r = trace_region(RegionKind::reactive, coding_oracle(cells, true, RegionKind::reactive), opt);
    r.member = coding_member(cells, true);
    return r;
}

RateRegion region_reactive(const std::vector<ErasureStats>& stats, const Vector& pi, const TraceOptions& opt) {
    return region_reactive(ConditionedStats::from_states(stats, pi), opt);
}

RateRegion region_hidden_L(const ChannelModel& model, int L, const TraceOptions& opt) {
    if (L < 0 || L > kMaxRegionWindow) throw std::invalid_argument("hidden region window exceeds the LP size guard");
    ConditionedStats cells = hidden_cells(model, L);
    RateRegion r = trace_region(RegionKind::hidden_L, coding_oracle(cells, false, RegionKind::hidden_L), opt);
    r.member = coding_member(cells, false);
    return r;
}

RateRegion region_memoryless_fb(double eps1, double eps2, double eps12) {
    return halfplane_region(RegionKind::memoryless_fb,
                            {{1 - eps12, 1 - eps1, (1 - eps1) * (1 - eps12)},
                             {1 - eps2, 1 - eps12, (1 - eps2) * (1 - eps12)}});
}

RateRegion region_memoryless_nofb(double eps1, double eps2) {
    return halfplane_region(RegionKind::memoryless_nofb, {{1 - eps2, 1 - eps1, (1 - eps1) * (1 - eps2)}});
}

RateRegion region_minkowski(const ConditionedStats& cells, int directions) {
    std::vector<std::vector<RatePoint>> parts;
    for (size_t c = 0; c < cells.size(); ++c) {
        auto v = memoryless_fb_vertices(cells.stats[c]);
        for (auto& p : v) {
            p.r1 *= cells.weight[c];
            p.r2 *= cells.weight[c];
        }
        parts.push_back(std::move(v));
    }
    const int K = std::max(directions, 2);
    std::vector<RatePoint> pts;
    for (int k = 0; k < K; ++k) {
        const double th = (std::numbers::pi / 2) * k / (K - 1);
        const double u1 = std::cos(th), u2 = std::sin(th);
        RatePoint sum{0, 0};
        for (const auto& part : parts) {
            RatePoint best = part.front();
            for (const auto& p : part)
                if (dot(u1, u2, p) > dot(u1, u2, best)) best = p;
            sum.r1 += best.r1;
            sum.r2 += best.r2;
        }
        pts.push_back(sum);
    }
    RateRegion region;
    region.kind = RegionKind::minkowski;
    region.boundary = monotone_boundary(pts);
    region.witnesses.assign(region.boundary.size(), RegionWitness{RegionKind::minkowski, {}, {}});
    return region;
}

RateRegion region_uncoded(const ConditionedStats& cells, const TraceOptions& opt) {
    const int n = static_cast<int>(cells.size());
    auto prog = std::make_shared<lp::LinearProgram>();
    for (int c = 0; c < n; ++c) {
        prog->add_var(0, 1);
        prog->add_var(0, 1);
    }
    const int r1 = prog->add_var(0, 1), r2 = prog->add_var(0, 1);
    std::vector<std::pair<int, double>> row1{{r1, 1}}, row2{{r2, 1}};
    for (int c = 0; c < n; ++c) {
        row1.push_back({2 * c, -cells.weight[c] * (1 - cells.stats[c].eps1)});
        row2.push_back({2 * c + 1, -cells.weight[c] * (1 - cells.stats[c].eps2)});
    }
    prog->add_row(row1, lp::Relation::Le, 0);
    prog->add_row(row2, lp::Relation::Le, 0);
    for (int c = 0; c < n; ++c) prog->add_row({{2 * c, 1}, {2 * c + 1, 1}}, lp::Relation::Le, 1);
    auto keys = cells.keys;
    SupportOracle oracle = [prog, r1, r2, n, keys](double u1, double u2) {
        lp::LinearProgram p = *prog;
        p.objective[r1] = u1;
        p.objective[r2] = u2;
        auto sol = lp::solve(p);
        if (!sol.optimal()) throw std::logic_error("uncoded LP failed");
        RegionWitness w{RegionKind::uncoded, keys, {}};
        for (int c = 0; c < n; ++c) w.params.push_back({sol.witness[2 * c], sol.witness[2 * c + 1]});
        return SupportResult{{sol.witness[r1], sol.witness[r2]}, w};
    };
    RateRegion region = trace_region(RegionKind::uncoded, oracle, opt);
    region.member = [prog, r1, r2](RatePoint pt, double tol) {
        lp::LinearProgram p = *prog;
        p.lower[r1] = p.upper[r1] = std::max(pt.r1 - tol, 0.0);
        p.lower[r2] = p.upper[r2] = std::max(pt.r2 - tol, 0.0);
        return lp::feasible(p);
    };
    return region;
}

// ---- cuts ----

int ActionDistribution::index_of(std::uint32_t key) const {
    auto it = std::find(keys.begin(), keys.end(), key);
    return it == keys.end() ? -1 : static_cast<int>(it - keys.begin());
}

bool ActionDistribution::valid(double tol) const {
    if (keys.size() != rows.size()) return false;
    for (const auto& r : rows) {
        double sum = 0;
        for (double v : r) {
            if (v < -tol) return false;
            sum += v;
        }
        if (std::abs(sum - 1.0) > tol) return false;
    }
    return true;
}

double CutValues::min() const { return std::min({A, B, C, D}); }

LinkArray link_capacities(const ActionDistribution& dist, const ConditionedStats& cells, int j) {
    check_alignment(dist, cells);
    LinkArray c{};
    for (size_t k = 0; k < cells.size(); ++k) {
        const auto& s = cells.stats[k];
        const auto& p = dist.rows[k];
        const double w = cells.weight[k];
        const double ej = j == 1 ? s.eps1 : s.eps2;
        c[L12] += w * (ej - s.eps12) * p[j];
        c[L13] += w * (1 - s.eps12) * p[4];
        c[L14] += w * (1 - ej) * p[j];
        c[L24] += w * (1 - ej) * p[3];
        c[L32] += w * (ej - s.eps12) * p[5];
        c[L34] += w * (1 - ej) * p[5];
    }
    return c;
}

CutValues cut_values(const ActionDistribution& dist, const ConditionedStats& cells, int j) {
    LinkArray c = link_capacities(dist, cells, j);
    CutValues cut;
    cut.A = c[L12] + c[L13] + c[L14];
    cut.B = c[L13] + c[L14] + c[L24];
    cut.C = c[L12] + c[L14] + c[L32] + c[L34];
    cut.D = c[L14] + c[L24] + c[L34];
    return cut;
}

double max_flow(const LinkArray& caps, LinkArray* flows) {
    lp::LinearProgram prog;
    for (int l = 0; l < kNumLinks; ++l) prog.add_var(0, std::max(caps[l], 0.0));
    prog.objective[L12] = prog.objective[L13] = prog.objective[L14] = 1;
    prog.add_row({{L12, 1}, {L32, 1}, {L24, -1}}, lp::Relation::Le, 0);
    prog.add_row({{L13, 1}, {L32, -1}, {L34, -1}}, lp::Relation::Le, 0);
    auto sol = lp::solve(prog);
    if (!sol.optimal()) throw std::logic_error("flow LP failed");
    if (flows)
        for (int l = 0; l < kNumLinks; ++l) (*flows)[l] = sol.witness[l];
    return sol.value;
}

ActionDistribution redundancy_transform(const ActionDistribution& dist, const ConditionedStats& cells) {
    check_alignment(dist, cells);
    double c13 = 0, c5 = 0, K = 0;
    std::array<double, 2> M{0, 0};
    for (size_t k = 0; k < cells.size(); ++k) {
        const auto& s = cells.stats[k];
        const auto& p = dist.rows[k];
        const double w = cells.weight[k];
        const double s35 = p[3] + p[5];
        c13 += w * (1 - s.eps12) * p[4];
        c5 += w * (1 - s.eps12) * p[5];
        K += w * (1 - s.eps12) * s35;
        M[0] += w * (1 - s.eps1) * s35;
        M[1] += w * (1 - s.eps2) * s35;
    }
    if (std::abs(c13 - c5) <= 1e-15 || K <= 0.0) return dist;

    const CutValues cut1 = cut_values(dist, cells, 1), cut2 = cut_values(dist, cells, 2);
    double lambda;
    if (cut1.A <= cut1.D || cut2.A <= cut2.D) {
        lambda = c13 / K;
    } else {
        const double mmax = std::max(M[0], M[1]);
        lambda = mmax >= c13 && mmax > 0 ? c13 / mmax : 1.0;
    }
    lambda = std::clamp(lambda, 0.0, 1.0);

    ActionDistribution out = dist;
    for (auto& p : out.rows) {
        const double s35 = p[3] + p[5];
        p[5] = lambda * s35;
        p[3] = s35 - p[5];
    }
    return out;
}

ActionDistribution actions_from_witness(const RegionWitness& witness) {
    ActionDistribution dist;
    dist.keys = witness.keys;
    for (const auto& xy : witness.params) {
        const double x = std::clamp(xy[0], 0.0, 1.0), y = std::clamp(xy[1], 0.0, 1.0);
        const double s = std::max(0.0, x + y - 1.0);
        std::array<double, kNumActions> p{};
        p[1] = std::max(0.0, x - s);
        p[2] = std::max(0.0, y - s);
        p[3] = s;
        p[5] = 0.0;
        p[4] = std::max(0.0, 1.0 - p[1] - p[2] - p[3]);
        p[0] = 0.0;
        dist.rows.push_back(p);
    }
    return dist;
}

PolicySynthesis synthesize_policy(const RegionWitness& witness, RatePoint target, const ConditionedStats& cells) {
    PolicySynthesis out;
    out.witness = witness;
    out.dist = redundancy_transform(actions_from_witness(witness), cells);
    out.scale = std::numeric_limits<double>::infinity();
    for (int j = 1; j <= 2; ++j) {
        const double rate = j == 1 ? target.r1 : target.r2;
        LinkArray caps = link_capacities(out.dist, cells, j);
        LinkArray flows{};
        const double value = max_flow(caps, &flows);
        if (value < rate - 1e-9) {
            const CutValues cut = cut_values(out.dist, cells, j);
            if (std::min(cut.A, cut.D) < rate - 1e-9) throw std::domain_error("target lies outside the witness region");
            throw std::logic_error("flow LP infeasible after the redundancy transform");
        }
        out.capacities[j - 1] = caps;
        out.flows[j - 1] = flows;
        for (int l = 0; l < kNumLinks; ++l)
            out.ratios[j - 1][l] = caps[l] > 0 ? std::clamp(flows[l] / caps[l], 0.0, 1.0) : 0.0;
        if (rate > 0) out.scale = std::min(out.scale, value / rate);
    }
    if (!std::isfinite(out.scale)) out.scale = 1.0;
    return out;
}

PolicySynthesis synthesize_policy(const ConditionedStats& cells, RatePoint target, bool reactive) {
    if (target.r1 < 0 || target.r2 < 0) throw std::invalid_argument("negative target rate");
    RegionKind kind = reactive ? RegionKind::reactive : RegionKind::visible;
    if (target.r1 <= 0 && target.r2 <= 0) {
        RegionWitness w{kind, cells.keys, std::vector<std::array<double, 2>>(cells.size(), {0.0, 0.0})};
        PolicySynthesis out;
        out.witness = w;
        out.dist.keys = cells.keys;
        out.dist.rows.assign(cells.size(), std::array<double, kNumActions>{1, 0, 0, 0, 0, 0});
        return out;
    }
    CodingLp clp = build_coding_lp(cells, reactive);
    const int t = clp.program.add_var(0, 1e6, 1.0);
    clp.program.add_row({{clp.r1, 1}, {t, -target.r1}}, lp::Relation::Eq, 0);
    clp.program.add_row({{clp.r2, 1}, {t, -target.r2}}, lp::Relation::Eq, 0);
    auto sol = lp::solve(clp.program);
    if (!sol.optimal() || sol.value < 1.0 - 1e-9) throw std::domain_error("target lies outside the region");
    RegionWitness w = witness_from(clp, cells, sol.witness, kind);
    return synthesize_policy(w, target, cells);
}

}  // namespace bpec
