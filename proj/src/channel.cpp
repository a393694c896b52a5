#include "bpec/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bpec {

namespace {

constexpr double kRowTol = 1e-12;

using BoolMatrix = std::vector<std::vector<char>>;

BoolMatrix support_of(const Matrix& m) {
    BoolMatrix out(m.rows(), std::vector<char>(m.cols(), 0));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j) > 0.0;
    return out;
}

BoolMatrix bool_mult(const BoolMatrix& a, const BoolMatrix& b) {
    const size_t n = a.size();
    BoolMatrix out(n, std::vector<char>(n, 0));
    for (size_t i = 0; i < n; ++i)
        for (size_t k = 0; k < n; ++k)
            if (a[i][k])
                for (size_t j = 0; j < n; ++j) out[i][j] |= b[k][j];
    return out;
}

bool all_positive(const BoolMatrix& m) {
    for (const auto& row : m)
        for (char c : row)
            if (!c) return false;
    return true;
}

BoolMatrix bool_power(BoolMatrix base, long long e) {
    const size_t n = base.size();
    BoolMatrix result(n, std::vector<char>(n, 0));
    for (size_t i = 0; i < n; ++i) result[i][i] = 1;
    while (e > 0) {
        if (e & 1) result = bool_mult(result, base);
        base = bool_mult(base, base);
        e >>= 1;
    }
    return result;
}

void check_stochastic(const Matrix& m, const char* what) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (!(m(i, j) >= 0.0)) throw std::invalid_argument(std::string(what) + " has a negative entry");
            sum += m(i, j);
        }
        if (std::abs(sum - 1.0) > kRowTol)
            throw std::invalid_argument(std::string(what) + " row " + std::to_string(i) + " does not sum to 1");
    }
}

Matrix ge_transition(double b1, double g1, double b2, double g2) {
    // per-user 2x2 chain over (G, B)
    auto user = [](double b, double g) {
        Matrix t(2, 2);
        t << 1 - b, b, g, 1 - g;
        return t;
    };
    Matrix t1 = user(b1, g1), t2 = user(b2, g2);
    Matrix p(4, 4);
    for (int a1 = 0; a1 < 2; ++a1)
        for (int a2 = 0; a2 < 2; ++a2)
            for (int c1 = 0; c1 < 2; ++c1)
                for (int c2 = 0; c2 < 2; ++c2) p(2 * a1 + a2, 2 * c1 + c2) = t1(a1, c1) * t2(a2, c2);
    return p;
}

double derive_b(double eps, double g) {
    if (!(eps >= 0.0 && eps < 1.0)) throw std::invalid_argument("Gilbert-Elliot eps must lie in [0,1)");
    double b = g * eps / (1.0 - eps);
    if (b > 1.0) throw std::invalid_argument("Gilbert-Elliot parameters imply b > 1");
    return b;
}

Vector predictive_after(const ChannelModel& model, const Vector& belief, int outcome) {
    const Matrix& E = model.emission();
    Vector weighted = belief.cwiseProduct(E.col(outcome));
    double denom = weighted.sum();
    if (!(denom > 0.0)) throw std::domain_error("observation has zero probability under the current belief");
    return (model.transition().transpose() * weighted) / denom;
}

}  // namespace

ErasureStats ErasureStats::from_joint(const std::array<double, 4>& p) {
    ErasureStats s;
    s.eps_not1_not2 = p[0];
    s.eps_not1_2 = p[1];
    s.eps1_not2 = p[2];
    s.eps12 = p[3];
    s.eps1 = s.eps12 + s.eps1_not2;
    s.eps2 = s.eps12 + s.eps_not1_2;
    return s;
}

ErasureStats ErasureStats::from_joint(const Eigen::RowVectorXd& p) {
    return from_joint(std::array<double, 4>{p(0), p(1), p(2), p(3)});
}

ErasureStats ErasureStats::from_marginals(double eps1, double eps2, double eps12) {
    if (eps12 > std::min(eps1, eps2) + 1e-15 || eps1 + eps2 - eps12 > 1.0 + 1e-15)
        throw std::invalid_argument("inconsistent erasure marginals");
    return from_joint(std::array<double, 4>{1.0 - eps1 - eps2 + eps12, eps2 - eps12, eps1 - eps12, eps12});
}

bool ErasureStats::valid(double tol) const {
    for (double v : {eps12, eps1_not2, eps_not1_2, eps_not1_not2})
        if (v < -tol || v > 1.0 + tol) return false;
    if (std::abs(eps12 + eps1_not2 + eps_not1_2 + eps_not1_not2 - 1.0) > tol) return false;
    if (std::abs(eps1 - eps12 - eps1_not2) > tol || std::abs(eps2 - eps12 - eps_not1_2) > tol) return false;
    return eps12 <= std::min(eps1, eps2) + tol;
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

ChannelModel::ChannelModel(Matrix transition, Matrix emission, bool allow_periodic)
    : transition_(std::move(transition)), emission_(std::move(emission)) {
    const auto n = transition_.rows();
    if (n < 1 || transition_.cols() != n) throw std::invalid_argument("transition must be square and nonempty");
    if (emission_.rows() != n || emission_.cols() != 4)
        throw std::invalid_argument("emission must be |S| x 4");
    check_stochastic(transition_, "transition");
    check_stochastic(emission_, "emission");

    BoolMatrix adj = support_of(transition_);
    BoolMatrix lazy = adj;
    for (Eigen::Index i = 0; i < n; ++i) lazy[i][i] = 1;
    if (!all_positive(bool_power(lazy, n))) throw std::invalid_argument("transition matrix is not irreducible");
    // Wielandt bound: a primitive matrix has P^k > 0 for k = (n-1)^2 + 1.
    periodic_ = !all_positive(bool_power(adj, (n - 1) * (n - 1) + 1));
    if (periodic_ && !allow_periodic)
        throw std::invalid_argument("transition matrix is periodic (pass allow_periodic to admit it)");

    stationary_ = stationary_distribution(*this);
}

bool ChannelModel::memoryless() const {
    for (Eigen::Index i = 1; i < transition_.rows(); ++i)
        if ((transition_.row(i) - transition_.row(0)).cwiseAbs().maxCoeff() > 0.0) return false;
    return true;
}

bool ChannelModel::strictly_positive_emissions() const { return emission_.minCoeff() > 0.0; }

ChannelModel ChannelModel::gilbert_elliot_visible(double eps1, double g1, double eps2, double g2) {
    Matrix p = ge_transition(derive_b(eps1, g1), g1, derive_b(eps2, g2), g2);
    Matrix e = Matrix::Identity(4, 4);
    return ChannelModel(p, e);
}

ChannelModel ChannelModel::gilbert_elliot_hidden(const GeUser& u1, const GeUser& u2) {
    double b1 = u1.b >= 0 ? u1.b : derive_b(u1.eps, u1.g);
    double b2 = u2.b >= 0 ? u2.b : derive_b(u2.eps, u2.g);
    Matrix p = ge_transition(b1, u1.g, b2, u2.g);
    Matrix e(4, 4);
    for (int a1 = 0; a1 < 2; ++a1)
        for (int a2 = 0; a2 < 2; ++a2) {
            double q1 = a1 ? u1.eps_bad : u1.eps_good;
            double q2 = a2 ? u2.eps_bad : u2.eps_good;
            e.row(2 * a1 + a2) << (1 - q1) * (1 - q2), (1 - q1) * q2, q1 * (1 - q2), q1 * q2;
        }
    return ChannelModel(p, e);
}

ChannelModel ChannelModel::example_chain(double delta) {
    Matrix p(2, 2);
    p << delta, 1 - delta, 1 - delta, delta;
    Matrix e(2, 4);
    e << 1, 0, 0, 0, 0, 0.5, 0.5, 0;
    return ChannelModel(p, e, delta == 0.0);
}

ChannelModel ChannelModel::single_state(const std::array<double, 4>& row) {
    Matrix p = Matrix::Ones(1, 1);
    Matrix e(1, 4);
    e << row[0], row[1], row[2], row[3];
    return ChannelModel(p, e);
}

Vector stationary_distribution(const ChannelModel& model) {
    const Matrix& P = model.transition();
    const auto n = P.rows();
    Matrix a = P.transpose() - Matrix::Identity(n, n);
    a.row(n - 1).setOnes();
    Vector rhs = Vector::Zero(n);
    rhs(n - 1) = 1.0;
    Eigen::FullPivLU<Matrix> lu(a);
    Vector pi = lu.solve(rhs);
    // one step of iterative refinement keeps the residual near machine precision
    pi += lu.solve(rhs - a * pi);
    for (Eigen::Index i = 0; i < n; ++i) pi(i) = std::max(pi(i), 0.0);
    return pi / pi.sum();
}

ErasureStats cond_erasure_visible(const ChannelModel& model, int prev_state, int delay) {
    if (delay < 1) throw std::invalid_argument("delay must be at least 1");
    if (prev_state < 0 || prev_state >= model.num_states()) throw std::out_of_range("state index");
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(model.num_states());
    row(prev_state) = 1.0;
    for (int k = 0; k < delay; ++k) row = row * model.transition();
    return ErasureStats::from_joint(Eigen::RowVectorXd(row * model.emission()));
}

std::vector<ErasureStats> visible_stats_table(const ChannelModel& model, int delay) {
    std::vector<ErasureStats> out;
    for (int s = 0; s < model.num_states(); ++s) out.push_back(cond_erasure_visible(model, s, delay));
    return out;
}

Belief belief_update(const ChannelModel& model, const Belief& belief, Erasure observed) {
    return predictive_after(model, belief, outcome_index(observed));
}

ErasureStats cond_erasure_hidden(const ChannelModel& model, const Belief& belief) {
    return ErasureStats::from_joint(Eigen::RowVectorXd(belief.transpose() * model.emission()));
}

Belief window_belief(const ChannelModel& model, const std::vector<Erasure>& window) {
    Belief b = model.stationary();
    for (const auto& z : window) b = belief_update(model, b, z);
    return b;
}

ErasureStats cond_erasure_hidden(const ChannelModel& model, const std::vector<Erasure>& window) {
    return cond_erasure_hidden(model, window_belief(model, window));
}

std::vector<Erasure> decode_window(std::uint32_t key, int L) {
    std::vector<Erasure> w(L);
    for (int i = L - 1; i >= 0; --i) {
        w[i] = outcome_from_index(static_cast<int>(key & 3u));
        key >>= 2;
    }
    return w;
}

std::uint32_t encode_window(const std::vector<Erasure>& window) {
    std::uint32_t key = 0;
    for (const auto& z : window) key = (key << 2) | static_cast<std::uint32_t>(outcome_index(z));
    return key;
}

WindowTable window_table(const ChannelModel& model, int L) {
    if (L < 0 || L > kMaxWindow) throw std::invalid_argument("window length out of range");
    WindowTable table;
    table.L = L;
    const std::size_t count = std::size_t{1} << (2 * L);
    table.prob.assign(count, 0.0);
    table.stats.assign(count, ErasureStats{});
    const Matrix& P = model.transition();
    const Matrix& E = model.emission();

    // alpha(s) = P(z^k, S = s) for the state of the next unobserved slot
    struct Frame {
        Vector alpha;
        int depth;
        std::uint32_t key;
    };
    std::vector<Frame> stack{{model.stationary(), 0, 0}};
    while (!stack.empty()) {
        Frame f = std::move(stack.back());
        stack.pop_back();
        if (f.depth == L) {
            double mass = f.alpha.sum();
            table.prob[f.key] = mass;
            if (mass > 0.0)
                table.stats[f.key] =
                    ErasureStats::from_joint(Eigen::RowVectorXd((f.alpha / mass).transpose() * E));
            continue;
        }
        for (int k = 3; k >= 0; --k) {
            Vector next = P.transpose() * f.alpha.cwiseProduct(E.col(k));
            stack.push_back({std::move(next), f.depth + 1, (f.key << 2) | static_cast<std::uint32_t>(k)});
        }
    }
    return table;
}

std::vector<double> window_distribution(const ChannelModel& model, int L) { return window_table(model, L).prob; }

double forgetting_check(const ChannelModel& model, int L, int trace_len, std::uint64_t seed) {
    if (!model.strictly_positive_emissions())
        throw std::invalid_argument("forgetting check requires strictly positive emissions");
    if (L < 0 || trace_len < 0) throw std::invalid_argument("negative window or trace length");
    Rng rng(seed);
    std::vector<Erasure> trace;
    trace.reserve(trace_len);
    int state = sample_initial_state(model, rng);
    for (int t = 0; t < trace_len; ++t) {
        // the first slot's state is drawn from pi; later slots follow P
        Erasure z;
        if (t == 0) {
            double u = uniform01(rng);
            int k = 0;
            double acc = model.emission()(state, 0);
            while (k < 3 && u >= acc) acc += model.emission()(state, ++k);
            z = outcome_from_index(k);
        } else {
            auto step = sample_step(model, state, rng);
            state = step.first;
            z = step.second;
        }
        trace.push_back(z);
    }

    double worst = 0.0;
    Belief full = model.stationary();
    for (int t = 0; t < trace_len; ++t) {
        full = belief_update(model, full, trace[t]);
        const int start = std::max(0, t + 1 - L);
        Belief windowed = model.stationary();
        for (int k = start; k <= t; ++k) windowed = belief_update(model, windowed, trace[k]);
        worst = std::max(worst, 0.5 * (full - windowed).cwiseAbs().sum());
    }
    return worst;
}

std::pair<int, Erasure> sample_step(const ChannelModel& model, int current_state, Rng& rng) {
    const Matrix& P = model.transition();
    const Matrix& E = model.emission();
    const int n = model.num_states();
    double u = uniform01(rng);
    int next = 0;
    double acc = P(current_state, 0);
    while (next < n - 1 && u >= acc) acc += P(current_state, ++next);
    // skip zero-probability tail states that rounding could select
    while (P(current_state, next) == 0.0 && next > 0) --next;

    double v = uniform01(rng);
    int k = 0;
    acc = E(next, 0);
    while (k < 3 && v >= acc) acc += E(next, ++k);
    while (E(next, k) == 0.0 && k > 0) --k;
    return {next, outcome_from_index(k)};
}

int sample_initial_state(const ChannelModel& model, Rng& rng) {
    const Vector& pi = model.stationary();
    double u = uniform01(rng);
    int s = 0;
    double acc = pi(0);
    while (s < model.num_states() - 1 && u >= acc) acc += pi(++s);
    return s;
}

}  // namespace bpec
