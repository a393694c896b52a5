#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bpec/lp.hpp"
#include "bpec/regions.hpp"

#include <Eigen/Dense>

#include <random>

using namespace bpec;
using namespace bpec::lp;

namespace {

// Best vertex of {A x <= b, 0 <= x <= u} by enumerating every set of n tight rows.
double vertex_oracle(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& u,
                     const Eigen::VectorXd& c) {
    const int n = static_cast<int>(c.size()), m = static_cast<int>(A.rows());
    Eigen::MatrixXd G(m + 2 * n, n);
    Eigen::VectorXd h(m + 2 * n);
    G.topRows(m) = A;
    h.head(m) = b;
    G.middleRows(m, n) = Eigen::MatrixXd::Identity(n, n);
    h.segment(m, n) = u;
    G.bottomRows(n) = -Eigen::MatrixXd::Identity(n, n);
    h.tail(n).setZero();
    const int rows = m + 2 * n;
    double best = -kInf;
    std::vector<int> pick(n);
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == n) {
            Eigen::MatrixXd M(n, n);
            Eigen::VectorXd r(n);
            for (int k = 0; k < n; ++k) {
                M.row(k) = G.row(pick[k]);
                r(k) = h(pick[k]);
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
            if (lu.rank() < n) return;
            Eigen::VectorXd x = lu.solve(r);
            if (((G * x - h).array() > 1e-9).any()) return;
            best = std::max(best, c.dot(x));
            return;
        }
        for (int i = start; i < rows; ++i) {
            pick[depth] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

}  // namespace

TEST_CASE("small hand examples") {
    LinearProgram p;
    int x = p.add_var(0, kInf, 1.0), y = p.add_var(0, kInf, 1.0);
    p.add_row({{x, 1}, {y, 2}}, Relation::Le, 4);
    p.add_row({{x, 3}, {y, 1}}, Relation::Le, 6);
    Solution s = solve(p);
    REQUIRE(s.optimal());
    CHECK(s.value == doctest::Approx(2.8));
    CHECK(s.witness[x] == doctest::Approx(1.6));
    CHECK(s.witness[y] == doctest::Approx(1.2));
    CHECK(s.certificate_ok);
    CHECK(std::abs(s.duality_gap) < 1e-9);

    LinearProgram q;
    int z = q.add_var(0, 1, 1.0);
    q.add_row({{z, 1}}, Relation::Ge, 2);
    CHECK(solve(q).status == Status::Infeasible);
    CHECK_FALSE(feasible(q));

    LinearProgram unb;
    unb.add_var(0, kInf, 1.0);
    CHECK(solve(unb).status == Status::Unbounded);

    LinearProgram empty;
    empty.add_var(0, 3, -1.0);
    CHECK(feasible(empty));
    CHECK(solve(empty).value == doctest::Approx(0.0));

    LinearProgram eq;
    int a = eq.add_var(0, kInf, 1.0), b = eq.add_var(0, kInf, -1.0);
    eq.add_row({{a, 1}, {b, 1}}, Relation::Eq, 3);
    eq.add_row({{b, 1}}, Relation::Ge, 1);
    Solution se = solve(eq);
    REQUIRE(se.optimal());
    CHECK(se.value == doctest::Approx(1.0));
    CHECK(max_violation(eq, se.witness) < 1e-9);
}

TEST_CASE("reactive LP on the two-state example") {
    const ConditionedStats cells = visible_cells(ChannelModel::example_chain(0.0));
    CHECK(coding_feasible(cells, true, {7.0 / 16, 7.0 / 16}));
    CHECK_FALSE(coding_feasible(cells, true, {0.47, 0.47}));
    CHECK(reactive_max_symmetric_rate(cells) == doctest::Approx(7.0 / 16).epsilon(1e-9));
}

TEST_CASE("random LPs agree with vertex enumeration") {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> U(-1.0, 1.0), P(0.1, 2.0);
    for (int inst = 0; inst < 60; ++inst) {
        const int n = 2 + inst % 5, m = 1 + (inst / 5) % 6;
        Eigen::MatrixXd A(m, n);
        Eigen::VectorXd b(m), u(n), c(n);
        for (int i = 0; i < m; ++i) {
            for (int k = 0; k < n; ++k) A(i, k) = U(gen);
            b(i) = U(gen) + 0.3;
        }
        for (int k = 0; k < n; ++k) {
            u(k) = P(gen);
            c(k) = U(gen);
        }
        LinearProgram p;
        for (int k = 0; k < n; ++k) p.add_var(0, u(k), c(k));
        for (int i = 0; i < m; ++i) {
            std::vector<std::pair<int, double>> row;
            for (int k = 0; k < n; ++k) row.push_back({k, A(i, k)});
            p.add_row(row, Relation::Le, b(i));
        }
        const double oracle = vertex_oracle(A, b, u, c);
        Solution s = solve(p);
        if (oracle == -kInf) {
            CHECK(s.status == Status::Infeasible);
            continue;
        }
        REQUIRE(s.optimal());
        CHECK(s.value == doctest::Approx(oracle).epsilon(1e-8));
        CHECK(max_violation(p, s.witness) < 1e-9);
    }
}

TEST_CASE("larger LPs match the value of their dual") {
    std::mt19937_64 gen(23);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int inst = 0; inst < 20; ++inst) {
        const int n = 20, m = 15;
        std::vector<std::vector<double>> A(m, std::vector<double>(n));
        std::vector<double> b(m), c(n), u(n);
        for (auto& row : A)
            for (auto& v : row) v = U(gen) - 0.2;
        for (auto& v : b) v = 1.0 + U(gen);
        for (auto& v : c) v = U(gen) - 0.3;
        for (auto& v : u) v = 0.5 + U(gen);

        LinearProgram primal;
        for (int k = 0; k < n; ++k) primal.add_var(0, u[k], c[k]);
        for (int i = 0; i < m; ++i) {
            std::vector<std::pair<int, double>> row;
            for (int k = 0; k < n; ++k) row.push_back({k, A[i][k]});
            primal.add_row(row, Relation::Le, b[i]);
        }
        // Dual: minimize b.y + u.w subject to A^T y + w >= c, y, w >= 0 (written as a maximization).
        LinearProgram dual;
        for (int i = 0; i < m; ++i) dual.add_var(0, kInf, -b[i]);
        for (int k = 0; k < n; ++k) dual.add_var(0, kInf, -u[k]);
        for (int k = 0; k < n; ++k) {
            std::vector<std::pair<int, double>> row;
            for (int i = 0; i < m; ++i) row.push_back({i, A[i][k]});
            row.push_back({m + k, 1.0});
            dual.add_row(row, Relation::Ge, c[k]);
        }
        Solution sp = solve(primal), sd = solve(dual);
        REQUIRE(sp.optimal());
        REQUIRE(sd.optimal());
        CHECK(max_violation(primal, sp.witness) < 1e-9);
        CHECK(max_violation(dual, sd.witness) < 1e-9);
        CHECK(sp.value == doctest::Approx(-sd.value).epsilon(1e-8));
        // Weak duality against the dual witness itself.
        double bound = 0;
        for (int i = 0; i < m; ++i) bound += b[i] * sd.witness[i];
        for (int k = 0; k < n; ++k) bound += u[k] * sd.witness[m + k];
        CHECK(sp.value <= bound + 1e-9);
    }
}

TEST_CASE("solver is deterministic") {
    const ConditionedStats cells = visible_cells(ChannelModel::gilbert_elliot_visible(0.6, 0.3, 0.4, 0.7));
    CodingLp a = build_coding_lp(cells, false);
    Solution s1 = solve(a.program), s2 = solve(a.program);
    CHECK(s1.value == s2.value);
    CHECK(s1.witness == s2.witness);
    CHECK(s1.iterations == s2.iterations);
}
