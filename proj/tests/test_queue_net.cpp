#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bpec/queue_net.hpp"

#include <json.hpp>

#include <random>

using namespace bpec;

namespace {

// Activate every link that has capacity.
LinkFlags all_on(int action, Erasure z) { return compute_capacities(action, z); }

std::array<long, 3> sizes(const QueueNetwork& n, int j) {
    return {static_cast<long>(n.q1_size(j)), static_cast<long>(n.q2_size(j)), static_cast<long>(n.q3_size(j))};
}

}  // namespace

TEST_CASE("capacity indicators") {
    auto c = compute_capacities(3, {0, 0});
    CHECK(c[0][L24] == 1);
    CHECK(c[1][L24] == 1);
    c = compute_capacities(4, {1, 1});
    for (const auto& row : c)
        for (auto v : row) CHECK(v == 0);
    c = compute_capacities(5, {1, 0});
    CHECK(c[0][L32] == 1);
    CHECK(c[1][L34] == 1);
    CHECK(c[0][L34] == 0);
    c = compute_capacities(0, {0, 0});
    for (const auto& row : c)
        for (auto v : row) CHECK(v == 0);
    c = compute_capacities(1, {1, 0});
    CHECK(c[0][L12] == 1);
    CHECK(c[0][L14] == 0);
    CHECK(c[1][L12] == 0);
    // At most one outgoing link per queue carries capacity.
    for (int a = 0; a <= 5; ++a)
        for (int z = 0; z < 4; ++z) {
            auto cc = compute_capacities(a, {z >> 1, z & 1});
            for (const auto& r : cc) {
                CHECK(r[L12] + r[L13] + r[L14] <= 1);
                CHECK(r[L32] + r[L34] <= 1);
            }
        }
}

TEST_CASE("uncoded transmission overheard by the other receiver") {
    QueueNetwork net;
    const auto id = net.arrive(1);
    net.apply_slot(1, {1, 0}, all_on(1, {1, 0}));
    REQUIRE(net.q2_size(1) == 1);
    CHECK(net.q2(1).front().id == id);
    CHECK(net.q1_size(1) == 0);
    net.apply_slot(1, {0, 0}, all_on(1, {0, 0}));  // q1 empty: nothing moves
    CHECK(net.exit_count(1) == 0);
}

TEST_CASE("activation without capacity is rejected") {
    QueueNetwork net;
    net.arrive(1);
    LinkFlags e{};
    e[0][L14] = 1;
    CHECK_THROWS_AS(net.apply_slot(1, {1, 0}, e), std::invalid_argument);
}

TEST_CASE("poison then remedy seen by the other receiver") {
    QueueNetwork net;
    const auto l = net.arrive(1), m = net.arrive(2);
    net.apply_slot(4, {0, 1}, all_on(4, {0, 1}));
    REQUIRE(net.q3_nondeg_size(1) == 1);
    CHECK(net.q3_nondeg().front().received_at == kRx1);
    net.apply_slot(5, {1, 0}, all_on(5, {1, 0}));
    CHECK(net.exit_count(2) == 1);
    CHECK(net.exits(2).front() == m);
    REQUIRE(net.q2_size(1) == 1);
    const Packet& rep = net.q2(1).front();
    CHECK(rep.id == l);
    CHECK(rep.payload == m);
    CHECK(rep.kind == PacketKind::remedy_replacement);
    CHECK(net.q3_nondeg_size(1) == 0);
}

TEST_CASE("four-slot coding example") {
    QueueNetwork net;
    const auto l = net.arrive(1), m = net.arrive(2), k = net.arrive(2);
    const std::vector<std::pair<int, Erasure>> trace{{4, {0, 1}}, {5, {1, 0}}, {2, {0, 1}}, {3, {0, 0}}};
    for (auto [a, z] : trace) net.apply_slot(a, z, all_on(a, z));
    CHECK(net.exits(1) == std::vector<std::uint32_t>{l});
    CHECK(net.exits(2) == std::vector<std::uint32_t>{m, k});
    CHECK(net.backlog() == 0);
    CHECK(audit_decodability(net).ok);

    // Without the last reception at Rx2 the packet sent only in that combination is lost.
    ReceiverKnowledge mutated = net.knowledge();
    mutated.drop(2, 4);
    const AuditResult bad = audit_decodability(net, mutated);
    CHECK_FALSE(bad.ok);
    CHECK(bad.receiver == 2);
    CHECK(bad.counterexample == k);
    // Rx1 is unaffected.
    ReceiverKnowledge other = net.knowledge();
    other.drop(2, 3);
    CHECK(audit_decodability(net, other).ok);
}

TEST_CASE("no transmissions audit trivially") {
    QueueNetwork net;
    net.arrive(1);
    CHECK(audit_decodability(net).ok);
}

TEST_CASE("GF(2) basis") {
    Gf2Basis b;
    b.insert(make_combo(3, 5));
    CHECK_FALSE(b.contains_unit(3));
    b.insert(make_combo(5, 7));
    CHECK_FALSE(b.contains_unit(7));
    b.insert(make_combo(7));
    CHECK(b.contains_unit(3));
    CHECK(b.contains_unit(5));
    CHECK(make_combo(4, 4).empty());
}

TEST_CASE("flow divergence") {
    SlotFlows f;
    for (int l = 1; l <= 3; ++l) CHECK(flow_divergence(f, l, 1) == 0);
    f.F[0][L12] = 1;
    CHECK(flow_divergence(f, 1, 1) == 1);
    CHECK(flow_divergence(f, 2, 1) == -1);
    CHECK_THROWS(flow_divergence(f, 4, 1));
}

TEST_CASE("degenerate remedies follow the two-sided table") {
    const std::array<std::pair<RxMask, Erasure>, 3> recv{{{kRx1, {0, 1}}, {kRx2, {1, 0}}, {kBoth, {0, 0}}}};
    for (auto [p1, z1] : recv)
        for (auto [p2, z2] : recv)
            for (int zz = 0; zz < 4; ++zz) {
                QueueNetwork net;
                const auto a = net.arrive(1);
                net.apply_slot(4, z1, all_on(4, z1));
                const auto b = net.arrive(2);
                net.apply_slot(4, z2, all_on(4, z2));
                REQUIRE(net.q3_deg_size(1) == 1);
                REQUIRE(net.q3_deg_size(2) == 1);
                CHECK(net.q3_deg(1).front().knowers == p1);
                CHECK(net.q3_deg(2).front().knowers == p2);

                Combo expect;
                if ((p1 == kRx1 || p1 == kBoth) && (p2 == kRx1 || p2 == kRx2))
                    expect = make_combo(b);
                else if (p1 == kRx2 && p2 == kRx1)
                    expect = make_combo(a, b);
                else
                    expect = make_combo(a);

                const Erasure z{zz >> 1, zz & 1};
                const auto before = net.knowledge().receptions(1).size() + net.knowledge().receptions(2).size();
                net.apply_slot(5, z, all_on(5, z));
                for (int rx = 1; rx <= 2; ++rx) {
                    const auto& rec = net.knowledge().receptions(rx);
                    if ((rx == 1 ? z.z1 : z.z2) == 0) {
                        REQUIRE(!rec.empty());
                        CHECK(rec.back().slot == 3);
                        CHECK(rec.back().combo.a == expect.a);
                        CHECK(rec.back().combo.b == expect.b);
                    }
                }
                if (zz == 3)
                    CHECK(net.knowledge().receptions(1).size() + net.knowledge().receptions(2).size() == before);
                CHECK(audit_decodability(net).ok);
                CHECK(net.arrival_count(1) + net.arrival_count(2) == net.exit_count(1) + net.exit_count(2) + net.backlog());
            }
}

TEST_CASE("random traffic keeps the queue dynamics exact") {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> U(0, 1);
    for (int run = 0; run < 300; ++run) {
        QueueNetwork net;
        const double lam = 0.2 + 0.6 * U(gen), pz = U(gen), pe = 0.5 + 0.5 * U(gen);
        for (int t = 0; t < 400; ++t) {
            for (int j = 1; j <= 2; ++j)
                if (U(gen) < lam) net.arrive(j);
            const int action = static_cast<int>(U(gen) * 6);
            const Erasure z{U(gen) < pz, U(gen) < pz};
            LinkFlags e = compute_capacities(action, z);
            for (auto& row : e)
                for (auto& v : row) v = v && U(gen) < pe;
            const auto s1 = sizes(net, 1), s2 = sizes(net, 2);
            const auto x1 = net.exit_count(1), x2 = net.exit_count(2);
            SlotFlows f = net.apply_slot(action, z, e);
            f.arrivals = {0, 0};
            for (int j = 1; j <= 2; ++j) {
                const auto& before = j == 1 ? s1 : s2;
                const auto after = sizes(net, j);
                for (int l = 1; l <= 3; ++l) CHECK(after[l - 1] - before[l - 1] == -flow_divergence(f, l, j, true));
                for (int l = 0; l < kNumLinks; ++l) {
                    CHECK(f.F_actual[j - 1][l] <= f.F[j - 1][l]);
                    CHECK(f.F[j - 1][l] <= f.C[j - 1][l]);
                }
                const auto exited = net.exit_count(j) - (j == 1 ? x1 : x2);
                const auto& fa = f.F_actual[j - 1];
                CHECK(static_cast<int>(exited) == fa[L14] + fa[L24] + fa[L34]);
            }
            CHECK(net.q3_nondeg_size(1) == net.q3_nondeg_size(2));
            CHECK(net.arrival_count(1) + net.arrival_count(2) ==
                  net.exit_count(1) + net.exit_count(2) + net.backlog());
        }
        const AuditResult res = audit_decodability(net);
        CHECK(res.ok);
    }
}

TEST_CASE("movement log serializes to JSON") {
    QueueNetwork net;
    const auto id = net.arrive(1);
    SlotLog log;
    net.apply_slot(1, {0, 0}, all_on(1, {0, 0}), &log);
    auto j = nlohmann::json::parse(log.to_json());
    CHECK(j["t"] == 1);
    CHECK(j["action"] == 1);
    REQUIRE(j["moves"].size() == 1);
    CHECK(j["moves"][0]["packet"] == id);
    CHECK(j["exits"][0] == id);
}
