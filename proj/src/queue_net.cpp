#include "bpec/queue_net.hpp"

#include <json.hpp>

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace bpec {

std::string queue_name(QueueId q, int session) {
    const std::string s = std::to_string(session);
    switch (q) {
        case QueueId::q1: return "Q1_" + s;
        case QueueId::q2: return "Q2_" + s;
        case QueueId::q3_nondeg: return "Q3_" + s;
        case QueueId::q3_deg: return "Q3deg_" + s;
        case QueueId::q4: return "Q4_" + s;
    }
    return "?";
}

std::string SlotLog::to_json() const {
    nlohmann::json moves_json = nlohmann::json::array();
    for (const auto& m : moves)
        moves_json.push_back({{"packet", m.packet}, {"from", queue_name(m.from, m.session)},
                              {"to", queue_name(m.to, m.session)}});
    nlohmann::json j = {{"t", t}, {"action", action}, {"z", {z.z1, z.z2}}, {"moves", moves_json}, {"exits", exits}};
    return j.dump();
}

LinkFlags compute_capacities(int action, Erasure z) {
    if (action < 0 || action >= kNumActions) throw std::invalid_argument("action must be in 0..5");
    LinkFlags c{};
    const int zs[2] = {z.z1, z.z2};
    for (int j = 0; j < 2; ++j) {
        const int zj = zs[j], zo = zs[1 - j];
        auto& row = c[j];
        if (action == j + 1) {
            row[L12] = static_cast<std::uint8_t>(zj * (1 - zo));
            row[L14] = static_cast<std::uint8_t>(1 - zj);
        }
        if (action == 4) row[L13] = static_cast<std::uint8_t>(1 - zj * zo);
        if (action == 3) row[L24] = static_cast<std::uint8_t>(1 - zj);
        if (action == 5) {
            row[L32] = static_cast<std::uint8_t>(zj * (1 - zo));
            row[L34] = static_cast<std::uint8_t>(1 - zj);
        }
    }
    return c;
}

int flow_divergence(const SlotFlows& flows, int l, int j, bool actual) {
    const auto& f = (actual ? flows.F_actual : flows.F)[j - 1];
    switch (l) {
        case 1: return f[L12] + f[L13] + f[L14] - flows.arrivals[j - 1];
        case 2: return f[L24] - f[L12] - f[L32];
        case 3: return f[L32] + f[L34] - f[L13];
        default: throw std::invalid_argument("queue index must be 1, 2 or 3");
    }
}

Combo make_combo(std::uint32_t x, std::uint32_t y) {
    if (x == y) return {};
    if (x < y) std::swap(x, y);
    return {x, y};  // a > b, b may be 0
}

// ---- receiver knowledge ----

void ReceiverKnowledge::record(int rx, std::uint64_t slot, Combo c) {
    if (c.empty()) return;
    ledger_[rx - 1].push_back({slot, c});
}

void ReceiverKnowledge::drop(int rx, std::uint64_t slot) {
    auto& v = ledger_[rx - 1];
    v.erase(std::remove_if(v.begin(), v.end(), [&](const Reception& r) { return r.slot == slot; }), v.end());
}

std::vector<std::uint32_t> ReceiverKnowledge::known(int rx) const {
    Gf2Basis basis;
    std::vector<std::uint32_t> ids;
    for (const auto& r : ledger_[rx - 1]) {
        basis.insert(r.combo);
        ids.push_back(r.combo.a);
        if (r.combo.b) ids.push_back(r.combo.b);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::vector<std::uint32_t> out;
    for (auto id : ids)
        if (basis.contains_unit(id)) out.push_back(id);
    return out;
}

std::pair<std::uint32_t, std::uint32_t> Gf2Basis::reduce(std::uint32_t hi, std::uint32_t lo) const {
    // Invariant: hi > lo or hi == 0. Each step strictly lowers the leading id.
    while (hi != 0) {
        auto it = rows_.find(hi);
        if (it == rows_.end()) break;
        const std::uint32_t other = it->second;
        Combo next = make_combo(lo, other);
        hi = next.a;
        lo = next.b;
    }
    return {hi, lo};
}

void Gf2Basis::insert(Combo c) {
    auto [hi, lo] = reduce(c.a, c.b);
    if (hi != 0) rows_.emplace(hi, lo);
}

bool Gf2Basis::contains_unit(std::uint32_t id) const { return reduce(id, 0).first == 0; }

AuditResult audit_decodability(const QueueNetwork& net, const ReceiverKnowledge& knowledge) {
    for (int rx = 1; rx <= 2; ++rx) {
        Gf2Basis basis;
        for (const auto& r : knowledge.receptions(rx)) basis.insert(r.combo);
        for (auto id : net.exits(rx))
            if (!basis.contains_unit(id)) return {false, rx, id};
    }
    return {};
}

// ---- queue network ----

QueueNetwork::QueueNetwork() = default;
QueueNetwork::QueueNetwork(bool track_knowledge) : track_(track_knowledge) {}

std::uint32_t QueueNetwork::arrive(int j) {
    Packet p;
    p.id = next_id_++;
    p.session = j;
    p.payload = p.id;
    q1_[j - 1].push_back(p);
    ++arrival_count_[j - 1];
    return p.id;
}

std::uint64_t QueueNetwork::backlog() const {
    std::uint64_t b = 2 * nondeg_.size();
    for (int j = 0; j < 2; ++j) b += q1_[j].size() + q2_[j].size() + deg_[j].size();
    return b;
}

void QueueNetwork::transmit(Combo c, Erasure z) {
    if (!track_ || c.empty()) return;
    if (!z.z1) knowledge_.record(1, slot_, c);
    if (!z.z2) knowledge_.record(2, slot_, c);
}

void QueueNetwork::exit_packet(const Packet& p, QueueId from, SlotLog* log) {
    ++exit_count_[p.session - 1];
    if (track_) exits_[p.session - 1].push_back(p.id);
    if (log) {
        log->moves.push_back({p.id, p.session, from, QueueId::q4});
        log->exits.push_back(p.id);
    }
}

void QueueNetwork::to_q2(Packet p, QueueId from, SlotLog* log) {
    if (log) log->moves.push_back({p.id, p.session, from, QueueId::q2});
    p.knowers = 0;
    q2_[p.session - 1].push_back(p);
}

SlotFlows QueueNetwork::apply_slot(int action, Erasure z, const LinkFlags& activations, SlotLog* log) {
    ++slot_;
    SlotFlows flows;
    flows.C = compute_capacities(action, z);
    flows.E = activations;
    for (int j = 0; j < 2; ++j)
        for (int l = 0; l < kNumLinks; ++l) {
            if (activations[j][l] && !flows.C[j][l])
                throw std::invalid_argument("activation on a link without capacity");
            flows.F[j][l] = static_cast<std::uint8_t>(activations[j][l] && flows.C[j][l]);
        }
    if (log) {
        log->t = slot_;
        log->action = action;
        log->z = z;
        log->moves.clear();
        log->exits.clear();
    }
    const auto& F = flows.F;
    switch (action) {
        case 1:
        case 2: serve_uncoded(action, F, flows, z, log); break;
        case 3: serve_reactive(F, flows, z, log); break;
        case 4: serve_poison(F, flows, z, log); break;
        case 5:
            if (!nondeg_.empty()) serve_remedy_pair(F, flows, z, log);
            else serve_remedy_deg(F, flows, z, log);
            break;
        default: break;
    }
    return flows;
}

void QueueNetwork::serve_uncoded(int j, const LinkFlags& F, SlotFlows& flows, Erasure z, SlotLog* log) {
    auto& q = q1_[j - 1];
    if (q.empty()) return;
    Packet p = q.front();
    transmit(make_combo(p.payload), z);
    const auto& f = F[j - 1];
    if (f[L14]) {
        q.pop_front();
        flows.F_actual[j - 1][L14] = 1;
        exit_packet(p, QueueId::q1, log);
    } else if (f[L12]) {
        q.pop_front();
        flows.F_actual[j - 1][L12] = 1;
        to_q2(p, QueueId::q1, log);
    }
}

void QueueNetwork::serve_reactive(const LinkFlags& F, SlotFlows& flows, Erasure z, SlotLog* log) {
    const std::uint32_t p1 = q2_[0].empty() ? 0 : q2_[0].front().payload;
    const std::uint32_t p2 = q2_[1].empty() ? 0 : q2_[1].front().payload;
    if (q2_[0].empty() && q2_[1].empty()) return;
    transmit(make_combo(p1, p2), z);
    for (int j = 0; j < 2; ++j) {
        if (q2_[j].empty() || !F[j][L24]) continue;
        Packet p = q2_[j].front();
        q2_[j].pop_front();
        flows.F_actual[j][L24] = 1;
        exit_packet(p, QueueId::q2, log);
    }
}

void QueueNetwork::serve_poison(const LinkFlags& F, SlotFlows& flows, Erasure z, SlotLog* log) {
    // Side j joins the poison iff its link 13 is served; the composition is fixed before z is
    // revealed because E is, and when nothing is received the choice is invisible anyway.
    bool in[2];
    for (int j = 0; j < 2; ++j) in[j] = !q1_[j].empty() && F[j][L13];
    const RxMask got = static_cast<RxMask>((z.z1 ? 0 : kRx1) | (z.z2 ? 0 : kRx2));
    if (!in[0] && !in[1]) return;

    if (in[0] && in[1]) {
        Packet l = q1_[0].front(), m = q1_[1].front();
        q1_[0].pop_front();
        q1_[1].pop_front();
        transmit(make_combo(l.payload, m.payload), z);
        l.poison_link = m.id;
        m.poison_link = l.id;
        nondeg_.push_back({{l, m}, got});
        flows.F_actual[0][L13] = flows.F_actual[1][L13] = 1;
        if (log) {
            log->moves.push_back({l.id, 1, QueueId::q1, QueueId::q3_nondeg});
            log->moves.push_back({m.id, 2, QueueId::q1, QueueId::q3_nondeg});
        }
        return;
    }
    // Degenerate poison: a lone original, parked in Q3deg even if its own receiver got it.
    const int j = in[0] ? 0 : 1;
    Packet p = q1_[j].front();
    q1_[j].pop_front();
    transmit(make_combo(p.payload), z);
    p.knowers = got;
    deg_[j].push_back(p);
    flows.F_actual[j][L13] = 1;
    if (log) log->moves.push_back({p.id, p.session, QueueId::q1, QueueId::q3_deg});
}

namespace {

bool has(RxMask m, int rx) { return (m & rx_bit(rx)) != 0; }

}  // namespace

void QueueNetwork::serve_remedy_pair(const LinkFlags& F, SlotFlows& flows, Erasure z, SlotLog* log) {
    PoisonPair pair = nondeg_.front();
    nondeg_.pop_front();
    const RxMask P = pair.received_at;
    const RxMask got = static_cast<RxMask>((z.z1 ? 0 : kRx1) | (z.z2 ? 0 : kRx2));
    const int remedy_side = (P == kRx1) ? 1 : 0;
    const std::uint32_t ids[2] = {pair.packets[0].payload, pair.packets[1].payload};
    const std::uint32_t r = ids[remedy_side];
    transmit(make_combo(r), z);

    // Does receiver rx know the original of side s after this slot?
    auto knows = [&](int rx, int s) {
        if (!has(got, rx)) return false;
        return s == remedy_side || has(P, rx);
    };

    bool moved[2] = {false, false};
    for (int s = 0; s < 2; ++s) {
        const int rx = s + 1, other = 2 - s;
        Packet p = pair.packets[s];
        const auto& f = F[s];
        if (f[L34]) {
            flows.F_actual[s][L34] = 1;
            exit_packet(p, QueueId::q3_nondeg, log);
            moved[s] = true;
        } else if (f[L32]) {
            flows.F_actual[s][L32] = 1;
            if (knows(other, s)) {
                p.payload = p.id;
            } else if (knows(rx, s)) {
                p.payload = 0;
                p.kind = PacketKind::dummy_star;
            } else {
                p.payload = r;
                p.kind = PacketKind::remedy_replacement;
            }
            to_q2(p, QueueId::q3_nondeg, log);
            moved[s] = true;
        }
    }
    if (moved[0] == moved[1]) {
        if (!moved[0]) nondeg_.push_front(pair);
        return;
    }
    // The pair is broken: the survivor continues as a degenerate entry carrying whatever
    // single original lets its receiver decode, together with who already holds it.
    const int s = moved[0] ? 1 : 0;
    Packet p = pair.packets[s];
    RxMask own = static_cast<RxMask>((knows(1, s) ? kRx1 : 0) | (knows(2, s) ? kRx2 : 0));
    if (own) {
        p.payload = p.id;
        p.knowers = own;
    } else {
        const int o = 1 - s;
        p.payload = ids[o];
        p.kind = PacketKind::remedy_replacement;
        p.knowers = static_cast<RxMask>((knows(1, o) ? kRx1 : 0) | (knows(2, o) ? kRx2 : 0));
        if (!p.knowers) throw std::logic_error("broken poison pair without a usable remedy");
    }
    deg_[s].push_front(p);
    if (log) log->moves.push_back({p.id, p.session, QueueId::q3_nondeg, QueueId::q3_deg});
}

void QueueNetwork::serve_remedy_deg(const LinkFlags& F, SlotFlows& flows, Erasure z, SlotLog* log) {
    const bool ne[2] = {!deg_[0].empty(), !deg_[1].empty()};
    if (!ne[0] && !ne[1]) return;
    const RxMask got = static_cast<RxMask>((z.z1 ? 0 : kRx1) | (z.z2 ? 0 : kRx2));

    std::uint32_t pay[2] = {ne[0] ? deg_[0].front().payload : 0, ne[1] ? deg_[1].front().payload : 0};
    RxMask kn[2] = {ne[0] ? deg_[0].front().knowers : RxMask{0}, ne[1] ? deg_[1].front().knowers : RxMask{0}};

    // Which payloads the transmission carries.
    bool send[2] = {ne[0], ne[1]};
    if (ne[0] && ne[1]) {
        const RxMask P1 = kn[0], P2 = kn[1];
        const bool small2 = P2 == kRx1 || P2 == kRx2;
        if ((P1 == kRx1 || P1 == kBoth) && small2) send[0] = false;       // remedy b
        else if (P1 == kRx2 && P2 == kRx1) { /* a + b */ }
        else send[1] = false;                                               // remedy a
    }
    transmit(make_combo(send[0] ? pay[0] : 0, send[1] ? pay[1] : 0), z);

    RxMask after[2];
    for (int s = 0; s < 2; ++s) {
        after[s] = kn[s];
        if (!ne[s]) continue;
        for (int rx = 1; rx <= 2; ++rx) {
            if (!has(got, rx)) continue;
            const int o = 1 - s;
            const bool alone = send[s] && !send[o];
            const bool xor_known = send[s] && send[o] && has(kn[o], rx);
            if (alone || xor_known) after[s] = static_cast<RxMask>(after[s] | rx_bit(rx));
        }
    }

    for (int s = 0; s < 2; ++s) {
        if (!ne[s]) continue;
        const int rx = s + 1, other = 2 - s;
        const auto& f = F[s];
        Packet p = deg_[s].front();
        if (f[L34]) {
            if (!has(after[s], rx)) throw std::logic_error("degenerate remedy exit without decodability");
            deg_[s].pop_front();
            flows.F_actual[s][L34] = 1;
            exit_packet(p, QueueId::q3_deg, log);
        } else if (f[L32]) {
            deg_[s].pop_front();
            flows.F_actual[s][L32] = 1;
            if (!has(after[s], other)) {
                if (!has(after[s], rx)) throw std::logic_error("degenerate remedy without a usable payload");
                p.payload = 0;
                p.kind = PacketKind::dummy_star;
            }
            to_q2(p, QueueId::q3_deg, log);
        } else {
            deg_[s].front().knowers = after[s];
        }
    }
}

}  // namespace bpec
