#pragma once

#include "bpec/channel.hpp"
#include "bpec/regions.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

namespace bpec {

enum class PacketKind : std::uint8_t { original, remedy_replacement, dummy_star };

// Receiver bitmask: bit 0 is Rx1, bit 1 is Rx2.
using RxMask = std::uint8_t;
constexpr RxMask kRx1 = 1, kRx2 = 2, kBoth = 3;
inline RxMask rx_bit(int j) { return static_cast<RxMask>(1u << (j - 1)); }

// A queue entry. `id` is the original packet delivered when the entry exits; `payload` is the
// original actually sent when the entry is served on its own (0 for a dummy).
struct Packet {
    std::uint32_t id = 0;
    int session = 1;
    PacketKind kind = PacketKind::original;
    std::uint32_t payload = 0;
    std::uint32_t poison_link = 0;
    RxMask knowers = 0;  // receivers known to hold `payload` (degenerate Q3 entries)
};

struct PoisonPair {
    std::array<Packet, 2> packets;  // session 1, session 2
    RxMask received_at = 0;
};

enum class QueueId : std::uint8_t { q1, q2, q3_nondeg, q3_deg, q4 };
std::string queue_name(QueueId q, int session);

struct Move {
    std::uint32_t packet = 0;
    int session = 1;
    QueueId from = QueueId::q1;
    QueueId to = QueueId::q4;
};

struct SlotLog {
    std::uint64_t t = 0;
    int action = 0;
    Erasure z;
    std::vector<Move> moves;
    std::vector<std::uint32_t> exits;
    std::string to_json() const;
};

using LinkFlags = std::array<std::array<std::uint8_t, kNumLinks>, 2>;  // [receiver-1][link]

struct SlotFlows {
    LinkFlags C{}, E{}, F{}, F_actual{};
    std::array<std::uint8_t, 2> arrivals{};
};

LinkFlags compute_capacities(int action, Erasure z);
// Sum of outgoing minus incoming flow for queue l in {1,2,3} of receiver j; arrivals feed Q1.
int flow_divergence(const SlotFlows& flows, int l, int j, bool actual = false);

// XOR of at most two originals; 0 marks an unused slot.
struct Combo {
    std::uint32_t a = 0, b = 0;
    bool empty() const { return a == 0 && b == 0; }
};
Combo make_combo(std::uint32_t x, std::uint32_t y = 0);

struct Reception {
    std::uint64_t slot = 0;
    Combo combo;
};

class ReceiverKnowledge {
public:
    void record(int rx, std::uint64_t slot, Combo c);
    const std::vector<Reception>& receptions(int rx) const { return ledger_[rx - 1]; }
    // Removes every reception of receiver rx in the given slot (used for mutation checks).
    void drop(int rx, std::uint64_t slot);
    std::vector<std::uint32_t> known(int rx) const;

private:
    std::array<std::vector<Reception>, 2> ledger_;
};

// Incremental GF(2) elimination over combinations with at most two nonzero coefficients.
class Gf2Basis {
public:
    void insert(Combo c);
    bool contains_unit(std::uint32_t id) const;

private:
    std::pair<std::uint32_t, std::uint32_t> reduce(std::uint32_t hi, std::uint32_t lo) const;
    std::unordered_map<std::uint32_t, std::uint32_t> rows_;  // pivot -> other coefficient (0 if none)
};

struct AuditResult {
    bool ok = true;
    int receiver = 0;
    std::uint32_t counterexample = 0;
};

class QueueNetwork {
public:
    QueueNetwork();
    explicit QueueNetwork(bool track_knowledge);

    std::uint32_t arrive(int j);
    SlotFlows apply_slot(int action, Erasure z, const LinkFlags& activations, SlotLog* log = nullptr);

    std::size_t q1_size(int j) const { return q1_[j - 1].size(); }
    std::size_t q2_size(int j) const { return q2_[j - 1].size(); }
    std::size_t q3_nondeg_size(int j) const { (void)j; return nondeg_.size(); }
    std::size_t q3_deg_size(int j) const { return deg_[j - 1].size(); }
    std::size_t q3_size(int j) const { return nondeg_.size() + deg_[j - 1].size(); }
    std::uint64_t exit_count(int j) const { return exit_count_[j - 1]; }
    std::uint64_t arrival_count(int j) const { return arrival_count_[j - 1]; }
    std::uint64_t backlog() const;
    std::uint64_t slot() const { return slot_; }

    const std::deque<Packet>& q1(int j) const { return q1_[j - 1]; }
    const std::deque<Packet>& q2(int j) const { return q2_[j - 1]; }
    const std::deque<PoisonPair>& q3_nondeg() const { return nondeg_; }
    const std::deque<Packet>& q3_deg(int j) const { return deg_[j - 1]; }
    const std::vector<std::uint32_t>& exits(int j) const { return exits_[j - 1]; }

    bool tracking() const { return track_; }
    const ReceiverKnowledge& knowledge() const { return knowledge_; }
    ReceiverKnowledge& knowledge() { return knowledge_; }

private:
    void transmit(Combo c, Erasure z);
    void exit_packet(const Packet& p, QueueId from, SlotLog* log);
    void to_q2(Packet p, QueueId from, SlotLog* log);
    void serve_uncoded(int j, const LinkFlags& F, SlotFlows& flows, Erasure z, SlotLog* log);
    void serve_reactive(const LinkFlags& F, SlotFlows& flows, Erasure z, SlotLog* log);
    void serve_poison(const LinkFlags& F, SlotFlows& flows, Erasure z, SlotLog* log);
    void serve_remedy_pair(const LinkFlags& F, SlotFlows& flows, Erasure z, SlotLog* log);
    void serve_remedy_deg(const LinkFlags& F, SlotFlows& flows, Erasure z, SlotLog* log);

    std::array<std::deque<Packet>, 2> q1_, q2_, deg_;
    std::deque<PoisonPair> nondeg_;
    std::array<std::vector<std::uint32_t>, 2> exits_;
    std::array<std::uint64_t, 2> exit_count_{0, 0};
    std::array<std::uint64_t, 2> arrival_count_{0, 0};
    std::uint32_t next_id_ = 1;
    std::uint64_t slot_ = 0;
    bool track_ = true;
    ReceiverKnowledge knowledge_;
};

AuditResult audit_decodability(const QueueNetwork& net, const ReceiverKnowledge& knowledge);
inline AuditResult audit_decodability(const QueueNetwork& net) { return audit_decodability(net, net.knowledge()); }

}  // namespace bpec
