#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mbv/explore.hpp"
#include "mbv/network.hpp"

namespace mbv {

// An engine was handed a network outside the class it decides.
struct engine_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FixpointOptions {
    bool reverse_order = false;  // visit middleboxes last to first (order-independence checks)
    bool stop_at_violation = true;
    std::function<void(const struct FixpointResult&)> on_round;  // called after every round
};

// How a table entry was first derived: by processing PacketData entry `idx`
// of middlebox `mbox` while the state bits `reads` held, or by a send of
// `host` when mbox < 0.
struct Derivation {
    int mbox = -1, idx = -1;
    int host = -1;
    std::vector<uint32_t> reads;
};

struct FixpointResult {
    bool safe = true;
    int mbox = -1, pkt = -1, port = -1;  // the aborting input on violation
    Derivation abort_reason;

    // PacketData(m) is indexed by pkt * |ports(m)| + port position.
    std::vector<Bits> state, packets;
    std::vector<std::vector<Derivation>> state_why, packet_why;

    int rounds = 0;
    size_t additions = 0;
    size_t bound = 0;  // |P||Pr| + sum |R_i|
};

FixpointResult verify_increasing(const Network& net, const FixpointOptions& opt = {});

// Replayable unordered-semantics run ending in the abort.
Witness extract_witness(const Network& net, const FixpointResult& r);

// Sorted text dump of StateData and PacketData.
std::string tables_text(const Network& net, const FixpointResult& r);

}  // namespace mbv
