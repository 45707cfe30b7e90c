#pragma once

#include <array>
#include <utility>
#include <vector>

#include "mbv/network.hpp"

namespace mbv {

struct Outcome {
    bool abort = false;
    std::vector<std::pair<int, int>> outputs;  // (packet index, egress port), sorted
    Bits next;
    std::vector<uint32_t> reads;  // state bits whose positive membership made the chosen guards true
};

using Binding = std::array<int, 4>;  // src, dst, tag, port symbols

bool eval_guard(const CGuard& g, const Binding& b, const Instance& inst, const Bits& state);

// All outcomes in canonical (source) order; duplicates merged.
std::vector<Outcome> step(const Instance& inst, const PacketDomain& pd, const Bits& state, int pkt, int port);

inline std::vector<Outcome> step(const Network& net, int m, const Bits& state, int pkt, int port) {
    return step(net.mboxes[m].inst, net.pd, state, pkt, port);
}

}  // namespace mbv
