#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mbv/interp.hpp"
#include "mbv/network.hpp"

namespace mbv {

enum class Semantics { fifo, unordered };

struct Event {
    enum class Kind { send, proc };
    Kind kind = Kind::send;
    int node = -1;  // host index for send, middlebox index for proc
    int port = 0;   // ingress port for proc
    int pkt = -1;
    int branch = 0;
    bool operator==(const Event&) const = default;
};

using Witness = std::vector<Event>;

// Channel buffers are indexed by channel id; channels into hosts stay empty
// because hosts consume deliveries immediately.
struct Config {
    std::vector<Bits> states;
    std::vector<std::vector<int>> chans;
    bool aborted = false;
};

Config initial_config(const Network& net);

// Forbidden deliveries: (host index, sorted packet indices). Used to check
// isolation on networks that were not compiled.
struct DeliveryMonitor {
    std::vector<std::pair<int, std::vector<int>>> forbidden;
    bool hit(int host, int pkt) const;
};

// Monitor for the isolation properties declared on an uncompiled network.
DeliveryMonitor isolation_monitor(const Network& net);

struct StepInfo {
    std::string error;
    std::vector<std::pair<int, int>> delivered;  // (host, packet)
    bool monitor_hit = false;
};

// Fires one event in place. Returns false (with a reason) if it is not enabled.
bool apply_event(const Network& net, Config& c, const Event& e, Semantics sem, StepInfo* info = nullptr,
                 const DeliveryMonitor* mon = nullptr);

struct ExploreOptions {
    bool dedup = true;
    int threads = 1;
    size_t max_configs = 4'000'000;
    const DeliveryMonitor* monitor = nullptr;
    bool all_violations = false;  // collect every violating witness of minimal length
    // Unordered only: skip a configuration when one with the same middlebox
    // states and at least its channel contents was reached at no higher cost.
    bool dominance = false;
};

struct ExploreStats {
    size_t configs = 0;
    int depth = 0;
    bool exhausted = false;  // the whole reachable space fit under the bound
};

struct ExploreResult {
    enum class Verdict { violation, no_violation, resource_limit };
    Verdict verdict = Verdict::no_violation;
    Witness witness;
    std::vector<Witness> all;
    ExploreStats stats;
};

ExploreResult explore(const Network& net, Semantics sem, int max_events, const ExploreOptions& opt = {});

struct WitnessCheck {
    bool ok = false;
    std::string diagnostic;
};

WitnessCheck check_witness(const Network& net, const Witness& w, Semantics sem, const DeliveryMonitor* mon = nullptr);
inline bool verify_witness(const Network& net, const Witness& w, Semantics sem) { return check_witness(net, w, sem).ok; }

struct RunTrace {
    Witness events;
    Config final;
};

RunTrace random_run(const Network& net, Semantics sem, int steps, uint64_t seed);

std::string witness_to_text(const Network& net, const Witness& w);
Witness witness_from_text(const Network& net, std::string_view text);
std::string event_text(const Network& net, const Event& e);

// Successor generation shared by the bounded engines. Host channels are never
// materialized: a send is emitted right before the processing step that
// consumes it, which preserves witness length under both semantics.
struct Successor {
    Event ev[2];
    int nev = 0;
    bool violation = false;
    std::vector<uint32_t> key;  // canonical encoding of the successor
};

class StateCodec {
public:
    StateCodec(const Network& net, Semantics sem);
    std::vector<uint32_t> encode(const Config& c) const;
    Config decode(const std::vector<uint32_t>& k) const;
    void successors(const Config& c, std::vector<Successor>& out, const DeliveryMonitor* mon) const;
    const std::vector<int>& internal_channels() const { return internal_; }
    size_t state_words() const { return state_words_; }

private:
    const Network& net_;
    Semantics sem_;
    std::vector<int> internal_;  // channels between middleboxes
    size_t state_words_ = 0;
};

struct KeyHash {
    size_t operator()(const std::vector<uint32_t>& k) const {
        uint64_t h = 0xcbf29ce484222325ull;
        for (auto x : k) h = (h ^ x) * 0x100000001b3ull;
        return static_cast<size_t>(h ^ (h >> 29));
    }
};

int thread_count(int requested);

}  // namespace mbv
