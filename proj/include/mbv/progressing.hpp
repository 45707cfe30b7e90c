#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include "mbv/explore.hpp"
#include "mbv/fixpoint.hpp"
#include "mbv/network.hpp"

namespace mbv {

struct WitnessBound {
    boost::multiprecision::cpp_int k;      // summed domain size of the state relations
    boost::multiprecision::cpp_int value;  // k^3 |P| |M|
};

// Only relations that some command inserts into or removes from count
// towards k; constant tables (checker lists, routing tables) never change.
// Throws engine_error above Progressing.
WitnessBound witness_bound(const Network& net);

struct ProgressingOptions {
    int max_depth = 40;  // in events; a send and the step consuming it count as two
    int threads = 0;
    size_t max_configs = 4'000'000;
    bool dominance = false;  // same states and channel inclusion; see ExploreOptions
};

struct ProgressingResult {
    enum class Verdict { violation, safe_up_to, proved_safe };
    Verdict verdict = Verdict::safe_up_to;
    Witness witness;
    int depth = 0;  // depth searched to
    WitnessBound bound;
    size_t configs = 0;
};

// Bounded search under unordered semantics. ProvedSafe when the search depth
// reaches the witness bound or every reachable configuration was covered.
// Throws engine_error above Progressing and on the configuration limit.
ProgressingResult find_witness(const Network& net, const ProgressingOptions& opt = {});

}  // namespace mbv
