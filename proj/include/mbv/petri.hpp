#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mbv/explore.hpp"
#include "mbv/network.hpp"

namespace mbv {

// Sparse token counts, sorted by place, no zero entries.
using Marking = std::vector<std::pair<uint32_t, uint32_t>>;

uint32_t count(const Marking& m, uint32_t place);
bool covers(const Marking& big, const Marking& small);  // big >= small componentwise
Marking add(const Marking& a, const Marking& b);
Marking monus(const Marking& a, const Marking& b);  // truncated subtraction

enum class PlaceRole { channel, active, inactive, global, command, aux, abort };

struct Place {
    std::string name;
    PlaceRole role = PlaceRole::aux;
    int mbox = -1, channel = -1, pkt = -1, port = -1;
    int element = -1;  // state bit for active/inactive places
};

struct Transition {
    std::string name;
    std::string label;
    Marking in, out;
    int host = -1;  // >= 0 for host transitions
    int mbox = -1, pkt = -1, port = -1;
    bool first = false;     // starts processing a packet (takes the global token)
    bool terminal = false;  // gives the global token back
    bool abort = false;
};

// sum(weights . mu) == total in every reachable marking
struct Invariant {
    Marking weights;
    uint64_t total = 0;
};

struct PetriNet {
    std::vector<Place> places;
    std::vector<Transition> transitions;
    Marking init, target;
    int global = -1, abort = -1;
    std::vector<Invariant> invariants;

    int add_place(Place p);
};

bool enabled(const Transition& t, const Marking& m);
Marking fire(const Transition& t, const Marking& m);
// Fires the sequence from `from`; false if some transition is not enabled.
bool replay(const PetriNet& net, const Marking& from, const std::vector<int>& seq, Marking* out = nullptr);

struct EncodeOptions {
    bool fold_constant_relations = true;  // membership in never-mutated relations becomes a constant
};

// One complete processing step of a middlebox: the transitions from taking
// the global token to giving it back (or aborting), along one choice of
// guards and relation cases. A packet output twice along the path leaves
// one token in `out`, as a step's outputs form a set.
struct Episode {
    int mbox = -1, pkt = -1, port = -1;
    std::vector<int> path;
    Marking in, out;
    bool abort = false;
};

struct Encoding {
    PetriNet net;
    std::vector<Episode> episodes;
};

// The net for a compiled (abort-only) network.
Encoding encode(const Network& net, const EncodeOptions& opt = {});

// Same places, one transition per host send and per episode. Coverability of
// the target is the same as in the full net because a middlebox holds the
// global token for its whole episode. origin[i] is the episode index of
// transition i, or -1 for host transitions (which keep their index in
// `host_of`).
struct EpisodeNet {
    PetriNet net;
    std::vector<int> origin;
    std::vector<int> host_of;
};

EpisodeNet episode_net(const Encoding& enc);
std::vector<int> expand_firing(const Encoding& enc, const EpisodeNet& en, const std::vector<int>& seq);

struct CoverOptions {
    size_t max_basis = 3'000'000;
    bool use_invariants = true;
    // Extra pruning: markings for which this returns true cover no reachable marking.
    std::function<bool(const Marking&)> infeasible;
    bool keep_basis = false;  // fill CoverResult::minimal
};

struct CoverResult {
    enum class Verdict { coverable, uncoverable, resource_limit };
    Verdict verdict = Verdict::uncoverable;
    std::vector<int> firing;  // from init to a marking covering the target
    size_t basis = 0, iterations = 0;
    std::vector<Marking> minimal;  // live basis at the end, when asked for
};

// Backward search over minimal bases of upward-closed sets.
CoverResult coverable(const PetriNet& net, const Marking& init, const Marking& target, const CoverOptions& opt = {});

struct ForwardResult {
    enum class Verdict { coverable, unknown };
    Verdict verdict = Verdict::unknown;
    std::vector<int> firing;
    size_t markings = 0;
    bool complete = false;  // every reachable marking was visited within the bounds
};

// Breadth-first search over reachable markings with deduplication. The
// visitor sees each new marking once.
ForwardResult forward_explore(const PetriNet& net, const Marking& init, const Marking& target, int max_firings,
                              size_t max_markings = 1'000'000,
                              const std::function<void(const Marking&)>& visit = nullptr);

// Turns a firing sequence of the full net into network events. Each
// processing episode becomes one proc event whose branch is the outcome
// that matches the relation updates and channel tokens of the episode.
Witness firing_to_witness(const Network& net, const Encoding& enc, const std::vector<int>& firing);

struct PetriReport {
    CoverResult::Verdict verdict = CoverResult::Verdict::uncoverable;
    std::vector<int> firing;  // in the full net
    Witness witness;
    bool witness_ok = false;
    std::string diagnostic;
    size_t places = 0, transitions = 0, episodes = 0, basis = 0;
};

// Rejects markings whose relation-element tokens agree with no relation
// valuation a middlebox can reach on its own, feeding it every packet the net
// can route to it. Middleboxes with more than `cap` local states are skipped.
std::function<bool(const Marking&)> local_state_filter(const Network& net, const Encoding& enc, size_t cap = 20000);

PetriReport petri_verify(const Network& net, const EncodeOptions& eo = {}, const CoverOptions& co = {});

std::string export_lola(const PetriNet& net);
std::string export_lola_formula(const PetriNet& net);
std::string export_dot(const PetriNet& net);

}  // namespace mbv
