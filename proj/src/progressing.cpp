#include "mbv/progressing.hpp"

#include "mbv/mbdl.hpp"

namespace mbv {

namespace {

void require_progressing(const Network& net) {
    for (auto& m : net.mboxes) {
        auto c = classify(*m.prog);
        if (c > MiddleboxClass::Progressing)
            throw engine_error("witness search needs middleboxes up to progressing; " + m.name + " is " + class_name(c));
    }
}

}  // namespace

WitnessBound witness_bound(const Network& net) {
    require_progressing(net);
    WitnessBound b;
    for (auto& m : net.mboxes)
        for (auto& r : m.inst.rels)
            if (r.mutated) b.k += r.size;
    b.value = b.k * b.k * b.k * net.pd.size() * net.mboxes.size();
    return b;
}

ProgressingResult find_witness(const Network& net, const ProgressingOptions& opt) {
    ProgressingResult r;
    r.bound = witness_bound(net);
    // With no state to change, a shortest violation is one send followed by a
    // chain of steps that never repeats a (packet, middlebox port) pair.
    boost::multiprecision::cpp_int limit =
        r.bound.k == 0 ? boost::multiprecision::cpp_int(net.pd.size() * net.port_count() + 1) : r.bound.value;
    int depth = opt.max_depth;
    bool reaches_bound = false;
    if (limit <= depth) {
        depth = static_cast<int>(limit);
        reaches_bound = true;
    }
    ExploreOptions eo;
    eo.threads = opt.threads;
    eo.max_configs = opt.max_configs;
    eo.dominance = opt.dominance;
    auto er = explore(net, Semantics::unordered, depth, eo);
    r.configs = er.stats.configs;
    r.depth = depth;
    switch (er.verdict) {
        case ExploreResult::Verdict::violation:
            r.verdict = ProgressingResult::Verdict::violation;
            r.witness = std::move(er.witness);
            break;
        case ExploreResult::Verdict::resource_limit:
            throw engine_error("witness search exceeded " + std::to_string(opt.max_configs) + " configurations");
        case ExploreResult::Verdict::no_violation:
            r.verdict = (reaches_bound || er.stats.exhausted) ? ProgressingResult::Verdict::proved_safe
                                                               : ProgressingResult::Verdict::safe_up_to;
            break;
    }
    return r;
}

}  // namespace mbv
