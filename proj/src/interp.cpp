#include <algorithm>

#include "mbv/interp.hpp"

namespace mbv {

namespace {

inline int val(const CExpr& e, const Binding& b) { return e.var >= 0 ? b[e.var] : e.sym; }

long element(const Instance& inst, int rel, const std::vector<CExpr>& tup, const Binding& b) {
    std::vector<int> syms(tup.size());
    for (size_t i = 0; i < tup.size(); ++i) syms[i] = val(tup[i], b);
    long e = inst.rels[rel].element(syms);
    return e < 0 ? -1 : static_cast<long>(inst.rels[rel].offset) + e;
}

bool eval(const CGuard& g, const Binding& b, const Instance& inst, const Bits& st, std::vector<uint32_t>* reads) {
    switch (g.kind) {
        case Guard::Kind::conj: {
            bool l = eval(g.kids[0], b, inst, st, reads);
            return eval(g.kids[1], b, inst, st, reads) && l;
        }
        case Guard::Kind::disj: {
            bool l = eval(g.kids[0], b, inst, st, reads);
            return eval(g.kids[1], b, inst, st, reads) || l;
        }
        case Guard::Kind::atom:
        case Guard::Kind::not_atom: {
            bool v;
            if (g.atom.eq) {
                v = val(g.atom.a, b) == val(g.atom.b, b);
            } else {
                long e = element(inst, g.atom.rel, g.atom.tuple, b);
                v = e >= 0 && st.get(static_cast<size_t>(e));
                if (v && reads && g.kind == Guard::Kind::atom) reads->push_back(static_cast<uint32_t>(e));
            }
            return g.kind == Guard::Kind::atom ? v : !v;
        }
    }
    return false;
}

struct Exec {
    const Instance& inst;
    const PacketDomain& pd;
    Binding b;

    void run(const CCmd& c, Outcome p, std::vector<Outcome>& res) {
        if (p.abort) {
            res.push_back(std::move(p));
            return;
        }
        switch (c.kind) {
            case Command::Kind::abort:
                p.abort = true;
                res.push_back(std::move(p));
                return;
            case Command::Kind::output:
                for (auto& o : c.outs) {
                    Packet pk{val(o.src, b), val(o.dst, b), val(o.tag, b)};
                    int idx = pd.index(pk);
                    int ps = val(o.port, b);
                    auto it = inst.port_of_sym.find(ps);
                    if (idx < 0 || it == inst.port_of_sym.end())
                        throw input_error("program " + inst.prog->name + ": output outside the packet or port domain");
                    std::pair<int, int> out{idx, it->second};
                    if (std::find(p.outputs.begin(), p.outputs.end(), out) == p.outputs.end()) p.outputs.push_back(out);
                }
                res.push_back(std::move(p));
                return;
            case Command::Kind::insert:
            case Command::Kind::remove: {
                long e = element(inst, c.rel, c.tuple, b);
                if (e < 0)
                    throw input_error("program " + inst.prog->name + ": tuple outside the domain of '" +
                                      inst.rels[c.rel].name + "'");
                p.next.set(static_cast<size_t>(e), c.kind == Command::Kind::insert);
                res.push_back(std::move(p));
                return;
            }
            case Command::Kind::seq: {
                std::vector<Outcome> cur{std::move(p)};
                for (auto& k : c.seq) {
                    std::vector<Outcome> nxt;
                    for (auto& x : cur) run(k, std::move(x), nxt);
                    cur = std::move(nxt);
                }
                for (auto& x : cur) res.push_back(std::move(x));
                return;
            }
            case Command::Kind::block: {
                // guards read the state at block entry
                bool any = false;
                for (auto& [g, cmd] : c.block) {
                    std::vector<uint32_t> reads;
                    if (!eval(g, b, inst, p.next, &reads)) continue;
                    any = true;
                    Outcome q = p;
                    q.reads.insert(q.reads.end(), reads.begin(), reads.end());
                    run(cmd, std::move(q), res);
                }
                if (!any) res.push_back(std::move(p));
                return;
            }
        }
    }
};

}  // namespace

bool eval_guard(const CGuard& g, const Binding& b, const Instance& inst, const Bits& state) {
    return eval(g, b, inst, state, nullptr);
}

std::vector<Outcome> step(const Instance& inst, const PacketDomain& pd, const Bits& state, int pkt, int port) {
    int pos = inst.port_pos(port);
    if (pos < 0) throw input_error("program " + inst.prog->name + ": port " + std::to_string(port) + " not declared");
    Packet p = pd.packet(pkt);
    Exec ex{inst, pd, {p.src, p.dst, p.tag, inst.port_sym[pos]}};
    Outcome start;
    start.next = state;
    std::vector<Outcome> raw;
    ex.run(inst.body, std::move(start), raw);
    std::vector<Outcome> res;
    for (auto& o : raw) {
        if (o.abort) {
            o.outputs.clear();
            o.next = state;
        }
        std::sort(o.outputs.begin(), o.outputs.end());
        std::sort(o.reads.begin(), o.reads.end());
        o.reads.erase(std::unique(o.reads.begin(), o.reads.end()), o.reads.end());
        bool dup = std::any_of(res.begin(), res.end(), [&](const Outcome& r) {
            return r.abort == o.abort && r.outputs == o.outputs && r.next == o.next;
        });
        if (!dup) res.push_back(std::move(o));
    }
    return res;
}

}  // namespace mbv
