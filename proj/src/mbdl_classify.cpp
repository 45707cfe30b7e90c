#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>

#include "mbv/mbdl.hpp"

namespace mbv {

namespace {

struct Binding {
    const std::string *src, *dst, *tag;
    std::string prt;
    const std::string* self;
};

std::string value(const Expr& e, const Binding& b) {
    switch (e.kind) {
        case Expr::Kind::self: return *b.self;
        case Expr::Kind::constant: return e.name;
        case Expr::Kind::variable:
            switch (e.var) {
                case Var::src: return *b.src;
                case Var::dst: return *b.dst;
                case Var::tag: return *b.tag;
                case Var::prt: return b.prt;
            }
    }
    return {};
}

std::string fact(const Atom& a, const Binding& b) {
    std::string s = a.rel + "(";
    for (size_t i = 0; i < a.tuple.size(); ++i) s += (i ? "," : "") + value(a.tuple[i], b);
    return s + ")";
}

void collect_facts(const Guard& g, const Binding& b, std::vector<std::string>& out) {
    if (g.kind == Guard::Kind::conj || g.kind == Guard::Kind::disj) {
        for (auto& k : g.kids) collect_facts(k, b, out);
        return;
    }
    if (g.atom.kind == Atom::Kind::member) {
        auto f = fact(g.atom, b);
        if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
    }
}

bool eval(const Guard& g, const Binding& b, const std::map<std::string, bool>& truth) {
    switch (g.kind) {
        case Guard::Kind::conj: return eval(g.kids[0], b, truth) && eval(g.kids[1], b, truth);
        case Guard::Kind::disj: return eval(g.kids[0], b, truth) || eval(g.kids[1], b, truth);
        case Guard::Kind::atom:
        case Guard::Kind::not_atom: {
            bool v = g.atom.kind == Atom::Kind::eq ? value(g.atom.lhs, b) == value(g.atom.rhs, b)
                                                   : truth.at(fact(g.atom, b));
            return g.kind == Guard::Kind::atom ? v : !v;
        }
    }
    return false;
}

void walk(const Command& c, const std::function<void(const Command&)>& f) {
    f(c);
    for (auto& k : c.seq) walk(k, f);
    for (auto& gc : c.block) walk(gc.cmd, f);
}

bool guard_has_negated_member(const Guard& g) {
    if (g.kind == Guard::Kind::not_atom) return g.atom.kind == Atom::Kind::member;
    for (auto& k : g.kids)
        if (guard_has_negated_member(k)) return true;
    return false;
}

void expr_constants(const Expr& e, std::set<std::string>& out) {
    if (e.kind == Expr::Kind::constant && !std::isdigit(static_cast<unsigned char>(e.name[0]))) out.insert(e.name);
}

void guard_constants(const Guard& g, std::set<std::string>& out) {
    if (g.kind == Guard::Kind::conj || g.kind == Guard::Kind::disj) {
        for (auto& k : g.kids) guard_constants(k, out);
        return;
    }
    expr_constants(g.atom.lhs, out);
    expr_constants(g.atom.rhs, out);
    for (auto& e : g.atom.tuple) expr_constants(e, out);
}

}  // namespace

Domains default_domains(const MiddleboxProgram& p) {
    std::set<std::string> names;
    std::set<int> ports(p.ports.begin(), p.ports.end());
    Command top;
    top.kind = Command::Kind::block;
    top.block = p.body;
    walk(top, [&](const Command& c) {
        for (auto& gc : c.block) guard_constants(gc.guard, names);
        for (auto& e : c.tuple) expr_constants(e, names);
        for (auto& o : c.outs) {
            for (auto* e : {&o.src, &o.dst, &o.tag}) expr_constants(*e, names);
            if (o.port.kind == Expr::Kind::constant && std::isdigit(static_cast<unsigned char>(o.port.name[0])))
                ports.insert(std::stoi(o.port.name));
        }
    });
    for (auto& r : p.rels)
        for (auto& t : r.init)
            for (auto& e : t) expr_constants(e, names);
    Domains d;
    d.addresses.assign(names.begin(), names.end());
    d.tags.assign(names.begin(), names.end());
    for (auto* f : {"_a1", "_a2", "_a3"}) d.addresses.push_back(f);
    for (auto* f : {"_t1", "_t2"}) d.tags.push_back(f);
    d.addresses.push_back("_self");
    d.self = "_self";
    d.ports.assign(ports.begin(), ports.end());
    if (d.ports.empty()) d.ports = {1};
    return d;
}

ExclusivityResult check_mutually_exclusive(const std::vector<GuardedCommand>& block, const Domains& d) {
    ExclusivityResult res;
    if (block.size() < 2) return res;
    for (auto& s : d.addresses)
        for (auto& t : d.addresses)
            for (auto& g : d.tags)
                for (int pr : d.ports) {
                    Binding b{&s, &t, &g, std::to_string(pr), &d.self};
                    for (size_t i = 0; i < block.size(); ++i)
                        for (size_t j = i + 1; j < block.size(); ++j) {
                            std::vector<std::string> facts;
                            collect_facts(block[i].guard, b, facts);
                            collect_facts(block[j].guard, b, facts);
                            size_t n = facts.size();
                            for (uint64_t mask = 0; mask < (uint64_t{1} << n); ++mask) {
                                std::map<std::string, bool> truth;
                                for (size_t k = 0; k < n; ++k) truth[facts[k]] = (mask >> k) & 1;
                                if (eval(block[i].guard, b, truth) && eval(block[j].guard, b, truth)) {
                                    ExclusivityWitness w{s, t, g, pr, {}, static_cast<int>(i), static_cast<int>(j)};
                                    for (auto& f : facts) w.assignment.emplace_back(f, truth[f]);
                                    res.exclusive = false;
                                    res.witness = std::move(w);
                                    return res;
                                }
                            }
                        }
                }
    return res;
}

SyntaxFacts syntax_facts(const MiddleboxProgram& p, const Domains& d) {
    SyntaxFacts f;
    Command top;
    top.kind = Command::Kind::block;
    top.block = p.body;
    walk(top, [&](const Command& c) {
        if (c.kind == Command::Kind::insert) f.insert = true;
        if (c.kind == Command::Kind::remove) f.remove = true;
        if (c.kind != Command::Kind::block) return;
        for (auto& gc : c.block)
            if (guard_has_negated_member(gc.guard)) f.negated_member = true;
        if (f.exclusive) {
            auto r = check_mutually_exclusive(c.block, d);
            if (!r.exclusive) {
                f.exclusive = false;
                f.overlap = r.witness;
            }
        }
    });
    return f;
}

MiddleboxClass classify(const MiddleboxProgram& p, const Domains& d) {
    auto f = syntax_facts(p, d);
    if (!f.insert && !f.remove) return MiddleboxClass::Stateless;
    if (!f.remove && !f.negated_member && f.exclusive) return MiddleboxClass::Increasing;
    if (!f.remove) return MiddleboxClass::Progressing;
    return MiddleboxClass::Arbitrary;
}

std::vector<std::string> mutated_relations(const MiddleboxProgram& p) {
    std::set<std::string> out;
    Command top;
    top.kind = Command::Kind::block;
    top.block = p.body;
    walk(top, [&](const Command& c) {
        if (c.kind == Command::Kind::insert || c.kind == Command::Kind::remove) out.insert(c.rel);
    });
    return {out.begin(), out.end()};
}

MiddleboxProgram explicit_to_symbolic(const ExplicitMiddlebox& m) {
    MiddleboxProgram p;
    p.name = m.name;
    p.ports = m.ports;
    p.consts.emplace_back("states", m.states);
    RelationDecl r;
    r.name = "R";
    r.columns = {{Domain::Kind::named, "states"}};
    r.init = {{Expr::constant(m.initial)}};
    p.rels.push_back(r);

    auto eq = [](Var v, const std::string& c) {
        Atom a;
        a.kind = Atom::Kind::eq;
        a.lhs = Expr::variable(v);
        a.rhs = Expr::constant(c);
        return Guard::of(a);
    };
    for (auto& q : m.states)
        for (auto& pk : m.packets)
            for (int pr : m.ports) {
                Atom in;
                in.kind = Atom::Kind::member;
                in.rel = "R";
                in.tuple = {Expr::constant(q)};
                Guard g = Guard::of(in);
                g = Guard::conj(std::move(g), eq(Var::src, pk.src));
                g = Guard::conj(std::move(g), eq(Var::dst, pk.dst));
                g = Guard::conj(std::move(g), eq(Var::tag, pk.tag));
                g = Guard::conj(std::move(g), eq(Var::prt, std::to_string(pr)));
                auto it = m.delta.find({q, pk, pr});
                if (it == m.delta.end() || it->second.empty()) {
                    Command ab;
                    ab.kind = Command::Kind::abort;
                    p.body.push_back({g, ab});
                    continue;
                }
                for (auto& mv : it->second) {
                    Command rm, ins, out, s;
                    rm.kind = Command::Kind::remove;
                    rm.rel = "R";
                    rm.tuple = {Expr::constant(q)};
                    ins.kind = Command::Kind::insert;
                    ins.rel = "R";
                    ins.tuple = {Expr::constant(mv.next)};
                    out.kind = Command::Kind::output;
                    for (auto& [op, port] : mv.out) {
                        OutTuple o{Expr::constant(op.src), Expr::constant(op.dst), Expr::constant(op.tag),
                                   Expr::constant(std::to_string(port))};
                        if (std::find(out.outs.begin(), out.outs.end(), o) == out.outs.end()) out.outs.push_back(o);
                    }
                    s.kind = Command::Kind::seq;
                    s.seq = {rm, ins, out};
                    p.body.push_back({g, s});
                }
            }
    return p;
}

}  // namespace mbv
