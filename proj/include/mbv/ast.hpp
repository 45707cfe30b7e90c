#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace mbv {

enum class Var { src, dst, tag, prt };

struct Expr {
    enum class Kind { variable, constant, self };
    Kind kind = Kind::constant;
    Var var = Var::src;
    std::string name;  // constant text: identifier or decimal port literal

    static Expr variable(Var v) { return {Kind::variable, v, {}}; }
    static Expr constant(std::string n) { return {Kind::constant, Var::src, std::move(n)}; }
    static Expr self() { return {Kind::self, Var::src, {}}; }

    bool operator==(const Expr&) const = default;
};

struct Atom {
    enum class Kind { eq, member };
    Kind kind = Kind::eq;
    Expr lhs, rhs;             // eq
    std::vector<Expr> tuple;   // member
    std::string rel;           // member

    bool operator==(const Atom&) const = default;
};

// Negation only wraps atoms, as in the grammar; and/or are binary.
struct Guard {
    enum class Kind { atom, not_atom, conj, disj };
    Kind kind = Kind::atom;
    Atom atom;
    std::vector<Guard> kids;

    static Guard of(Atom a) { return {Kind::atom, std::move(a), {}}; }
    static Guard negated(Atom a) { return {Kind::not_atom, std::move(a), {}}; }
    static Guard conj(Guard l, Guard r) { return {Kind::conj, {}, {std::move(l), std::move(r)}}; }
    static Guard disj(Guard l, Guard r) { return {Kind::disj, {}, {std::move(l), std::move(r)}}; }

    bool operator==(const Guard&) const = default;
};

struct OutTuple {
    Expr src, dst, tag, port;
    bool operator==(const OutTuple&) const = default;
};

struct GuardedCommand;

// seq holds >= 2 commands, none of which is itself a seq.
struct Command {
    enum class Kind { output, abort, insert, remove, seq, block };
    Kind kind = Kind::block;
    std::vector<OutTuple> outs;
    std::string rel;
    std::vector<Expr> tuple;
    std::vector<Command> seq;
    std::vector<GuardedCommand> block;

    bool operator==(const Command&) const;
};

struct GuardedCommand {
    Guard guard;
    Command cmd;
    bool operator==(const GuardedCommand&) const = default;
};

inline bool Command::operator==(const Command& o) const {
    return kind == o.kind && outs == o.outs && rel == o.rel && tuple == o.tuple && seq == o.seq &&
           block == o.block;
}

struct Domain {
    enum class Kind { address, tag, port, named };
    Kind kind = Kind::address;
    std::string name;  // named const set
    bool operator==(const Domain&) const = default;
};

struct RelationDecl {
    std::string name;
    std::vector<Domain> columns;
    std::vector<std::vector<Expr>> init;  // constants only
    bool operator==(const RelationDecl&) const = default;
};

struct MiddleboxProgram {
    std::string name;
    std::vector<int> ports;
    std::vector<std::pair<std::string, std::vector<std::string>>> consts;
    std::vector<RelationDecl> rels;
    std::vector<GuardedCommand> body;

    const RelationDecl* find_rel(const std::string& n) const {
        for (auto& r : rels)
            if (r.name == n) return &r;
        return nullptr;
    }
    const std::vector<std::string>* find_const(const std::string& n) const {
        for (auto& c : consts)
            if (c.first == n) return &c.second;
        return nullptr;
    }
    bool operator==(const MiddleboxProgram&) const = default;
};

enum class MiddleboxClass { Stateless = 0, Increasing = 1, Progressing = 2, Arbitrary = 3 };

const char* class_name(MiddleboxClass c);

// Explicit transducer over named packets. Entries absent from `delta` abort.
struct ExplicitMiddlebox {
    struct Packet {
        std::string src, dst, tag;
        bool operator<(const Packet& o) const {
            return std::tie(src, dst, tag) < std::tie(o.src, o.dst, o.tag);
        }
        bool operator==(const Packet&) const = default;
    };
    struct Move {
        std::vector<std::pair<Packet, int>> out;
        std::string next;
    };
    std::string name = "fsm";
    std::vector<std::string> states;
    std::string initial;
    std::vector<Packet> packets;
    std::vector<int> ports;
    std::map<std::tuple<std::string, Packet, int>, std::vector<Move>> delta;
};

}  // namespace mbv
