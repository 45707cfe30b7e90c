#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mbv/ast.hpp"
#include "mbv/mbdl.hpp"

namespace mbv {

struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fixed-size bitset used for middlebox relation valuations.
struct Bits {
    std::vector<uint64_t> w;
    size_t n = 0;

    Bits() = default;
    explicit Bits(size_t bits) : w((bits + 63) / 64, 0), n(bits) {}
    bool get(size_t i) const { return (w[i >> 6] >> (i & 63)) & 1; }
    void set(size_t i, bool v = true) {
        if (v) w[i >> 6] |= uint64_t{1} << (i & 63);
        else w[i >> 6] &= ~(uint64_t{1} << (i & 63));
    }
    size_t count() const {
        size_t c = 0;
        for (auto x : w) c += static_cast<size_t>(__builtin_popcountll(x));
        return c;
    }
    bool subset_of(const Bits& o) const {
        for (size_t i = 0; i < w.size(); ++i)
            if (w[i] & ~o.w[i]) return false;
        return true;
    }
    void merge(const Bits& o) {
        for (size_t i = 0; i < w.size(); ++i) w[i] |= o.w[i];
    }
    bool operator==(const Bits&) const = default;
    bool operator<(const Bits& o) const { return w < o.w; }
    size_t hash() const {
        size_t h = n;
        for (auto x : w) h = h * 0x9E3779B97F4A7C15ull ^ (x + (h >> 17));
        return h;
    }
};

struct Universe {
    std::vector<std::string> names;
    std::unordered_map<std::string, int> ids;

    int intern(const std::string& s) {
        auto it = ids.find(s);
        if (it != ids.end()) return it->second;
        ids.emplace(s, static_cast<int>(names.size()));
        names.push_back(s);
        return static_cast<int>(names.size()) - 1;
    }
    int find(const std::string& s) const {
        auto it = ids.find(s);
        return it == ids.end() ? -1 : it->second;
    }
};

struct Packet {
    int src = -1, dst = -1, tag = -1;  // symbol ids
    bool operator==(const Packet&) const = default;
    bool operator<(const Packet& o) const { return std::tie(src, dst, tag) < std::tie(o.src, o.dst, o.tag); }
};

// H x H x T with dense packet indices.
struct PacketDomain {
    std::vector<int> addresses, tags;
    std::unordered_map<int, int> addr_idx, tag_idx;

    size_t size() const { return addresses.size() * addresses.size() * tags.size(); }
    int index(const Packet& p) const {
        auto a = addr_idx.find(p.src), b = addr_idx.find(p.dst);
        auto t = tag_idx.find(p.tag);
        if (a == addr_idx.end() || b == addr_idx.end() || t == tag_idx.end()) return -1;
        return static_cast<int>((a->second * addresses.size() + b->second) * tags.size() + t->second);
    }
    Packet packet(int i) const {
        size_t T = tags.size(), A = addresses.size();
        size_t t = i % T, rest = i / T;
        return {addresses[rest / A], addresses[rest % A], tags[t]};
    }
};

// Program resolved against a network's symbols.
struct CExpr {
    int var = -1;  // 0 src, 1 dst, 2 tag, 3 prt; -1 constant
    int sym = -1;
};

struct CAtom {
    bool eq = true;
    CExpr a, b;
    int rel = -1;
    std::vector<CExpr> tuple;
};

struct CGuard {
    Guard::Kind kind = Guard::Kind::atom;
    CAtom atom;
    std::vector<CGuard> kids;
};

struct COut {
    CExpr src, dst, tag, port;
};

struct CCmd {
    Command::Kind kind = Command::Kind::block;
    int id = 0;
    std::vector<COut> outs;
    int rel = -1;
    std::vector<CExpr> tuple;
    std::vector<CCmd> seq;
    std::vector<std::pair<CGuard, CCmd>> block;
};

struct RelInfo {
    std::string name;
    std::vector<std::vector<int>> columns;  // symbol ids per column
    std::vector<std::unordered_map<int, int>> col_idx;
    std::vector<size_t> stride;
    size_t offset = 0, size = 0;
    bool mutated = false;

    // -1 when some component lies outside the column domain
    long element(const std::vector<int>& syms) const {
        long e = 0;
        for (size_t i = 0; i < syms.size(); ++i) {
            auto it = col_idx[i].find(syms[i]);
            if (it == col_idx[i].end()) return -1;
            e += static_cast<long>(it->second * stride[i]);
        }
        return e;
    }
    std::vector<int> tuple(size_t e) const {
        std::vector<int> t(columns.size());
        for (size_t i = 0; i < columns.size(); ++i) t[i] = columns[i][(e / stride[i]) % columns[i].size()];
        return t;
    }
};

struct Instance {
    std::shared_ptr<const MiddleboxProgram> prog;
    int self = -1;
    std::vector<int> ports, port_sym;
    std::unordered_map<int, int> port_of_sym;  // symbol -> port number
    std::vector<RelInfo> rels;
    size_t bits = 0;
    Bits init;
    CCmd body;  // block
    int ncmds = 0;

    int port_pos(int port) const {
        for (size_t i = 0; i < ports.size(); ++i)
            if (ports[i] == port) return static_cast<int>(i);
        return -1;
    }
};

struct PacketPattern {
    std::string src = "*", dst = "*", tag = "*";
    bool operator==(const PacketPattern&) const = default;
};

struct Endpoint {
    bool host = false;
    int node = -1;
    int port = 0;
    bool operator==(const Endpoint&) const = default;
};

struct HostNode {
    std::string name;
    int sym = -1;
    std::vector<PacketPattern> patterns;
    std::vector<int> sends;  // packet indices
};

struct MboxNode {
    std::string name;
    std::string program;
    std::shared_ptr<const MiddleboxProgram> prog;
    bool checker = false;
    int sym = -1;  // address symbol, -1 when the instance has none
    Instance inst;
};

struct Link {
    std::string a, b;  // "host" or "mbox.port"
};

struct IsolationSpec {
    std::string host;
    std::vector<PacketPattern> forbidden;
};

struct Channel {
    Endpoint from, to;
};

using ProgramResolver = std::function<std::shared_ptr<const MiddleboxProgram>(const std::string&)>;

struct Network {
    // declared
    std::vector<std::string> tags;
    bool mbox_addresses = true;
    std::vector<HostNode> hosts;
    std::vector<MboxNode> mboxes;
    std::vector<Link> links;
    std::vector<IsolationSpec> isolation;

    // derived by finalize()
    Universe u;
    PacketDomain pd;
    std::vector<Channel> channels;
    std::vector<std::vector<int>> mbox_in, mbox_out;  // [m][port position] -> channel
    std::vector<int> host_in, host_out;

    std::string packet_text(int pkt) const;
    std::string sym(int s) const { return s >= 0 ? u.names[s] : "?"; }
    int host_index(const std::string& n) const;
    int mbox_index(const std::string& n) const;
    // total number of (middlebox, port) pairs
    size_t port_count() const;
};

// Resolves symbols, instantiates programs, expands patterns and builds channels.
void finalize(Network& net);

Network parse_topology(std::string_view text, const ProgramResolver& resolve);
std::string print_topology(const Network& net);
Network compile_isolation(const Network& net);
std::vector<Packet> packet_domain(const Network& net);

// Resolver that loads NAME.mbd from a directory, caching parsed programs.
ProgramResolver directory_resolver(const std::string& dir);
Network load_topology_file(const std::string& path);

MiddleboxProgram isolation_checker_program(const std::string& name, const std::vector<std::vector<std::string>>& forbidden);

// relation name -> sorted tuples of symbol names
std::map<std::string, std::vector<std::vector<std::string>>> describe_state(const Network& net, int m, const Bits& s);

}  // namespace mbv
