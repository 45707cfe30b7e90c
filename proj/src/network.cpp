#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "lexer.hpp"
#include "mbv/network.hpp"

namespace mbv {

namespace {

struct Compiler {
    Network& net;
    Instance& inst;
    const MiddleboxProgram& prog;
    const std::string& where;
    int next_id = 0;
    bool uses_this = false;

    CExpr expr(const Expr& e) {
        CExpr c;
        switch (e.kind) {
            case Expr::Kind::variable: c.var = static_cast<int>(e.var); return c;
            case Expr::Kind::self: uses_this = true; c.sym = inst.self; return c;
            case Expr::Kind::constant: break;
        }
        if (std::isdigit(static_cast<unsigned char>(e.name[0]))) {
            c.sym = net.u.intern(e.name);
            return c;
        }
        c.sym = net.u.find(e.name);
        if (c.sym < 0) throw input_error(where + ": unknown constant '" + e.name + "'");
        return c;
    }

    CAtom atom(const Atom& a) {
        CAtom c;
        c.eq = a.kind == Atom::Kind::eq;
        if (c.eq) {
            c.a = expr(a.lhs);
            c.b = expr(a.rhs);
        } else {
            c.rel = rel_index(a.rel);
            for (auto& e : a.tuple) c.tuple.push_back(expr(e));
        }
        return c;
    }

    int rel_index(const std::string& n) {
        for (size_t i = 0; i < inst.rels.size(); ++i)
            if (inst.rels[i].name == n) return static_cast<int>(i);
        throw input_error(where + ": undeclared relation '" + n + "'");
    }

    CGuard guard(const Guard& g) {
        CGuard c;
        c.kind = g.kind;
        if (g.kind == Guard::Kind::atom || g.kind == Guard::Kind::not_atom) c.atom = atom(g.atom);
        for (auto& k : g.kids) c.kids.push_back(guard(k));
        return c;
    }

    CCmd cmd(const Command& k) {
        CCmd c;
        c.kind = k.kind;
        c.id = next_id++;
        for (auto& o : k.outs) c.outs.push_back({expr(o.src), expr(o.dst), expr(o.tag), expr(o.port)});
        if (k.kind == Command::Kind::insert || k.kind == Command::Kind::remove) {
            c.rel = rel_index(k.rel);
            for (auto& e : k.tuple) c.tuple.push_back(expr(e));
        }
        for (auto& s : k.seq) c.seq.push_back(cmd(s));
        for (auto& gc : k.block) {
            CGuard g = guard(gc.guard);
            c.block.emplace_back(std::move(g), cmd(gc.cmd));
        }
        return c;
    }
};

void compile_instance(Network& net, MboxNode& mb) {
    const MiddleboxProgram& p = *mb.prog;
    Instance inst;
    inst.prog = mb.prog;
    inst.self = mb.sym;
    std::string where = "middlebox '" + mb.name + "' (program " + p.name + ")";
    inst.ports = p.ports;
    for (int port : p.ports) {
        int s = net.u.intern(std::to_string(port));
        inst.port_sym.push_back(s);
        inst.port_of_sym[s] = port;
    }
    std::map<std::string, std::vector<int>> consts;
    for (auto& [n, vals] : p.consts)
        for (auto& v : vals) consts[n].push_back(net.u.intern(v));
    auto muts = mutated_relations(p);
    size_t off = 0;
    for (auto& r : p.rels) {
        RelInfo ri;
        ri.name = r.name;
        ri.mutated = std::find(muts.begin(), muts.end(), r.name) != muts.end();
        for (auto& d : r.columns) {
            switch (d.kind) {
                case Domain::Kind::address: ri.columns.push_back(net.pd.addresses); break;
                case Domain::Kind::tag: ri.columns.push_back(net.pd.tags); break;
                case Domain::Kind::port: ri.columns.push_back(inst.port_sym); break;
                case Domain::Kind::named: ri.columns.push_back(consts[d.name]); break;
            }
        }
        ri.stride.assign(ri.columns.size(), 1);
        size_t sz = 1;
        for (size_t i = ri.columns.size(); i-- > 0;) {
            ri.stride[i] = sz;
            sz *= ri.columns[i].size();
        }
        ri.size = sz;
        ri.offset = off;
        off += sz;
        ri.col_idx.resize(ri.columns.size());
        for (size_t i = 0; i < ri.columns.size(); ++i)
            for (size_t j = 0; j < ri.columns[i].size(); ++j) ri.col_idx[i][ri.columns[i][j]] = static_cast<int>(j);
        inst.rels.push_back(std::move(ri));
    }
    inst.bits = off;
    inst.init = Bits(off);
    for (size_t ri = 0; ri < p.rels.size(); ++ri) {
        for (auto& t : p.rels[ri].init) {
            std::vector<int> syms;
            for (auto& e : t) syms.push_back(net.u.find(e.name) >= 0 ? net.u.find(e.name) : net.u.intern(e.name));
            long e = inst.rels[ri].element(syms);
            if (e < 0) throw input_error(where + ": initial tuple of '" + p.rels[ri].name + "' outside its column domains");
            inst.init.set(inst.rels[ri].offset + e);
        }
    }
    Compiler c{net, inst, p, where};
    Command top;
    top.kind = Command::Kind::block;
    top.block = p.body;
    inst.body = c.cmd(top);
    inst.ncmds = c.next_id;
    if (c.uses_this && mb.sym < 0) throw input_error(where + " uses 'this' but has no address");
    mb.inst = std::move(inst);
}

std::vector<int> expand_field(const Network& net, const std::string& v, bool address, const std::string& ctx) {
    const auto& dom = address ? net.pd.addresses : net.pd.tags;
    if (v == "*") return dom;
    int s = net.u.find(v);
    if (s < 0 || std::find(dom.begin(), dom.end(), s) == dom.end())
        throw input_error(ctx + ": unknown " + (address ? "address '" : "tag '") + v + "' in pattern");
    return {s};
}

std::vector<int> expand(const Network& net, const std::vector<PacketPattern>& pats, const std::string& ctx) {
    std::set<int> out;
    for (auto& p : pats)
        for (int s : expand_field(net, p.src, true, ctx))
            for (int d : expand_field(net, p.dst, true, ctx))
                for (int t : expand_field(net, p.tag, false, ctx)) out.insert(net.pd.index({s, d, t}));
    return {out.begin(), out.end()};
}

std::string pattern_text(const PacketPattern& p) { return "(" + p.src + ", " + p.dst + ", " + p.tag + ")"; }

}  // namespace

int Network::host_index(const std::string& n) const {
    for (size_t i = 0; i < hosts.size(); ++i)
        if (hosts[i].name == n) return static_cast<int>(i);
    return -1;
}

int Network::mbox_index(const std::string& n) const {
    for (size_t i = 0; i < mboxes.size(); ++i)
        if (mboxes[i].name == n) return static_cast<int>(i);
    return -1;
}

size_t Network::port_count() const {
    size_t n = 0;
    for (auto& m : mboxes) n += m.inst.ports.size();
    return n;
}

std::string Network::packet_text(int pkt) const {
    Packet p = pd.packet(pkt);
    return "(" + sym(p.src) + "," + sym(p.dst) + "," + sym(p.tag) + ")";
}

void finalize(Network& net) {
    net.u = Universe{};
    net.pd = PacketDomain{};
    std::set<std::string> names;
    auto fresh = [&](const std::string& n, const char* what) {
        if (!names.insert(n).second) throw input_error("duplicate name '" + n + "' (" + what + ")");
    };
    for (auto& h : net.hosts) {
        fresh(h.name, "host");
        h.sym = net.u.intern(h.name);
        net.pd.addresses.push_back(h.sym);
    }
    for (auto& m : net.mboxes) {
        fresh(m.name, "middlebox");
        m.sym = -1;
        if (net.mbox_addresses && !m.checker) {
            m.sym = net.u.intern(m.name);
            net.pd.addresses.push_back(m.sym);
        }
    }
    if (net.tags.empty()) throw input_error("no tags declared");
    for (auto& t : net.tags) {
        if (net.u.find(t) >= 0 && std::find(net.pd.tags.begin(), net.pd.tags.end(), net.u.find(t)) != net.pd.tags.end())
            throw input_error("duplicate tag '" + t + "'");
        net.pd.tags.push_back(net.u.intern(t));
    }
    for (size_t i = 0; i < net.pd.addresses.size(); ++i) net.pd.addr_idx[net.pd.addresses[i]] = static_cast<int>(i);
    for (size_t i = 0; i < net.pd.tags.size(); ++i) net.pd.tag_idx[net.pd.tags[i]] = static_cast<int>(i);
    for (auto& h : net.hosts) h.sends = expand(net, h.patterns, "host '" + h.name + "'");
    for (auto& m : net.mboxes) {
        if (!m.prog) throw input_error("middlebox '" + m.name + "': unknown program '" + m.program + "'");
        compile_instance(net, m);
    }

    auto endpoint = [&](const std::string& s) {
        Endpoint e;
        auto dot = s.find('.');
        std::string n = s.substr(0, dot);
        int h = net.host_index(n), m = net.mbox_index(n);
        if (h >= 0) {
            if (dot != std::string::npos) throw input_error("link endpoint '" + s + "': hosts have no ports");
            e.host = true;
            e.node = h;
            return e;
        }
        if (m < 0) throw input_error("link endpoint '" + s + "': unknown node '" + n + "'");
        if (dot == std::string::npos) throw input_error("link endpoint '" + s + "': middlebox endpoint needs a port");
        e.node = m;
        e.port = std::stoi(s.substr(dot + 1));
        if (net.mboxes[m].inst.port_pos(e.port) < 0)
            throw input_error("link endpoint '" + s + "': port " + std::to_string(e.port) + " not declared by program " +
                              net.mboxes[m].prog->name);
        return e;
    };

    net.channels.clear();
    net.mbox_in.assign(net.mboxes.size(), {});
    net.mbox_out.assign(net.mboxes.size(), {});
    for (size_t m = 0; m < net.mboxes.size(); ++m) {
        net.mbox_in[m].assign(net.mboxes[m].inst.ports.size(), -1);
        net.mbox_out[m].assign(net.mboxes[m].inst.ports.size(), -1);
    }
    net.host_in.assign(net.hosts.size(), -1);
    net.host_out.assign(net.hosts.size(), -1);
    auto attach = [&](const Endpoint& from, const Endpoint& to, int ch) {
        if (from.host) {
            if (net.host_out[from.node] >= 0) throw input_error("host '" + net.hosts[from.node].name + "' has more than one link");
            net.host_out[from.node] = ch;
        } else {
            int pos = net.mboxes[from.node].inst.port_pos(from.port);
            if (net.mbox_out[from.node][pos] >= 0 && !(from == to))
                throw input_error("port " + net.mboxes[from.node].name + "." + std::to_string(from.port) + " linked twice");
            net.mbox_out[from.node][pos] = ch;
        }
        if (to.host) {
            net.host_in[to.node] = ch;
        } else {
            int pos = net.mboxes[to.node].inst.port_pos(to.port);
            net.mbox_in[to.node][pos] = ch;
        }
    };
    for (auto& l : net.links) {
        Endpoint a = endpoint(l.a), b = endpoint(l.b);
        if (a.host && b.host) throw input_error("link " + l.a + " -- " + l.b + ": hosts cannot link to hosts");
        int ch = static_cast<int>(net.channels.size());
        net.channels.push_back({a, b});
        attach(a, b, ch);
        if (!(a == b)) {
            net.channels.push_back({b, a});
            attach(b, a, ch + 1);
        }
    }
    for (size_t m = 0; m < net.mboxes.size(); ++m)
        for (size_t i = 0; i < net.mboxes[m].inst.ports.size(); ++i)
            if (net.mbox_in[m][i] < 0)
                throw input_error("dangling port " + net.mboxes[m].name + "." + std::to_string(net.mboxes[m].inst.ports[i]));
    for (size_t h = 0; h < net.hosts.size(); ++h)
        if (net.host_out[h] < 0) throw input_error("host '" + net.hosts[h].name + "' is not linked");
    for (auto& iso : net.isolation) {
        if (net.host_index(iso.host) < 0) throw input_error("isolation target '" + iso.host + "' is not a host");
        expand(net, iso.forbidden, "isolation at '" + iso.host + "'");
    }
}

Network parse_topology(std::string_view text, const ProgramResolver& resolve) {
    detail::Cursor c(detail::lex(text));
    Network net;
    auto pattern = [&]() {
        PacketPattern p;
        auto field = [&]() -> std::string {
            if (c.accept("*")) return "*";
            return c.ident();
        };
        c.expect("(");
        p.src = field();
        c.expect(",");
        p.dst = field();
        c.expect(",");
        p.tag = field();
        c.expect(")");
        return p;
    };
    auto endpoint = [&]() {
        std::string n = c.ident();
        if (c.accept(".")) n += "." + std::to_string(c.number());
        return n;
    };
    while (!c.at_end()) {
        if (c.accept("tags")) {
            c.expect("{");
            if (!c.is("}")) {
                do {
                    net.tags.push_back(c.ident());
                } while (c.accept(","));
            }
            c.expect("}");
        } else if (c.accept("addresses")) {
            auto t = c.peek();
            std::string mode = c.ident();
            if (mode == "hosts_only") net.mbox_addresses = false;
            else if (mode == "all") net.mbox_addresses = true;
            else throw parse_error(t.line, t.col, "expected 'all' or 'hosts_only'");
        } else if (c.accept("host")) {
            HostNode h;
            h.name = c.ident();
            c.expect("sends");
            c.expect("{");
            if (!c.is("}")) {
                do {
                    h.patterns.push_back(pattern());
                } while (c.accept(","));
            }
            c.expect("}");
            net.hosts.push_back(std::move(h));
        } else if (c.accept("mbox")) {
            MboxNode m;
            m.name = c.ident();
            c.expect(":");
            auto t = c.peek();
            m.program = c.ident();
            try {
                m.prog = resolve ? resolve(m.program) : nullptr;
            } catch (const parse_error& e) {
                throw input_error("program '" + m.program + "': " + e.what());
            }
            if (!m.prog) throw parse_error(t.line, t.col, "unknown program '" + m.program + "'");
            net.mboxes.push_back(std::move(m));
        } else if (c.accept("link")) {
            Link l;
            l.a = endpoint();
            c.expect("--");
            l.b = endpoint();
            net.links.push_back(l);
        } else if (c.accept("property")) {
            c.expect("isolation");
            c.expect("{");
            while (c.accept("forbidden")) {
                IsolationSpec s;
                if (!c.is("at")) {
                    do {
                        s.forbidden.push_back(pattern());
                    } while (c.accept(","));
                }
                c.expect("at");
                s.host = c.ident();
                c.accept(";");
                net.isolation.push_back(std::move(s));
            }
            c.expect("}");
        } else {
            c.fail("expected tags, addresses, host, mbox, link or property");
        }
    }
    finalize(net);
    return net;
}

std::string print_topology(const Network& net) {
    std::ostringstream os;
    os << "tags {";
    for (size_t i = 0; i < net.tags.size(); ++i) os << (i ? ", " : "") << net.tags[i];
    os << "}\n";
    if (!net.mbox_addresses) os << "addresses hosts_only\n";
    for (auto& h : net.hosts) {
        os << "host " << h.name << " sends {";
        for (size_t i = 0; i < h.patterns.size(); ++i) os << (i ? ", " : "") << pattern_text(h.patterns[i]);
        os << "}\n";
    }
    for (auto& m : net.mboxes) os << "mbox " << m.name << " : " << m.program << "\n";
    for (auto& l : net.links) os << "link " << l.a << " -- " << l.b << "\n";
    if (!net.isolation.empty()) {
        os << "property isolation {\n";
        for (auto& s : net.isolation) {
            os << "  forbidden ";
            for (size_t i = 0; i < s.forbidden.size(); ++i) os << (i ? ", " : "") << pattern_text(s.forbidden[i]);
            os << (s.forbidden.empty() ? "" : " ") << "at " << s.host << "\n";
        }
        os << "}\n";
    }
    return os.str();
}

MiddleboxProgram isolation_checker_program(const std::string& name, const std::vector<std::vector<std::string>>& forbidden) {
    std::ostringstream os;
    os << "middlebox " << name << "\nports 0, 1\nrel forbidden(address, address, tag)";
    if (!forbidden.empty()) {
        os << " init {";
        for (size_t i = 0; i < forbidden.size(); ++i)
            os << (i ? ", " : "") << "(" << forbidden[i][0] << ", " << forbidden[i][1] << ", " << forbidden[i][2] << ")";
        os << "}";
    }
    os << "\ninput(src, dst, tag, prt):\n"
          "  when prt = 0 => output {(src, dst, tag, 1)}\n"
          "  when prt = 1 and (src, dst, tag) in forbidden => abort\n"
          "  when prt = 1 and not (src, dst, tag) in forbidden => output {(src, dst, tag, 0)}\n";
    return parse_program(os.str());
}

Network compile_isolation(const Network& in) {
    Network net = in;
    std::map<std::string, std::set<int>> per_host;
    std::vector<std::string> order;
    for (auto& s : in.isolation) {
        if (in.host_index(s.host) < 0) throw input_error("isolation target '" + s.host + "' is not a host");
        if (!per_host.count(s.host)) order.push_back(s.host);
        auto pk = expand(in, s.forbidden, "isolation at '" + s.host + "'");
        per_host[s.host].insert(pk.begin(), pk.end());
    }
    for (auto& h : order) {
        std::vector<std::vector<std::string>> rows;
        for (int pk : per_host[h]) {
            Packet p = in.pd.packet(pk);
            rows.push_back({in.sym(p.src), in.sym(p.dst), in.sym(p.tag)});
        }
        std::string chk = "chk_" + h;
        MboxNode m;
        m.name = chk;
        m.program = "isolation_" + h;
        m.prog = std::make_shared<const MiddleboxProgram>(isolation_checker_program(m.program, rows));
        m.checker = true;
        net.mboxes.push_back(std::move(m));
        for (size_t i = 0; i < net.links.size(); ++i) {
            auto& l = net.links[i];
            if (l.a != h && l.b != h) continue;
            std::string other = l.a == h ? l.b : l.a;
            l = {h, chk + ".0"};
            net.links.push_back({chk + ".1", other});
            break;
        }
    }
    net.isolation.clear();
    finalize(net);
    return net;
}

std::vector<Packet> packet_domain(const Network& net) {
    std::vector<Packet> out;
    for (size_t i = 0; i < net.pd.size(); ++i) out.push_back(net.pd.packet(static_cast<int>(i)));
    return out;
}

ProgramResolver directory_resolver(const std::string& dir) {
    auto cache = std::make_shared<std::map<std::string, std::shared_ptr<const MiddleboxProgram>>>();
    return [dir, cache](const std::string& name) -> std::shared_ptr<const MiddleboxProgram> {
        auto it = cache->find(name);
        if (it != cache->end()) return it->second;
        std::filesystem::path p = std::filesystem::path(dir) / (name + ".mbd");
        std::ifstream f(p);
        if (!f) return nullptr;
        std::stringstream ss;
        ss << f.rdbuf();
        auto prog = std::make_shared<const MiddleboxProgram>(parse_program(ss.str()));
        (*cache)[name] = prog;
        return prog;
    };
}

Network load_topology_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw input_error("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    auto dir = std::filesystem::path(path).parent_path().string();
    return parse_topology(ss.str(), directory_resolver(dir.empty() ? "." : dir));
}

std::map<std::string, std::vector<std::vector<std::string>>> describe_state(const Network& net, int m, const Bits& s) {
    std::map<std::string, std::vector<std::vector<std::string>>> out;
    auto& inst = net.mboxes[m].inst;
    for (auto& r : inst.rels) {
        auto& rows = out[r.name];
        for (size_t e = 0; e < r.size; ++e) {
            if (!s.get(r.offset + e)) continue;
            std::vector<std::string> row;
            for (int sy : r.tuple(e)) row.push_back(net.sym(sy));
            rows.push_back(row);
        }
        std::sort(rows.begin(), rows.end());
    }
    return out;
}

}  // namespace mbv
