#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "mbv/gen.hpp"
#include "mbv/mbdl.hpp"

namespace mbv {

std::string corpus_dir() {
    if (const char* e = std::getenv("MBV_CORPUS")) return e;
    return MBV_CORPUS_DIR;
}

std::vector<std::string> corpus_names() {
    return {"firewall2", "order-matters", "lb-ratelimiter", "fw-proxy", "multi-tenant", "learning3", "acl", "proxy-pair"};
}

Network corpus(const std::string& name) {
    auto names = corpus_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) throw input_error("unknown corpus network '" + name + "'");
    return load_topology_file((std::filesystem::path(corpus_dir()) / (name + ".topo")).string());
}

bool is_simple(const Vass& v, std::string* why) {
    auto fail = [&](const std::string& m) {
        if (why) *why = m;
        return false;
    };
    if (v.vertices < 1 || v.dims < 1) return fail("empty VASS");
    if (v.initial < 0 || v.initial >= v.vertices) return fail("initial vertex out of range");
    for (int r : v.reach)
        if (r < 0 || r >= v.vertices) return fail("reachability vertex out of range");
    std::set<std::pair<int, std::vector<int>>> seen;
    for (auto& e : v.edges) {
        if (e.from < 0 || e.from >= v.vertices || e.to < 0 || e.to >= v.vertices) return fail("edge vertex out of range");
        if (static_cast<int>(e.w.size()) != v.dims) return fail("weight has the wrong dimension");
        int nz = 0;
        for (int x : e.w) {
            if (x != 0 && x != 1 && x != -1) return fail("weight entry outside {-1, 0, 1}");
            nz += x != 0;
        }
        if (nz != 1) return fail("weight must have exactly one non-zero entry");
        if (!seen.insert({e.from, e.w}).second)
            return fail("vertex v" + std::to_string(e.from) + " has two outgoing edges with the same weight");
    }
    return true;
}

Network vass_to_network(const Vass& v) {
    std::string why;
    if (!is_simple(v, &why)) throw input_error("not a simple VASS: " + why);
    ExplicitMiddlebox m;
    m.name = "vass";
    for (int i = 0; i < v.vertices; ++i) m.states.push_back("v" + std::to_string(i));
    m.states.push_back("sink");
    m.initial = "v" + std::to_string(v.initial);
    m.ports = {1, 2, 3};
    std::vector<std::string> tags;
    for (int t = 1; t <= v.dims; ++t) tags.push_back("t" + std::to_string(t));
    for (auto& s : {"h1", "h2"})
        for (auto& d : {"h1", "h2"})
            for (auto& t : tags) m.packets.push_back({s, d, t});
    std::set<int> reach(v.reach.begin(), v.reach.end());

    for (size_t q = 0; q < m.states.size(); ++q) {
        auto& state = m.states[q];
        for (auto& pk : m.packets)
            for (int port : m.ports) {
                ExplicitMiddlebox::Move mv;
                mv.next = "sink";
                bool counted = pk.src == "h1" && pk.dst == "h2";
                if (state != "sink" && counted && port != 3) {
                    int t = std::stoi(pk.tag.substr(1)) - 1;
                    if (reach.count(static_cast<int>(q))) {
                        mv.next = state;
                        mv.out.push_back({pk, 3});
                    } else {
                        for (auto& e : v.edges) {
                            if (e.from != static_cast<int>(q) || e.w[t] != (port == 1 ? 1 : -1)) continue;
                            mv.next = m.states[e.to];
                            if (port == 1) mv.out.push_back({pk, 2});
                        }
                    }
                }
                m.delta[{state, pk, port}] = {mv};
            }
    }

    Network net;
    net.tags = tags;
    net.mbox_addresses = false;
    HostNode h1, h2;
    h1.name = "h1";
    for (auto& t : tags) h1.patterns.push_back({"h1", "h2", t});
    h2.name = "h2";
    net.hosts = {h1, h2};
    MboxNode mb;
    mb.name = "m";
    mb.program = "vass";
    mb.prog = std::make_shared<const MiddleboxProgram>(explicit_to_symbolic(m));
    net.mboxes.push_back(std::move(mb));
    net.links = {{"h1", "m.1"}, {"m.2", "m.2"}, {"m.3", "h2"}};
    net.isolation.push_back({"h2", {PacketPattern{}}});
    finalize(net);
    return net;
}

Vass random_vass(uint64_t seed, int max_vertices, int dims) {
    std::mt19937_64 rng(seed);
    auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<uint64_t>(n)); };
    Vass v;
    v.vertices = 1 + pick(max_vertices);
    v.dims = 1 + pick(dims);
    v.initial = 0;
    std::set<std::pair<int, std::vector<int>>> used;
    int ne = pick(2 * v.vertices + 2);
    for (int i = 0; i < ne; ++i) {
        Vass::Edge e;
        e.from = pick(v.vertices);
        e.to = pick(v.vertices);
        e.w.assign(v.dims, 0);
        e.w[pick(v.dims)] = pick(2) ? 1 : -1;
        if (used.insert({e.from, e.w}).second) v.edges.push_back(e);
    }
    for (int i = 0; i < v.vertices; ++i)
        if (pick(4) == 0) v.reach.push_back(i);
    if (v.reach.empty()) v.reach.push_back(v.vertices - 1);
    return v;
}

namespace {

struct ProgramGen {
    std::mt19937_64& rng;
    const RandomParams& p;
    std::vector<std::string> hosts, tags;
    std::vector<int> ports;
    struct Rel {
        std::string name;
        int arity;
    };
    std::vector<Rel> rels;

    int pick(int n) { return static_cast<int>(rng() % static_cast<uint64_t>(n)); }
    bool chance(double x) { return std::uniform_real_distribution<double>(0, 1)(rng) < x; }
    template <class T>
    const T& any(const std::vector<T>& v) {
        return v[pick(static_cast<int>(v.size()))];
    }

    std::string addr() { return chance(0.75) ? std::string(pick(2) ? "src" : "dst") : any(hosts); }

    std::string member() {
        auto& r = any(rels);
        if (r.arity == 1) return addr() + " in " + r.name;
        return "(" + addr() + ", " + (chance(0.7) ? std::string("tag") : any(tags)) + ") in " + r.name;
    }

    std::string atom() {
        std::string a;
        bool mem = !rels.empty() && chance(0.5);
        if (mem) a = member();
        else {
            switch (pick(4)) {
                case 0: a = "prt = " + std::to_string(any(ports)); break;
                case 1: a = "src = " + any(hosts); break;
                case 2: a = "dst = " + any(hosts); break;
                default: a = "tag = " + any(tags); break;
            }
        }
        if ((!mem || p.negation) && chance(0.3)) return "not (" + a + ")";
        return a;
    }

    std::string guard() {
        std::string g = atom();
        int extra = pick(2);
        for (int i = 0; i < extra; ++i) g += (chance(0.75) ? " and " : " or ") + atom();
        return g;
    }

    std::string tuple_cmd(const std::string& op) {
        auto& r = any(rels);
        std::string t = r.arity == 1 ? addr() : addr() + ", " + (chance(0.7) ? std::string("tag") : any(tags));
        return r.name + "." + op + "(" + t + ")";
    }

    // `sent` holds the outputs already issued on this path, so no path emits
    // the same (packet, port) twice.
    std::string command(std::set<std::string>& sent, int depth, bool& aborted) {
        int n = 1 + pick(3);
        std::vector<std::string> parts;
        for (int i = 0; i < n && !aborted; ++i) {
            int kind = pick(10);
            if (chance(p.abort_rate)) {
                parts.push_back("abort");
                aborted = true;
            } else if (kind < 5 || rels.empty()) {
                std::vector<std::string> outs;
                int k = pick(3);
                for (int j = 0; j < k; ++j) {
                    std::string o = "(" + (chance(0.8) ? std::string("src") : any(hosts)) + ", " +
                                    (chance(0.8) ? std::string("dst") : any(hosts)) + ", " +
                                    (chance(0.8) ? std::string("tag") : any(tags)) + ", " + std::to_string(any(ports)) + ")";
                    if (sent.insert(o).second) outs.push_back(o);
                }
                std::string s = "output {";
                for (size_t j = 0; j < outs.size(); ++j) s += (j ? ", " : "") + outs[j];
                parts.push_back(s + "}");
            } else if (kind < 8 || !p.remove) {
                parts.push_back(tuple_cmd("insert"));
            } else if (kind < 9 && depth == 0 && p.overlap) {
                parts.push_back(block(sent, depth + 1));
            } else {
                parts.push_back(tuple_cmd("remove"));
            }
        }
        std::string s;
        for (size_t i = 0; i < parts.size(); ++i) s += (i ? "; " : "") + parts[i];
        return s;
    }

    std::string block(std::set<std::string>& sent, int depth) {
        std::string s = "block\n";
        int n = 1 + pick(std::min(p.block, 2));
        for (int i = 0; i < n; ++i) {
            auto branch = sent;
            bool ab = false;
            s += "    when " + guard() + " => " + command(branch, depth, ab) + "\n";
        }
        return s + "  end";
    }

    std::string program(const std::string& name) {
        rels.clear();
        int nr = pick(p.relations + 1);
        for (int i = 0; i < nr; ++i) rels.push_back({"r" + std::to_string(i), 1 + pick(2)});
        std::ostringstream os;
        os << "middlebox " << name << "\nports ";
        for (size_t i = 0; i < ports.size(); ++i) os << (i ? ", " : "") << ports[i];
        os << "\n";
        for (auto& r : rels) os << "rel " << r.name << "(address" << (r.arity == 2 ? ", tag" : "") << ")\n";
        os << "\ninput(src, dst, tag, prt):\n";
        int n = 1 + pick(p.block);
        if (!p.overlap) n = std::min<int>(n, static_cast<int>(ports.size()));
        std::vector<int> perm = ports;
        std::shuffle(perm.begin(), perm.end(), rng);
        for (int i = 0; i < n; ++i) {
            std::set<std::string> sent;
            bool ab = false;
            std::string g = p.overlap ? guard() : "prt = " + std::to_string(perm[i]) + (chance(0.5) ? " and (" + guard() + ")" : "");
            os << "  when " << g << " => " << command(sent, 0, ab) << "\n";
        }
        return os.str();
    }
};

}  // namespace

RandomNetwork random_network(const RandomParams& p, uint64_t seed) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + 17);
    auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<uint64_t>(std::max(1, n))); };
    RandomNetwork out;
    Network& net = out.net;
    int H = 2 + pick(std::max(1, p.hosts - 1));
    int M = 1 + pick(p.mboxes);
    int T = 1 + pick(p.tags);
    for (int t = 1; t <= T; ++t) net.tags.push_back("t" + std::to_string(t));
    net.mbox_addresses = false;
    std::vector<std::string> hosts;
    for (int h = 1; h <= H; ++h) hosts.push_back("h" + std::to_string(h));

    // ports: enough for every host to get its own
    std::vector<int> nports(M);
    int total = 0;
    for (int m = 0; m < M; ++m) total += nports[m] = 2 + pick(2);
    while (total < H) {
        ++nports[pick(M)];
        ++total;
    }
    std::vector<std::string> ends;
    for (int m = 0; m < M; ++m)
        for (int k = 1; k <= nports[m]; ++k) ends.push_back("g" + std::to_string(m + 1) + "." + std::to_string(k));
    std::shuffle(ends.begin(), ends.end(), rng);
    for (int h = 0; h < H; ++h) net.links.push_back({hosts[h], ends[h]});
    std::vector<std::string> rest(ends.begin() + H, ends.end());
    for (size_t i = 0; i + 1 < rest.size(); i += 2) net.links.push_back({rest[i], rest[i + 1]});
    if (rest.size() % 2) net.links.push_back({rest.back(), rest.back()});

    for (int h = 0; h < H; ++h) {
        HostNode hn;
        hn.name = hosts[h];
        int mode = pick(4);
        if (mode == 0) hn.patterns.push_back({hosts[h], hosts[pick(H)], net.tags[pick(T)]});
        else if (mode == 1) hn.patterns.push_back({hosts[h], hosts[pick(H)], "*"});
        else if (mode == 2) hn.patterns.push_back({hosts[h], "*", "*"});
        net.hosts.push_back(hn);
    }

    ProgramGen g{rng, p, hosts, net.tags, {}, {}};
    for (int m = 0; m < M; ++m) {
        g.ports.clear();
        for (int k = 1; k <= nports[m]; ++k) g.ports.push_back(k);
        std::string name = "g" + std::to_string(m + 1);
        std::string text = g.program("prog_" + name);
        auto prog = std::make_shared<const MiddleboxProgram>(parse_program(text));
        MboxNode mb;
        mb.name = name;
        mb.program = prog->name;
        mb.prog = prog;
        net.mboxes.push_back(std::move(mb));
        out.programs.push_back(*prog);
        out.classes.push_back(classify(*prog));
    }

    int target = pick(H);
    int from = (target + 1 + pick(H - 1)) % H;
    IsolationSpec iso;
    iso.host = hosts[target];
    if (pick(3) == 0) iso.forbidden.push_back({"*", "*", net.tags[pick(T)]});
    else iso.forbidden.push_back({hosts[from], "*", "*"});
    net.isolation.push_back(iso);
    finalize(net);
    return out;
}

void write_network(const Network& net, const std::string& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    auto put = [&](const std::string& file, const std::string& text) {
        std::ofstream f(std::filesystem::path(dir) / file);
        if (!f) throw input_error("cannot write " + file + " in " + dir);
        f << text;
    };
    std::set<std::string> done;
    for (auto& m : net.mboxes)
        if (!m.checker && done.insert(m.program).second) put(m.program + ".mbd", print_program(*m.prog));
    put(name + ".topo", print_topology(net));
}

}  // namespace mbv
