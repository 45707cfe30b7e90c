#include <algorithm>
#include <deque>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "mbv/interp.hpp"
#include "mbv/petri.hpp"

namespace mbv {

uint32_t count(const Marking& m, uint32_t place) {
    auto it = std::lower_bound(m.begin(), m.end(), std::pair<uint32_t, uint32_t>{place, 0});
    return it != m.end() && it->first == place ? it->second : 0;
}

bool covers(const Marking& big, const Marking& small) {
    size_t i = 0;
    for (auto& [p, c] : small) {
        while (i < big.size() && big[i].first < p) ++i;
        if (i == big.size() || big[i].first != p || big[i].second < c) return false;
    }
    return true;
}

Marking add(const Marking& a, const Marking& b) {
    Marking r;
    r.reserve(a.size() + b.size());
    size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) r.push_back(a[i++]);
        else if (i == a.size() || b[j].first < a[i].first) r.push_back(b[j++]);
        else {
            r.emplace_back(a[i].first, a[i].second + b[j].second);
            ++i, ++j;
        }
    }
    return r;
}

Marking monus(const Marking& a, const Marking& b) {
    Marking r;
    r.reserve(a.size());
    size_t j = 0;
    for (auto& [p, c] : a) {
        while (j < b.size() && b[j].first < p) ++j;
        uint32_t sub = (j < b.size() && b[j].first == p) ? b[j].second : 0;
        if (c > sub) r.emplace_back(p, c - sub);
    }
    return r;
}

int PetriNet::add_place(Place p) {
    places.push_back(std::move(p));
    return static_cast<int>(places.size()) - 1;
}

bool enabled(const Transition& t, const Marking& m) { return covers(m, t.in); }

Marking fire(const Transition& t, const Marking& m) { return add(monus(m, t.in), t.out); }

bool replay(const PetriNet& net, const Marking& from, const std::vector<int>& seq, Marking* out) {
    Marking m = from;
    for (int t : seq) {
        if (t < 0 || t >= static_cast<int>(net.transitions.size()) || !enabled(net.transitions[t], m)) return false;
        m = fire(net.transitions[t], m);
    }
    if (out) *out = std::move(m);
    return true;
}

namespace {

Marking single(uint32_t p, uint32_t c = 1) { return {{p, c}}; }

std::string sanitize(const std::string& s) {
    std::string r = s;
    for (auto& ch : r)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_') ch = '_';
    return r;
}

// Guard after substituting the packet and port: equalities are constants,
// memberships either constants or atoms on one relation element.
struct SG {
    enum class K { tru, fls, atom, conj, disj };
    K k = K::tru;
    int elem = -1;
    bool pos = true;
    std::vector<SG> kids;

    static SG constant(bool v) { return {v ? K::tru : K::fls, -1, true, {}}; }
};

SG sg_and(SG a, SG b) {
    if (a.k == SG::K::fls || b.k == SG::K::fls) return SG::constant(false);
    if (a.k == SG::K::tru) return b;
    if (b.k == SG::K::tru) return a;
    SG r{SG::K::conj, -1, true, {}};
    r.kids.push_back(std::move(a));
    r.kids.push_back(std::move(b));
    return r;
}

SG sg_or(SG a, SG b) {
    if (a.k == SG::K::tru || b.k == SG::K::tru) return SG::constant(true);
    if (a.k == SG::K::fls) return b;
    if (b.k == SG::K::fls) return a;
    SG r{SG::K::disj, -1, true, {}};
    r.kids.push_back(std::move(a));
    r.kids.push_back(std::move(b));
    return r;
}

// Guard transitions laid out as in the construction: atoms test one place,
// conjunctions split the token in two and join, disjunctions pick a side.
struct GN {
    SG::K k = SG::K::tru;
    int t = -1;
    int elem = -1;
    bool pos = true;
    int split = -1, b1 = -1, b2 = -1, join = -1;
    int left = -1, right = -1, left_out = -1, right_out = -1;
    std::vector<GN> kids;
};

struct CN {
    Command::Kind k = Command::Kind::output;
    int t = -1;
    int present = -1, absent = -1, elem = -1;
    bool ins = true;
    std::vector<CN> seq;
    std::vector<std::pair<GN, CN>> block;
};

struct Encoder {
    const Network& net;
    EncodeOptions opt;
    Encoding enc;
    PetriNet& pn = enc.net;

    std::map<std::pair<int, int>, std::pair<int, int>> elem_place;  // (mbox, bit) -> (active, inactive)
    std::map<std::pair<int, int>, int> chan_place;                   // (channel, pkt)
    std::unordered_set<std::string> names;
    std::vector<std::vector<std::set<int>>> reach;                  // [m][pos] -> packets

    // current processing context
    int cm = -1, cpkt = -1, cpos = -1, cport = -1;
    Binding b{};
    Marking term;
    int aux = 0;
    std::string ctx;

    Encoder(const Network& n, const EncodeOptions& o) : net(n), opt(o) {}

    int place(const std::string& base, PlaceRole role) {
        std::string name = sanitize(base);
        if (names.count(name)) {
            int k = 2;
            while (names.count(name + "_" + std::to_string(k))) ++k;
            name += "_" + std::to_string(k);
        }
        names.insert(name);
        Place p;
        p.name = name;
        p.role = role;
        return pn.add_place(std::move(p));
    }

    std::string pkt_name(int pkt) const {
        Packet p = net.pd.packet(pkt);
        return net.sym(p.src) + "_" + net.sym(p.dst) + "_" + net.sym(p.tag);
    }

    int chan(int ch, int pkt) {
        auto key = std::pair{ch, pkt};
        auto it = chan_place.find(key);
        if (it != chan_place.end()) return it->second;
        int id = place("ch" + std::to_string(ch) + "_" + pkt_name(pkt), PlaceRole::channel);
        pn.places[id].channel = ch;
        pn.places[id].pkt = pkt;
        pn.places[id].mbox = net.channels[ch].to.node;
        pn.places[id].port = net.channels[ch].to.port;
        chan_place.emplace(key, id);
        return id;
    }

    std::pair<int, int> element(int m, int bit) {
        auto key = std::pair{m, bit};
        auto it = elem_place.find(key);
        if (it != elem_place.end()) return it->second;
        auto& inst = net.mboxes[m].inst;
        std::string desc;
        for (auto& r : inst.rels)
            if (static_cast<size_t>(bit) >= r.offset && static_cast<size_t>(bit) < r.offset + r.size) {
                desc = r.name;
                for (int s : r.tuple(bit - r.offset)) desc += "_" + net.sym(s);
            }
        std::string base = net.mboxes[m].name + "_" + desc;
        int a = place("act_" + base, PlaceRole::active);
        int i = place("ina_" + base, PlaceRole::inactive);
        for (int p : {a, i}) {
            pn.places[p].mbox = m;
            pn.places[p].element = bit;
        }
        bool on = inst.init.get(bit);
        pn.init.emplace_back(on ? a : i, 1);
        pn.invariants.push_back({{{static_cast<uint32_t>(std::min(a, i)), 1}, {static_cast<uint32_t>(std::max(a, i)), 1}}, 1});
        elem_place.emplace(key, std::pair{a, i});
        return {a, i};
    }

    int ctx_place(const std::string& what, PlaceRole role) {
        int id = place(what + "_" + ctx, role);
        auto& p = pn.places[id];
        p.mbox = cm;
        p.pkt = cpkt;
        p.port = cport;
        return id;
    }

    int transition(Marking in, Marking out, const std::string& label) {
        std::sort(in.begin(), in.end());
        std::sort(out.begin(), out.end());
        Transition t;
        t.name = "t" + std::to_string(pn.transitions.size());
        t.label = label;
        t.in = std::move(in);
        t.out = std::move(out);
        t.mbox = cm;
        t.pkt = cpkt;
        t.port = cport;
        t.first = count(t.in, pn.global) > 0;
        t.terminal = count(t.out, pn.global) > 0;
        pn.transitions.push_back(std::move(t));
        return static_cast<int>(pn.transitions.size()) - 1;
    }

    static Marking merge(Marking a, const Marking& b) {
        std::sort(a.begin(), a.end());
        Marking s = b;
        std::sort(s.begin(), s.end());
        return add(a, s);
    }

    int val(const CExpr& e) const { return e.var >= 0 ? b[e.var] : e.sym; }

    long bit_of(int rel, const std::vector<CExpr>& tup) const {
        auto& r = net.mboxes[cm].inst.rels[rel];
        std::vector<int> syms;
        for (auto& e : tup) syms.push_back(val(e));
        long e = r.element(syms);
        return e < 0 ? -1 : static_cast<long>(r.offset) + e;
    }

    SG simplify(const CGuard& g, bool neg) const {
        switch (g.kind) {
            case Guard::Kind::atom:
            case Guard::Kind::not_atom: {
                bool n = neg != (g.kind == Guard::Kind::not_atom);
                if (g.atom.eq) return SG::constant((val(g.atom.a) == val(g.atom.b)) != n);
                long e = bit_of(g.atom.rel, g.atom.tuple);
                if (e < 0) return SG::constant(n);
                auto& inst = net.mboxes[cm].inst;
                if (opt.fold_constant_relations && !inst.rels[g.atom.rel].mutated)
                    return SG::constant(inst.init.get(static_cast<size_t>(e)) != n);
                return {SG::K::atom, static_cast<int>(e), !n, {}};
            }
            case Guard::Kind::conj:
                return neg ? sg_or(simplify(g.kids[0], true), simplify(g.kids[1], true))
                           : sg_and(simplify(g.kids[0], false), simplify(g.kids[1], false));
            case Guard::Kind::disj:
                return neg ? sg_and(simplify(g.kids[0], true), simplify(g.kids[1], true))
                           : sg_or(simplify(g.kids[0], false), simplify(g.kids[1], false));
        }
        return SG::constant(false);
    }

    GN emit_guard(const SG& g, int from, const Marking& to, const Marking& extras) {
        GN n;
        n.k = g.k;
        switch (g.k) {
            case SG::K::fls:
                break;
            case SG::K::tru:
                n.t = transition(merge(single(from), extras), to, "guard true");
                break;
            case SG::K::atom: {
                auto [a, i] = element(cm, g.elem);
                int q = g.pos ? a : i;
                n.elem = g.elem;
                n.pos = g.pos;
                n.t = transition(merge({{from, 1}, {q, 1}}, extras), merge(to, single(q)),
                                 std::string(g.pos ? "test " : "test not ") + pn.places[a].name.substr(4));
                break;
            }
            case SG::K::conj: {
                int c[5];
                for (int k = 0; k < 5; ++k) c[k] = ctx_place("aux" + std::to_string(aux++), PlaceRole::aux);
                n.split = transition(merge(single(from), extras), single(c[0], 2), "and split");
                n.b1 = transition(single(c[0]), single(c[1]), "and left");
                n.b2 = transition(single(c[0]), single(c[2]), "and right");
                n.kids.push_back(emit_guard(g.kids[0], c[1], single(c[3]), {}));
                n.kids.push_back(emit_guard(g.kids[1], c[2], single(c[4]), {}));
                n.join = transition(merge(single(c[3]), single(c[4])), to, "and join");
                break;
            }
            case SG::K::disj: {
                int c[4];
                for (int k = 0; k < 4; ++k) c[k] = ctx_place("aux" + std::to_string(aux++), PlaceRole::aux);
                n.left = transition(merge(single(from), extras), single(c[0]), "or left");
                n.right = transition(merge(single(from), extras), single(c[1]), "or right");
                n.kids.push_back(emit_guard(g.kids[0], c[0], single(c[2]), {}));
                n.kids.push_back(emit_guard(g.kids[1], c[1], single(c[3]), {}));
                n.left_out = transition(single(c[2]), to, "or left done");
                n.right_out = transition(single(c[3]), to, "or right done");
                break;
            }
        }
        return n;
    }

    std::map<int, int> node_place;

    int cmd_place(const CCmd& c) {
        if (c.kind == Command::Kind::seq) return cmd_place(c.seq[0]);
        auto it = node_place.find(c.id);
        if (it != node_place.end()) return it->second;
        int id = ctx_place(net.mboxes[cm].name + "_n" + std::to_string(c.id), PlaceRole::command);
        pn.places[id].name = "cmd_" + pn.places[id].name;
        names.insert(pn.places[id].name);
        node_place.emplace(c.id, id);
        return id;
    }

    CN emit_cmd(const CCmd& c, const Marking& cont, const Marking& extras) {
        CN n;
        n.k = c.kind;
        int at = c.kind == Command::Kind::seq ? -1 : cmd_place(c);
        auto& inst = net.mboxes[cm].inst;
        switch (c.kind) {
            case Command::Kind::output: {
                std::set<int> outs;
                for (auto& o : c.outs) {
                    int pkt = net.pd.index({val(o.src), val(o.dst), val(o.tag)});
                    auto pit = inst.port_of_sym.find(val(o.port));
                    if (pkt < 0 || pit == inst.port_of_sym.end()) continue;
                    int ch = net.mbox_out[cm][inst.port_pos(pit->second)];
                    if (net.channels[ch].to.host) continue;  // hosts consume silently
                    outs.insert(chan(ch, pkt));
                }
                Marking prod;
                for (int p : outs) prod.emplace_back(p, 1);
                n.t = transition(merge(single(at), extras), merge(prod, cont), c.outs.empty() ? "output {}" : "output");
                break;
            }
            case Command::Kind::abort: {
                n.t = transition(merge(single(at), extras), merge(single(pn.abort), term), "abort");
                pn.transitions[n.t].abort = true;
                pn.transitions[n.t].terminal = true;
                break;
            }
            case Command::Kind::insert:
            case Command::Kind::remove: {
                n.ins = c.kind == Command::Kind::insert;
                long e = bit_of(c.rel, c.tuple);
                if (e < 0) {
                    n.k = Command::Kind::output;
                    n.t = transition(merge(single(at), extras), cont, "skip");
                    break;
                }
                n.elem = static_cast<int>(e);
                auto [a, i] = element(cm, n.elem);
                int res = n.ins ? a : i;
                std::string what = std::string(n.ins ? "insert " : "remove ") + pn.places[a].name.substr(4);
                n.present = transition(merge({{at, 1}, {a, 1}}, extras), merge(single(res), cont), what + " (present)");
                n.absent = transition(merge({{at, 1}, {i, 1}}, extras), merge(single(res), cont), what + " (absent)");
                break;
            }
            case Command::Kind::seq: {
                for (size_t k = 0; k < c.seq.size(); ++k) {
                    Marking next = k + 1 < c.seq.size() ? single(cmd_place(c.seq[k + 1])) : cont;
                    n.seq.push_back(emit_cmd(c.seq[k], next, k == 0 ? extras : Marking{}));
                }
                break;
            }
            case Command::Kind::block: {
                SG dflt = SG::constant(true);
                for (auto& [g, cmd] : c.block) {
                    SG sg = simplify(g, false);
                    dflt = sg_and(std::move(dflt), simplify(g, true));
                    if (sg.k == SG::K::fls) continue;
                    GN gn = emit_guard(sg, at, single(cmd_place(cmd)), extras);
                    n.block.emplace_back(std::move(gn), emit_cmd(cmd, cont, {}));
                }
                if (dflt.k != SG::K::fls) {
                    int dp = ctx_place(net.mboxes[cm].name + "_d" + std::to_string(c.id), PlaceRole::command);
                    pn.places[dp].name = "cmd_" + pn.places[dp].name;
                    names.insert(pn.places[dp].name);
                    GN gn = emit_guard(dflt, at, single(dp), extras);
                    CN out;
                    out.k = Command::Kind::output;
                    out.t = transition(single(dp), cont, "default output {}");
                    n.block.emplace_back(std::move(gn), std::move(out));
                }
                break;
            }
        }
        return n;
    }

    // ---- episode enumeration ----
    std::vector<int8_t> know;  // per state bit of cm: -1 unknown, else value
    std::vector<int> path;
    size_t episode_cap = 2'000'000;

    using K = std::function<void()>;

    bool assume(int elem, bool v, int8_t& saved) {
        saved = know[elem];
        if (saved >= 0 && saved != static_cast<int8_t>(v)) return false;
        know[elem] = static_cast<int8_t>(v);
        return true;
    }

    void with(int t, const K& k) {
        path.push_back(t);
        k();
        path.pop_back();
    }

    void walk_guard(const GN& g, const K& k) {
        switch (g.k) {
            case SG::K::fls:
                return;
            case SG::K::tru:
                return with(g.t, k);
            case SG::K::atom: {
                int8_t saved;
                if (assume(g.elem, g.pos, saved)) with(g.t, k);
                know[g.elem] = saved;
                return;
            }
            case SG::K::conj:
                path.push_back(g.split);
                path.push_back(g.b1);
                walk_guard(g.kids[0], [&] {
                    with(g.b2, [&] { walk_guard(g.kids[1], [&] { with(g.join, k); }); });
                });
                path.pop_back();
                path.pop_back();
                return;
            case SG::K::disj:
                with(g.left, [&] { walk_guard(g.kids[0], [&] { with(g.left_out, k); }); });
                with(g.right, [&] { walk_guard(g.kids[1], [&] { with(g.right_out, k); }); });
                return;
        }
    }

    void walk_seq(const CN& n, size_t i, const K& k) {
        if (i == n.seq.size()) return k();
        walk_cmd(n.seq[i], [&] { walk_seq(n, i + 1, k); });
    }

    void walk_cmd(const CN& n, const K& k) {
        switch (n.k) {
            case Command::Kind::output:
                return with(n.t, k);
            case Command::Kind::abort:
                path.push_back(n.t);
                record(true);
                path.pop_back();
                return;
            case Command::Kind::insert:
            case Command::Kind::remove:
                for (bool present : {true, false}) {
                    int8_t saved;
                    if (assume(n.elem, present, saved)) {
                        know[n.elem] = static_cast<int8_t>(n.ins);
                        with(present ? n.present : n.absent, k);
                    }
                    know[n.elem] = saved;
                }
                return;
            case Command::Kind::seq:
                return walk_seq(n, 0, k);
            case Command::Kind::block:
                for (auto& [g, c] : n.block) walk_guard(g, [&] { walk_cmd(c, k); });
                return;
        }
    }

    std::set<std::pair<Marking, Marking>> seen_episodes;

    void record(bool aborted) {
        Marking need;
        for (auto it = path.rbegin(); it != path.rend(); ++it) {
            auto& t = pn.transitions[*it];
            need = add(monus(need, t.out), t.in);
        }
        Marking cur = need;
        std::map<uint32_t, uint32_t> produced;
        for (int t : path) {
            cur = fire(pn.transitions[t], cur);
            for (auto& [p, c] : pn.transitions[t].out)
                if (pn.places[p].role == PlaceRole::channel) produced[p] += c;
        }
        // A step outputs a set: the same packet sent twice on one path is one token.
        Marking extra;
        for (auto& [p, c] : produced)
            if (c > 1) extra.emplace_back(p, c - 1);
        cur = monus(cur, extra);
        // the global token and the idle top place are back where they started
        auto strip = [&](Marking m) {
            Marking r;
            for (auto& e : m)
                if (static_cast<int>(e.first) != pn.global && static_cast<int>(e.first) != top) r.push_back(e);
            return r;
        };
        Episode e;
        e.mbox = cm;
        e.pkt = cpkt;
        e.port = cport;
        e.path = path;
        e.in = strip(need);
        e.out = strip(cur);
        e.abort = aborted;
        if (!seen_episodes.insert({e.in, e.out}).second) return;
        enc.episodes.push_back(std::move(e));
        if (enc.episodes.size() > episode_cap) throw input_error("Petri encoding: too many processing episodes");
    }

    int top = -1;

    void outputs_of(const CCmd& c, std::vector<std::pair<int, int>>& out) const {
        auto& inst = net.mboxes[cm].inst;
        switch (c.kind) {
            case Command::Kind::output:
                for (auto& o : c.outs) {
                    int pkt = net.pd.index({val(o.src), val(o.dst), val(o.tag)});
                    auto pit = inst.port_of_sym.find(val(o.port));
                    if (pkt >= 0 && pit != inst.port_of_sym.end()) out.emplace_back(pkt, pit->second);
                }
                break;
            case Command::Kind::seq:
                for (auto& k : c.seq) outputs_of(k, out);
                break;
            case Command::Kind::block:
                for (auto& [g, k] : c.block) outputs_of(k, out);
                break;
            default:
                break;
        }
    }

    void set_context(int m, int pos, int pkt) {
        auto& inst = net.mboxes[m].inst;
        cm = m;
        cpos = pos;
        cport = inst.ports[pos];
        cpkt = pkt;
        Packet p = net.pd.packet(pkt);
        b = {p.src, p.dst, p.tag, inst.port_sym[pos]};
        ctx = pkt_name(pkt) + "_" + std::to_string(cport);
    }

    // Packets that can show up on each middlebox port when guards are ignored.
    void compute_reach() {
        reach.assign(net.mboxes.size(), {});
        for (size_t m = 0; m < net.mboxes.size(); ++m) reach[m].resize(net.mboxes[m].inst.ports.size());
        std::deque<std::tuple<int, int, int>> work;
        auto push = [&](int ch, int pkt) {
            auto& to = net.channels[ch].to;
            if (to.host) return;
            int pos = net.mboxes[to.node].inst.port_pos(to.port);
            if (reach[to.node][pos].insert(pkt).second) work.emplace_back(to.node, pos, pkt);
        };
        for (size_t h = 0; h < net.hosts.size(); ++h)
            for (int pkt : net.hosts[h].sends) push(net.host_out[h], pkt);
        while (!work.empty()) {
            auto [m, pos, pkt] = work.front();
            work.pop_front();
            set_context(m, pos, pkt);
            std::vector<std::pair<int, int>> outs;
            outputs_of(net.mboxes[m].inst.body, outs);
            for (auto& [opkt, oport] : outs) push(net.mbox_out[m][net.mboxes[m].inst.port_pos(oport)], opkt);
        }
    }

    void run() {
        pn.global = place("global", PlaceRole::global);
        pn.abort = place("abort", PlaceRole::abort);
        pn.init.emplace_back(pn.global, 1);
        pn.target = single(pn.abort);
        compute_reach();
        for (size_t h = 0; h < net.hosts.size(); ++h) {
            int ch = net.host_out[h];
            for (int pkt : net.hosts[h].sends) {
                cm = -1, cpkt = pkt, cport = -1;
                int t = transition({}, single(chan(ch, pkt)), "send " + net.hosts[h].name + " " + net.packet_text(pkt));
                pn.transitions[t].host = static_cast<int>(h);
                pn.transitions[t].mbox = -1;
            }
        }
        Marking ctrl;
        for (size_t m = 0; m < net.mboxes.size(); ++m) {
            auto& inst = net.mboxes[m].inst;
            for (size_t pos = 0; pos < inst.ports.size(); ++pos) {
                int ch = net.mbox_in[m][pos];
                for (int pkt : reach[m][pos]) {
                    set_context(static_cast<int>(m), static_cast<int>(pos), pkt);
                    node_place.clear();
                    aux = 0;
                    top = cmd_place(inst.body);
                    pn.init.emplace_back(top, 1);
                    term = {{static_cast<uint32_t>(std::min(top, pn.global)), 1}, {static_cast<uint32_t>(std::max(top, pn.global)), 1}};
                    Marking extras = merge(single(pn.global), single(chan(ch, pkt)));
                    size_t first_place = pn.places.size();
                    CN root = emit_cmd(inst.body, term, extras);
                    // at most one non-top command place is marked, and only while global is not
                    for (size_t p = first_place; p < pn.places.size(); ++p)
                        if (pn.places[p].role == PlaceRole::command && static_cast<int>(p) != top) ctrl.emplace_back(p, 1);
                    know.assign(inst.bits, -1);
                    path.clear();
                    walk_cmd(root, [&] { record(false); });
                }
            }
        }
        ctrl.emplace_back(pn.global, 1);
        std::sort(ctrl.begin(), ctrl.end());
        pn.invariants.push_back({ctrl, 1});
        std::sort(pn.init.begin(), pn.init.end());
    }
};

}  // namespace

Encoding encode(const Network& net, const EncodeOptions& opt) {
    Encoder e(net, opt);
    e.run();
    return std::move(e.enc);
}

EpisodeNet episode_net(const Encoding& enc) {
    EpisodeNet en;
    en.net.places = enc.net.places;
    en.net.init = enc.net.init;
    en.net.target = enc.net.target;
    en.net.global = enc.net.global;
    en.net.abort = enc.net.abort;
    for (auto& inv : enc.net.invariants)
        if (count(inv.weights, enc.net.global) == 0) en.net.invariants.push_back(inv);
    for (size_t t = 0; t < enc.net.transitions.size(); ++t) {
        auto& tr = enc.net.transitions[t];
        if (tr.host < 0) continue;
        en.net.transitions.push_back(tr);
        en.origin.push_back(-1);
        en.host_of.push_back(static_cast<int>(t));
    }
    for (size_t e = 0; e < enc.episodes.size(); ++e) {
        auto& ep = enc.episodes[e];
        Transition t;
        t.name = "e" + std::to_string(e);
        t.in = ep.in;
        t.out = ep.out;
        t.mbox = ep.mbox;
        t.pkt = ep.pkt;
        t.port = ep.port;
        t.abort = ep.abort;
        en.net.transitions.push_back(std::move(t));
        en.origin.push_back(static_cast<int>(e));
        en.host_of.push_back(-1);
    }
    return en;
}

std::vector<int> expand_firing(const Encoding& enc, const EpisodeNet& en, const std::vector<int>& seq) {
    std::vector<int> out;
    for (int t : seq) {
        if (en.origin[t] < 0) out.push_back(en.host_of[t]);
        else {
            auto& p = enc.episodes[en.origin[t]].path;
            out.insert(out.end(), p.begin(), p.end());
        }
    }
    return out;
}

namespace {

struct MarkingHash {
    size_t operator()(const Marking& m) const {
        uint64_t h = 0xcbf29ce484222325ull;
        for (auto& [p, c] : m) h = (h ^ (uint64_t{p} << 20 ^ c)) * 0x100000001b3ull;
        return static_cast<size_t>(h ^ (h >> 31));
    }
};

bool violates(const std::vector<Invariant>& invs, const Marking& m) {
    for (auto& inv : invs) {
        uint64_t s = 0;
        size_t i = 0;
        for (auto& [p, w] : inv.weights) {
            while (i < m.size() && m[i].first < p) ++i;
            if (i < m.size() && m[i].first == p) s += uint64_t{w} * m[i].second;
        }
        if (s > inv.total) return true;
    }
    return false;
}

}  // namespace

CoverResult coverable(const PetriNet& net, const Marking& init, const Marking& target, const CoverOptions& opt) {
    CoverResult res;
    if (covers(init, target)) {
        res.verdict = CoverResult::Verdict::coverable;
        return res;
    }
    const size_t P = net.places.size();
    std::vector<std::vector<int>> producers(P);
    for (size_t t = 0; t < net.transitions.size(); ++t)
        for (auto& [p, c] : net.transitions[t].out)
            if (c > count(net.transitions[t].in, p)) producers[p].push_back(static_cast<int>(t));

    // Only invariants whose places the nets share are usable; skip the rest.
    std::vector<Invariant> invs;
    if (opt.use_invariants)
        for (auto& inv : net.invariants)
            if (!inv.weights.empty() && inv.weights.back().first < P) invs.push_back(inv);

    struct Node {
        Marking m;
        int parent;
        int trans;
    };
    std::vector<Node> nodes;
    std::vector<char> alive;
    std::vector<std::vector<int>> by_first(P), containing(P);
    // Expanded in order of how many tokens are still missing from init, so a
    // coverable target usually reaches init long before the basis saturates.
    using Entry = std::pair<uint64_t, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
    auto deficit = [&](const Marking& m) {
        uint64_t d = 0;
        for (auto& [p, c] : monus(m, init)) d += c;
        return d;
    };

    auto insert = [&](Marking m, int parent, int trans) {
        int id = static_cast<int>(nodes.size());
        for (auto& [p, c] : m) containing[p].push_back(id);
        if (!m.empty()) by_first[m.front().first].push_back(id);
        nodes.push_back({std::move(m), parent, trans});
        alive.push_back(1);
        frontier.emplace(deficit(nodes[id].m), id);
        return id;
    };
    auto covered = [&](const Marking& m) {
        for (auto& [p, c] : m)
            for (int e : by_first[p])
                if (alive[e] && covers(m, nodes[e].m)) return true;
        return false;
    };
    auto drop_dominated = [&](const Marking& m) {
        if (m.empty()) {
            std::fill(alive.begin(), alive.end(), 0);
            return;
        }
        uint32_t best = m.front().first;
        for (auto& [p, c] : m)
            if (containing[p].size() < containing[best].size()) best = p;
        auto& list = containing[best];
        size_t w = 0;
        for (int e : list) {
            if (!alive[e]) continue;
            if (covers(nodes[e].m, m)) alive[e] = 0;
            else list[w++] = e;
        }
        list.resize(w);
    };

    insert(target, -1, -1);
    size_t live = 1;
    while (!frontier.empty()) {
        int id = frontier.top().second;
        frontier.pop();
        if (!alive[id]) continue;
        ++res.iterations;
        std::vector<int> cand;
        for (auto& [p, c] : nodes[id].m) cand.insert(cand.end(), producers[p].begin(), producers[p].end());
        std::sort(cand.begin(), cand.end());
        cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
        for (int t : cand) {
            auto& tr = net.transitions[t];
            Marking pre = add(monus(nodes[id].m, tr.out), tr.in);
            if (!invs.empty() && violates(invs, pre)) continue;
            if (opt.infeasible && opt.infeasible(pre)) continue;
            if (covered(pre)) continue;
            drop_dominated(pre);
            int nid = insert(std::move(pre), id, t);
            ++live;
            if (covers(init, nodes[nid].m)) {
                res.verdict = CoverResult::Verdict::coverable;
                for (int k = nid; nodes[k].parent >= 0; k = nodes[k].parent) res.firing.push_back(nodes[k].trans);
                res.basis = nodes.size();
                return res;
            }
            if (nodes.size() > opt.max_basis) {
                res.verdict = CoverResult::Verdict::resource_limit;
                res.basis = nodes.size();
                return res;
            }
        }
    }
    res.basis = nodes.size();
    res.verdict = CoverResult::Verdict::uncoverable;
    if (opt.keep_basis)
        for (size_t i = 0; i < nodes.size(); ++i)
            if (alive[i]) res.minimal.push_back(nodes[i].m);
    return res;
}

ForwardResult forward_explore(const PetriNet& net, const Marking& init, const Marking& target, int max_firings,
                              size_t max_markings, const std::function<void(const Marking&)>& visit) {
    ForwardResult res;
    std::vector<Marking> marks{init};
    std::vector<std::pair<int, int>> parent{{-1, -1}};
    std::unordered_map<Marking, int, MarkingHash> index{{init, 0}};
    if (visit) visit(init);
    auto trace = [&](int id) {
        std::vector<int> seq;
        for (; parent[id].first >= 0; id = parent[id].first) seq.push_back(parent[id].second);
        std::reverse(seq.begin(), seq.end());
        return seq;
    };
    if (covers(init, target)) {
        res.verdict = ForwardResult::Verdict::coverable;
        res.markings = 1;
        return res;
    }
    bool cut = false;
    std::vector<int> level{0};
    for (int d = 0; d < max_firings && !level.empty(); ++d) {
        std::vector<int> next;
        for (int id : level) {
            for (size_t t = 0; t < net.transitions.size(); ++t) {
                auto& tr = net.transitions[t];
                if (!enabled(tr, marks[id])) continue;
                Marking m = fire(tr, marks[id]);
                if (index.count(m)) continue;
                if (marks.size() >= max_markings) {
                    cut = true;
                    continue;
                }
                int nid = static_cast<int>(marks.size());
                index.emplace(m, nid);
                marks.push_back(std::move(m));
                parent.emplace_back(id, static_cast<int>(t));
                if (visit) visit(marks[nid]);
                if (covers(marks[nid], target)) {
                    res.verdict = ForwardResult::Verdict::coverable;
                    res.firing = trace(nid);
                    res.markings = marks.size();
                    return res;
                }
                next.push_back(nid);
            }
        }
        level = std::move(next);
    }
    if (!level.empty()) {
        // anything new one step further?
        for (int id : level)
            for (auto& tr : net.transitions)
                if (enabled(tr, marks[id]) && !index.count(fire(tr, marks[id]))) cut = true;
    }
    res.markings = marks.size();
    res.complete = !cut;
    return res;
}

Witness firing_to_witness(const Network& net, const Encoding& enc, const std::vector<int>& firing) {
    auto& pn = enc.net;
    Config c = initial_config(net);
    Marking mk = pn.init;
    Witness w;
    auto emit = [&](const Event& e) {
        StepInfo info;
        if (!apply_event(net, c, e, Semantics::unordered, &info))
            throw std::logic_error("Petri witness does not replay: " + info.error);
        w.push_back(e);
    };
    size_t i = 0;
    while (i < firing.size() && !c.aborted) {
        auto& t = pn.transitions[firing[i]];
        if (!enabled(t, mk)) throw std::logic_error("firing sequence not enabled at " + t.name);
        if (t.host >= 0) {
            mk = fire(t, mk);
            emit({Event::Kind::send, t.host, 0, t.pkt, 0});
            ++i;
            continue;
        }
        if (!t.first) throw std::logic_error("firing sequence enters a command mid-way at " + t.name);
        int m = t.mbox, pkt = t.pkt, port = t.port;
        std::vector<Event> later;
        std::set<int> produced;
        bool aborted = false, finished = false;
        for (; i < firing.size() && !finished; ++i) {
            auto& u = pn.transitions[firing[i]];
            if (!enabled(u, mk)) throw std::logic_error("firing sequence not enabled at " + u.name);
            mk = fire(u, mk);
            if (u.host >= 0) {
                later.push_back({Event::Kind::send, u.host, 0, u.pkt, 0});
                continue;
            }
            for (auto& [p, n] : u.out)
                if (pn.places[p].role == PlaceRole::channel) produced.insert(static_cast<int>(p));
            aborted |= u.abort;
            finished = u.terminal;
        }
        auto outs = step(net, m, c.states[m], pkt, port);
        int pick = -1;
        for (size_t k = 0; k < outs.size() && pick < 0; ++k) {
            auto& o = outs[k];
            if (o.abort != aborted) continue;
            if (aborted) {
                pick = static_cast<int>(k);
                break;
            }
            bool ok = true;
            for (auto& pl : pn.places)
                if (pl.role == PlaceRole::active && pl.mbox == m) {
                    int idx = static_cast<int>(&pl - pn.places.data());
                    if (o.next.get(pl.element) != (count(mk, idx) > 0)) ok = false;
                }
            std::set<int> net_out;
            auto& inst = net.mboxes[m].inst;
            for (auto& [op, oport] : o.outputs) {
                int ch = net.mbox_out[m][inst.port_pos(oport)];
                if (net.channels[ch].to.host) continue;
                for (auto& pl : pn.places)
                    if (pl.role == PlaceRole::channel && pl.channel == ch && pl.pkt == op)
                        net_out.insert(static_cast<int>(&pl - pn.places.data()));
            }
            if (ok && net_out == produced) pick = static_cast<int>(k);
        }
        if (pick < 0) throw std::logic_error("no network outcome matches a Petri episode of " + net.mboxes[m].name);
        emit({Event::Kind::proc, m, port, pkt, pick});
        for (auto& e : later)
            if (!c.aborted) emit(e);
    }
    return w;
}

std::function<bool(const Marking&)> local_state_filter(const Network& net, const Encoding& enc, size_t cap) {
    auto& places = enc.net.places;
    const size_t M = net.mboxes.size();
    // touched bits per middlebox and the place -> (mbox, slot, value) map
    std::vector<std::vector<int>> touched(M);
    std::vector<std::vector<std::pair<int, int>>> inputs(M);  // (port, pkt)
    for (auto& p : places) {
        if (p.role == PlaceRole::active) touched[p.mbox].push_back(p.element);
        if (p.role == PlaceRole::channel) inputs[p.mbox].emplace_back(p.port, p.pkt);
    }
    std::vector<std::vector<Bits>> reach(M);
    std::vector<char> usable(M, 0);
    for (size_t m = 0; m < M; ++m) {
        if (touched[m].empty()) continue;
        std::sort(touched[m].begin(), touched[m].end());
        auto& inst = net.mboxes[m].inst;
        std::set<Bits> seen{inst.init};
        std::deque<Bits> work{inst.init};
        bool overflow = false;
        while (!work.empty() && !overflow) {
            Bits s = std::move(work.front());
            work.pop_front();
            for (auto& [port, pkt] : inputs[m])
                for (auto& o : step(inst, net.pd, s, pkt, port))
                    if (!o.abort && seen.insert(o.next).second) {
                        work.push_back(o.next);
                        if (seen.size() > cap) overflow = true;
                    }
        }
        if (overflow) continue;
        std::set<Bits> proj;
        for (auto& s : seen) {
            Bits b(touched[m].size());
            for (size_t i = 0; i < touched[m].size(); ++i) b.set(i, s.get(touched[m][i]));
            proj.insert(b);
        }
        reach[m].assign(proj.begin(), proj.end());
        usable[m] = 1;
    }
    struct Slot {
        int mbox = -1, idx = -1;
        bool value = false;
    };
    std::vector<Slot> slot(places.size());
    for (size_t i = 0; i < places.size(); ++i) {
        auto& p = places[i];
        if ((p.role != PlaceRole::active && p.role != PlaceRole::inactive) || !usable[p.mbox]) continue;
        auto& t = touched[p.mbox];
        slot[i] = {p.mbox, static_cast<int>(std::lower_bound(t.begin(), t.end(), p.element) - t.begin()),
                   p.role == PlaceRole::active};
    }
    return [slot = std::move(slot), reach = std::move(reach), M](const Marking& mk) {
        std::vector<std::vector<std::pair<int, bool>>> req(M);
        for (auto& [p, c] : mk)
            if (slot[p].mbox >= 0) req[slot[p].mbox].emplace_back(slot[p].idx, slot[p].value);
        for (size_t m = 0; m < M; ++m) {
            if (req[m].empty()) continue;
            bool any = false;
            for (auto& s : reach[m]) {
                bool ok = true;
                for (auto& [i, v] : req[m])
                    if (s.get(i) != v) {
                        ok = false;
                        break;
                    }
                if (ok) {
                    any = true;
                    break;
                }
            }
            if (!any) return true;
        }
        return false;
    };
}

PetriReport petri_verify(const Network& net, const EncodeOptions& eo, const CoverOptions& co) {
    PetriReport rep;
    Encoding enc = encode(net, eo);
    EpisodeNet en = episode_net(enc);
    rep.places = enc.net.places.size();
    rep.transitions = enc.net.transitions.size();
    rep.episodes = enc.episodes.size();
    CoverOptions opt = co;
    if (!opt.infeasible) opt.infeasible = local_state_filter(net, enc);
    auto cr = coverable(en.net, en.net.init, en.net.target, opt);
    rep.verdict = cr.verdict;
    rep.basis = cr.basis;
    if (cr.verdict != CoverResult::Verdict::coverable) return rep;
    rep.firing = expand_firing(enc, en, cr.firing);
    Marking end;
    if (!replay(enc.net, enc.net.init, rep.firing, &end) || !covers(end, enc.net.target)) {
        rep.diagnostic = "firing sequence does not replay on the full net";
        return rep;
    }
    try {
        rep.witness = firing_to_witness(net, enc, rep.firing);
        auto chk = check_witness(net, rep.witness, Semantics::unordered);
        rep.witness_ok = chk.ok;
        rep.diagnostic = chk.diagnostic;
    } catch (const std::exception& e) {
        rep.diagnostic = e.what();
    }
    return rep;
}

std::string export_lola(const PetriNet& net) {
    std::ostringstream os;
    os << "PLACE\n";
    for (size_t i = 0; i < net.places.size(); ++i)
        os << "  " << net.places[i].name << (i + 1 < net.places.size() ? ",\n" : "\n");
    os << ";\n\nMARKING\n";
    for (size_t i = 0; i < net.init.size(); ++i)
        os << "  " << net.places[net.init[i].first].name << " : " << net.init[i].second << (i + 1 < net.init.size() ? ",\n" : "\n");
    os << ";\n";
    auto list = [&](const Marking& m) {
        for (size_t i = 0; i < m.size(); ++i)
            os << (i ? ", " : " ") << net.places[m[i].first].name << " : " << m[i].second;
    };
    for (auto& t : net.transitions) {
        os << "\nTRANSITION " << t.name << "\n  CONSUME";
        list(t.in);
        os << ";\n  PRODUCE";
        list(t.out);
        os << ";\n";
    }
    return os.str();
}

std::string export_lola_formula(const PetriNet& net) {
    return "EF (" + (net.abort >= 0 ? net.places[net.abort].name : std::string("abort")) + " >= 1)\n";
}

std::string export_dot(const PetriNet& net) {
    std::ostringstream os;
    os << "digraph petri {\n  rankdir=LR;\n";
    for (size_t i = 0; i < net.places.size(); ++i) {
        uint32_t tok = count(net.init, static_cast<uint32_t>(i));
        os << "  p" << i << " [shape=circle,label=\"" << net.places[i].name << (tok ? "\\n" + std::to_string(tok) : "")
           << "\"];\n";
    }
    for (size_t t = 0; t < net.transitions.size(); ++t) {
        auto& tr = net.transitions[t];
        os << "  t" << t << " [shape=box,label=\"" << tr.name << "\\n" << tr.label << "\"];\n";
        for (auto& [p, c] : tr.in) os << "  p" << p << " -> t" << t << (c > 1 ? " [label=" + std::to_string(c) + "]" : "") << ";\n";
        for (auto& [p, c] : tr.out) os << "  t" << t << " -> p" << p << (c > 1 ? " [label=" + std::to_string(c) + "]" : "") << ";\n";
    }
    os << "}\n";
    return os.str();
}

}  // namespace mbv
