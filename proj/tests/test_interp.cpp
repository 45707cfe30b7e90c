#include <doctest.h>

#include <set>

#include "mbv/interp.hpp"
#include "support.hpp"

using namespace mbv;

namespace {

std::vector<std::pair<std::string, int>> named(const Network& net, const Outcome& o) {
    std::vector<std::pair<std::string, int>> v;
    for (auto& [p, port] : o.outputs) v.push_back({net.packet_text(p), port});
    return v;
}

int pkt(const Network& net, const char* s, const char* d, const char* t) {
    return net.pd.index({net.u.find(s), net.u.find(d), net.u.find(t)});
}

Bits with(const Network& net, int m, const std::string& rel, const std::vector<std::string>& tuple) {
    auto& inst = net.mboxes[m].inst;
    Bits b = inst.init;
    for (auto& r : inst.rels)
        if (r.name == rel) {
            std::vector<int> syms;
            for (auto& s : tuple) syms.push_back(net.u.find(s));
            b.set(r.offset + static_cast<size_t>(r.element(syms)));
        }
    return b;
}

const CGuard& top_guard(const Instance& inst, size_t i) { return inst.body.block.at(i).first; }

// States reachable by a middlebox on its own, fed every packet on every port.
std::vector<Bits> local_states(const Network& net, int m, size_t cap) {
    auto& inst = net.mboxes[m].inst;
    std::set<Bits> seen{inst.init};
    std::vector<Bits> todo{inst.init}, out;
    while (!todo.empty() && seen.size() < cap) {
        Bits s = todo.back();
        todo.pop_back();
        out.push_back(s);
        for (size_t p = 0; p < net.pd.size(); ++p)
            for (int port : inst.ports)
                for (auto& o : step(net, m, s, static_cast<int>(p), port))
                    if (!o.abort && seen.insert(o.next).second) todo.push_back(o.next);
    }
    return out;
}

}  // namespace

TEST_CASE("firewall steps") {
    auto net = fixture::firewall_pair(true);
    auto& inst = net.mboxes[0].inst;
    auto out = step(net, 0, inst.init, pkt(net, "A", "B", "t"), 1);
    REQUIRE(out.size() == 1);
    CHECK_FALSE(out[0].abort);
    CHECK(named(net, out[0]) == std::vector<std::pair<std::string, int>>{{"(A,B,t)", 2}});
    CHECK(describe_state(net, 0, out[0].next)["trusted"] == std::vector<std::vector<std::string>>{{"B"}});

    auto in = step(net, 0, inst.init, pkt(net, "B", "A", "t"), 2);
    REQUIRE(in.size() == 1);
    CHECK(in[0].outputs.empty());
    CHECK(in[0].next == inst.init);

    auto hole = step(net, 0, out[0].next, pkt(net, "B", "A", "t"), 2);
    REQUIRE(hole.size() == 1);
    CHECK(named(net, hole[0]) == std::vector<std::pair<std::string, int>>{{"(B,A,t)", 1}});
}

TEST_CASE("isolation checker aborts on forbidden input") {
    auto net = compile_isolation(fixture::firewall_pair(true));
    int m = static_cast<int>(net.mboxes.size()) - 1;
    auto out = step(net, m, net.mboxes[m].inst.init, pkt(net, "B", "A", "t"), 1);
    REQUIRE(out.size() == 1);
    CHECK(out[0].abort);
}

TEST_CASE("proxy answers from its cache or asks again") {
    auto net = fixture::topo("tags {t}\nhost A sends {}\nhost S1 sends {}\nmbox p : proxy\nlink A -- p.1\nlink p.2 -- S1\n",
                             {{"proxy", "middlebox proxy\nports 1, 2\nrel cache(address, address, tag)\n"
                                        "input(src, dst, tag, prt):\n"
                                        "  when prt = 1 and (dst, src, tag) in cache => output {(this, src, tag, 1)}\n"
                                        "  when prt = 1 => output {(this, dst, tag, 2)}\n"
                                        "  when prt = 2 => cache.insert(src, dst, tag); output {(this, dst, tag, 1)}\n"}});
    Bits s = with(net, 0, "cache", {"S1", "A", "t"});
    auto out = step(net, 0, s, pkt(net, "A", "S1", "t"), 1);
    REQUIRE(out.size() == 2);
    std::set<std::vector<std::pair<std::string, int>>> got;
    for (auto& o : out) {
        CHECK(o.next == s);
        got.insert(named(net, o));
    }
    CHECK(got == std::set<std::vector<std::pair<std::string, int>>>{{{"(p,A,t)", 1}}, {{"(p,S1,t)", 2}}});
}

TEST_CASE("guard evaluation") {
    auto fw = fixture::firewall_pair(true);
    auto& inst = fw.mboxes[0].inst;
    int A = fw.u.find("A"), B = fw.u.find("B"), t = fw.u.find("t");
    Binding on1{A, B, t, inst.port_sym[inst.port_pos(1)]};
    CHECK(eval_guard(top_guard(inst, 0), on1, inst, inst.init));
    Binding on2{B, A, t, inst.port_sym[inst.port_pos(2)]};
    CHECK_FALSE(eval_guard(top_guard(inst, 1), on2, inst, inst.init));
    CHECK(eval_guard(top_guard(inst, 1), on2, inst, with(fw, 0, "trusted", {"B"})));

    // The learning switch's "unknown destination" guard, checked against a truth table.
    auto ls = compile_isolation(corpus("learning3"));
    int m = ls.mbox_index("s");
    auto& li = ls.mboxes[m].inst;
    const CGuard& fwd = li.body.block[0].second.seq[1].block.back().first;
    int h1 = ls.u.find("h1"), h2 = ls.u.find("h2"), tg = ls.u.find("t");
    for (int port = 0; port <= 3; ++port) {
        Bits s = port ? with(ls, m, "connected", {"h1", std::to_string(port)}) : li.init;
        for (int dst : {h1, h2}) {
            bool expect = !(port && dst == h1);
            Binding b{h2, dst, tg, li.port_sym[0]};
            CHECK(eval_guard(fwd, b, li, s) == expect);
        }
    }
}

TEST_CASE("insert of a present element and remove of an absent one change nothing") {
    auto prog = "middlebox m\nports 1\nrel r(address)\ninput(src, dst, tag, prt):\n"
                "  when prt = 1 and src = A => r.insert(A)\n"
                "  when prt = 1 and src = B => r.remove(B)\n";
    auto net = fixture::topo("tags {t}\nhost A sends {}\nhost B sends {}\nmbox m : m\nlink A -- m.1\nlink B -- q.1\n"
                             "mbox q : m\n",
                             {{"m", prog}});
    Bits has_a = with(net, 0, "r", {"A"});
    auto o = step(net, 0, has_a, pkt(net, "A", "A", "t"), 1);
    REQUIRE(o.size() == 1);
    CHECK(o[0].next == has_a);
    auto r = step(net, 0, net.mboxes[0].inst.init, pkt(net, "B", "A", "t"), 1);
    REQUIRE(r.size() == 1);
    CHECK(r[0].next == net.mboxes[0].inst.init);
}

TEST_CASE("step properties over corpus and random middleboxes") {
    std::vector<Network> nets;
    for (auto& name : corpus_names()) nets.push_back(fixture::compiled(name));
    for (uint64_t seed = 1; seed <= 40; ++seed) nets.push_back(compile_isolation(random_network({}, seed).net));
    size_t checked = 0;
    for (auto& net : nets) {
        for (size_t mi = 0; mi < net.mboxes.size(); ++mi) {
            int m = static_cast<int>(mi);
            auto& inst = net.mboxes[m].inst;
            auto cls = classify(*inst.prog);
            // Overlapping guards make even a stateless box nondeterministic.
            bool exclusive = syntax_facts(*inst.prog, default_domains(*inst.prog)).exclusive;
            for (auto& s : local_states(net, m, 64)) {
                for (size_t p = 0; p < net.pd.size(); ++p)
                    for (int port : inst.ports) {
                        Bits before = s;
                        auto a = step(net, m, s, static_cast<int>(p), port);
                        auto b = step(net, m, s, static_cast<int>(p), port);
                        CHECK(s == before);
                        REQUIRE(a.size() == b.size());
                        REQUIRE_FALSE(a.empty());
                        for (size_t i = 0; i < a.size(); ++i) {
                            CHECK(a[i].abort == b[i].abort);
                            CHECK(a[i].outputs == b[i].outputs);
                            CHECK(a[i].next == b[i].next);
                        }
                        if (exclusive) CHECK(a.size() == 1);
                        if (cls == MiddleboxClass::Increasing) CHECK(exclusive);
                        for (auto& o : a) {
                            if (o.abort) continue;
                            if (cls == MiddleboxClass::Stateless) CHECK(o.next == s);
                            if (cls <= MiddleboxClass::Progressing) CHECK(s.subset_of(o.next));
                            for (auto& [q, pr] : o.outputs) {
                                CHECK(q >= 0);
                                CHECK(q < static_cast<int>(net.pd.size()));
                                CHECK(inst.port_pos(pr) >= 0);
                            }
                        }
                        ++checked;
                    }
            }
        }
    }
    CHECK(checked > 10000);
}
