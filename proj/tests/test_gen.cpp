#include <doctest.h>

#include <deque>
#include <filesystem>
#include <map>
#include <set>

#include "mbv/fixpoint.hpp"
#include "mbv/petri.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mbv;

namespace {

// Forward enumeration of VASS paths up to `len` edges.
bool vass_path(const Vass& v, int len) {
    std::set<std::pair<int, std::vector<int>>> frontier{{v.initial, std::vector<int>(v.dims, 0)}};
    for (int step = 0; step <= len; ++step) {
        std::set<std::pair<int, std::vector<int>>> next;
        for (auto& [q, c] : frontier) {
            for (int r : v.reach)
                if (q == r) return true;
            for (auto& e : v.edges) {
                if (e.from != q) continue;
                auto d = c;
                bool ok = true;
                for (int i = 0; i < v.dims; ++i) ok &= (d[i] += e.w[i]) >= 0;
                if (ok) next.insert({e.to, d});
            }
        }
        frontier = std::move(next);
    }
    return false;
}

bool network_unsafe(const Vass& v) {
    auto net = compile_isolation(vass_to_network(v));
    auto r = petri_verify(net);
    REQUIRE(r.verdict != CoverResult::Verdict::resource_limit);
    if (r.verdict == CoverResult::Verdict::coverable) CHECK(r.witness_ok);
    return r.verdict == CoverResult::Verdict::coverable;
}

Vass line(std::vector<std::vector<int>> weights, std::vector<int> reach) {
    Vass v;
    v.vertices = static_cast<int>(weights.size()) + 1;
    v.dims = static_cast<int>(weights.empty() ? 1 : weights[0].size());
    for (int i = 0; i < static_cast<int>(weights.size()); ++i) v.edges.push_back({i, i + 1, weights[i]});
    v.reach = std::move(reach);
    return v;
}

}  // namespace

TEST_CASE("corpus loads and classifies as documented") {
    std::map<std::string, MiddleboxClass> golden{
        {"acl", MiddleboxClass::Stateless},          {"firewall", MiddleboxClass::Increasing},
        {"learning", MiddleboxClass::Progressing},   {"cache", MiddleboxClass::Progressing},
        {"load_balancer", MiddleboxClass::Arbitrary}, {"rate_limiter", MiddleboxClass::Arbitrary},
        {"learning_firewall", MiddleboxClass::Increasing}, {"auth_k1", MiddleboxClass::Progressing},
        {"auth_k2", MiddleboxClass::Progressing},
    };
    REQUIRE(corpus_names().size() == 8);
    std::set<std::string> seen;
    for (auto& name : corpus_names()) {
        auto net = corpus(name);
        // lb-ratelimiter carries its own aborting monitor instead of a property.
        CHECK(net.isolation.empty() == (name == "lb-ratelimiter"));
        auto c = compile_isolation(net);
        MiddleboxClass worst = MiddleboxClass::Stateless;
        for (auto& m : c.mboxes) {
            auto cls = classify(*m.prog);
            worst = std::max(worst, cls);
            if (m.checker) CHECK(cls == MiddleboxClass::Stateless);
            auto it = golden.find(m.program);
            if (it != golden.end()) {
                CAPTURE(m.program);
                CHECK(cls == it->second);
                seen.insert(m.program);
            }
        }
        // Every engine the class admits accepts the network.
        if (worst <= MiddleboxClass::Increasing) CHECK_NOTHROW(verify_increasing(c));
        else CHECK_THROWS_AS(verify_increasing(c), engine_error);
        CHECK_NOTHROW(encode(c));
    }
    CHECK(seen.size() == golden.size());
    CHECK_THROWS_AS(corpus("nope"), input_error);

    auto om = corpus("order-matters");
    CHECK(om.hosts.size() == 2);
    CHECK(om.mboxes.size() == 2);
    CHECK(om.isolation.size() == 2);
}

TEST_CASE("vass examples") {
    Vass at_start;
    at_start.vertices = 1;
    at_start.reach = {0};
    CHECK(network_unsafe(at_start));

    auto up_down = line({{1}, {-1}}, {2});
    CHECK(oracle::vass_reaches(up_down));
    CHECK(network_unsafe(up_down));
    auto net = compile_isolation(vass_to_network(up_down));
    auto r = explore(net, Semantics::unordered, 8);
    REQUIRE(r.verdict == ExploreResult::Verdict::violation);
    CHECK(r.witness.size() == 6);

    auto down = line({{-1}}, {1});
    CHECK_FALSE(oracle::vass_reaches(down));
    CHECK_FALSE(network_unsafe(down));
}

TEST_CASE("simple vass check") {
    std::string why;
    CHECK(is_simple(line({{1, 0}, {0, -1}}, {2}), &why));
    CHECK_FALSE(is_simple(line({{1, 1}}, {1}), &why));
    CHECK_FALSE(why.empty());
    CHECK_FALSE(is_simple(line({{2}}, {1})));
    CHECK_FALSE(is_simple(line({{0}}, {1})));
    Vass dup = line({{1}}, {1});
    dup.edges.push_back({0, 0, {1}});
    CHECK_FALSE(is_simple(dup));
    CHECK_THROWS_AS(vass_to_network(dup), input_error);
    for (uint64_t seed = 0; seed < 200; ++seed) CHECK(is_simple(random_vass(seed)));
}

TEST_CASE("vass reduction agrees with the vass") {
    int yes = 0, no = 0;
    for (uint64_t seed = 0; seed < 150; ++seed) {
        auto v = random_vass(seed, 4, 2);
        bool truth = oracle::vass_reaches(v);
        if (vass_path(v, 8)) CHECK(truth);
        CAPTURE(seed);
        CHECK(network_unsafe(v) == truth);
        (truth ? yes : no)++;
    }
    CHECK(yes > 10);
    CHECK(no > 10);
}

TEST_CASE("random networks") {
    auto a = random_network({}, 1), b = random_network({}, 1);
    CHECK(print_topology(a.net) == print_topology(b.net));
    CHECK(a.programs == b.programs);
    CHECK(print_topology(a.net) != print_topology(random_network({}, 2).net));

    std::map<MiddleboxClass, int> classes;
    for (uint64_t seed = 1; seed <= 100; ++seed) {
        auto rn = random_network({}, seed);
        CHECK(rn.net.hosts.size() <= 3);
        CHECK(rn.net.mboxes.size() <= 3);
        CHECK(rn.net.tags.size() <= 2);
        REQUIRE(rn.classes.size() == rn.net.mboxes.size());
        for (size_t m = 0; m < rn.classes.size(); ++m) {
            CHECK(classify(*rn.net.mboxes[m].prog) == rn.classes[m]);
            ++classes[rn.classes[m]];
        }
        CHECK_NOTHROW(compile_isolation(rn.net));
    }
    for (auto c : {MiddleboxClass::Stateless, MiddleboxClass::Increasing, MiddleboxClass::Progressing,
                   MiddleboxClass::Arbitrary})
        CHECK(classes[c] > 0);

    RandomParams tame;
    tame.remove = tame.negation = tame.overlap = false;
    for (uint64_t seed = 1; seed <= 200; ++seed)
        for (auto c : random_network(tame, seed).classes) CHECK(c <= MiddleboxClass::Increasing);
}

TEST_CASE("written networks load back") {
    auto dir = std::filesystem::temp_directory_path() / "mbv_test_gen";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        auto rn = random_network({}, seed);
        auto name = "net" + std::to_string(seed);
        write_network(rn.net, dir.string(), name);
        auto back = load_topology_file((dir / (name + ".topo")).string());
        CHECK(print_topology(back) == print_topology(rn.net));
        for (size_t m = 0; m < back.mboxes.size(); ++m) CHECK(*back.mboxes[m].prog == *rn.net.mboxes[m].prog);
    }
    auto v = vass_to_network(line({{1}, {-1}}, {2}));
    write_network(v, dir.string(), "vass");
    auto back = load_topology_file((dir / "vass.topo").string());
    CHECK(print_topology(back) == print_topology(v));
    std::filesystem::remove_all(dir);
}
