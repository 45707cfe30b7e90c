// One line per acceptance criterion; exits nonzero if any blocking one fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "mbv/cli.hpp"
#include "mbv/fixpoint.hpp"
#include "mbv/progressing.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mbv;
namespace fs = std::filesystem;

namespace {

int failures = 0;

struct Check {
    bool ok = true;
    std::string note;
    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            if (!note.empty()) note += "; ";
            note += what;
        }
    }
};

void criterion(int n, const std::function<void(Check&)>& body, double limit_s = 0, bool blocking = true) {
    Check c;
    auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0) c.expect(s < limit_s, "over the time limit");
    char t[32];
    std::snprintf(t, sizeof t, "%.2fs", s);
    std::cout << "criterion " << n << ": " << (c.ok ? "PASS" : blocking ? "FAIL" : "NOTE") << " [" << t << "]"
              << (c.note.empty() ? "" : " " + c.note) << std::endl;
    if (!c.ok && blocking) ++failures;
}

std::string topo(const std::string& name) { return (fs::path(corpus_dir()) / (name + ".topo")).string(); }

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "mbv");
    std::vector<const char*> argv;
    for (auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

bool progressing_net(const Network& net) {
    for (auto& m : net.mboxes)
        if (classify(*m.prog) > MiddleboxClass::Progressing) return false;
    return true;
}

bool increasing_net(const Network& net) {
    for (auto& m : net.mboxes)
        if (classify(*m.prog) > MiddleboxClass::Increasing) return false;
    return true;
}

}  // namespace

int main() {
    auto tmp = fs::temp_directory_path() / "mbv_acceptance";
    fs::create_directories(tmp);

    criterion(1, [&](Check& c) {
        auto wf = (tmp / "order-matters.witness").string();
        c.expect(cli({"verify", topo("order-matters"), "--engine", "petri", "-w", wf}) == exit_violation,
                 "petri did not report Violation");
        c.expect(cli({"check-witness", topo("order-matters"), wf}) == exit_safe, "witness does not replay");
        auto net = fixture::compiled("order-matters");
        c.expect(explore(net, Semantics::fifo, 20).verdict == ExploreResult::Verdict::no_violation,
                 "fifo search to depth 20 found a violation");
    }, 10);

    criterion(2, [&](Check& c) {
        auto net = fixture::compiled("fw-proxy");
        auto r = find_witness(net);
        c.expect(r.verdict == ProgressingResult::Verdict::violation, "no violation found");
        if (r.verdict != ProgressingResult::Verdict::violation) return;
        c.expect(verify_witness(net, r.witness, Semantics::unordered), "witness does not replay");
        auto last = net.pd.packet(r.witness.back().pkt);
        c.expect(net.mboxes[r.witness.back().node].checker && net.sym(last.src) == "S1" && net.sym(last.dst) == "A",
                 "violation is not S1 data reaching A");
        auto p = petri_verify(net);
        c.expect(p.verdict == CoverResult::Verdict::coverable && p.witness_ok, "petri disagrees");
        c.note = c.ok ? std::to_string(r.witness.size()) + "-event witness" : c.note;
    }, 60);

    criterion(3, [&](Check& c) {
        auto wf = (tmp / "lb-ratelimiter.witness").string();
        c.expect(cli({"verify", topo("lb-ratelimiter"), "-w", wf}) == exit_violation, "not reported Violated");
        c.expect(cli({"check-witness", topo("lb-ratelimiter"), wf}) == exit_safe, "witness does not replay");
    }, 60);

    criterion(4, [&](Check& c) {
        auto net = fixture::compiled("multi-tenant");
        c.expect(verify_increasing(net).safe, "fixpoint did not prove Safe");
        c.expect(petri_verify(net).verdict == CoverResult::Verdict::uncoverable, "petri did not report Uncoverable");
    }, 30);

    criterion(5, [&](Check& c) {
        std::vector<std::pair<std::string, MiddleboxClass>> golden{
            {"acl", MiddleboxClass::Stateless},          {"firewall", MiddleboxClass::Increasing},
            {"learning", MiddleboxClass::Progressing},   {"proxy", MiddleboxClass::Progressing},
            {"load_balancer", MiddleboxClass::Arbitrary}, {"rate_limiter", MiddleboxClass::Arbitrary},
        };
        for (auto& [name, cls] : golden) {
            std::ifstream f(fs::path(corpus_dir()) / (name + ".mbd"));
            std::stringstream text;
            text << f.rdbuf();
            auto p = parse_program(text.str());
            c.expect(classify(p) == cls, name + " is " + class_name(classify(p)));
        }
        for (auto& name : corpus_names())
            for (auto& m : fixture::compiled(name).mboxes)
                if (m.checker) c.expect(classify(*m.prog) == MiddleboxClass::Stateless, m.name + " not Stateless");
    });

    criterion(6, [&](Check& c) {
        int conclusive = 0, increasing = 0, seeds = 0;
        for (uint64_t seed = 1; seed <= 200; ++seed, ++seeds) {
            auto net = compile_isolation(random_network({}, seed).net);
            auto pr = petri_verify(net);
            if (pr.verdict == CoverResult::Verdict::resource_limit) {
                c.expect(false, "petri gave up on seed " + std::to_string(seed));
                continue;
            }
            bool cov = pr.verdict == CoverResult::Verdict::coverable;
            ExploreOptions eo;
            eo.max_configs = 1'000'000;
            auto er = explore(net, Semantics::unordered, 12, eo);
            if (er.verdict == ExploreResult::Verdict::violation || er.stats.exhausted) {
                ++conclusive;
                c.expect(cov == (er.verdict == ExploreResult::Verdict::violation),
                         "explore and petri disagree on seed " + std::to_string(seed));
            }
        }
        for (uint64_t seed = 1; seed <= 120; ++seed) {
            RandomParams rp;
            rp.remove = rp.negation = rp.overlap = false;
            auto net = compile_isolation(random_network(rp, seed).net);
            if (!increasing_net(net)) continue;
            ++increasing;
            bool cov = petri_verify(net).verdict == CoverResult::Verdict::coverable;
            c.expect(verify_increasing(net).safe == !cov, "fixpoint and petri disagree on seed " + std::to_string(seed));
        }
        c.expect(conclusive >= 50, "only " + std::to_string(conclusive) + " conclusive explorations");
        if (c.ok)
            c.note = std::to_string(seeds) + " networks, " + std::to_string(conclusive) + " conclusive, " +
                     std::to_string(increasing) + " increasing";
    });

    criterion(7, [&](Check& c) {
        size_t total = 0;
        for (auto& name : corpus_names()) {
            auto enc = encode(fixture::compiled(name));
            auto pairs = oracle::element_places(enc.net);
            size_t bad = 0, seen = 0;
            Marking never{{static_cast<uint32_t>(enc.net.abort), 1u << 30}};
            forward_explore(enc.net, enc.net.init, never, 1 << 30, 10000, [&](const Marking& m) {
                ++seen;
                for (auto& [key, pl] : pairs) bad += count(m, pl.first) + count(m, pl.second) != 1;
                bad += count(m, enc.net.global) > 1;
            });
            total += seen;
            c.expect(bad == 0, name + ": " + std::to_string(bad) + " violations");
        }
        if (c.ok) c.note = std::to_string(total) + " markings checked";
    });

    criterion(8, [&](Check& c) {
        std::vector<Network> nets;
        for (auto& name : corpus_names()) {
            auto net = fixture::compiled(name);
            if (increasing_net(net)) nets.push_back(std::move(net));
        }
        for (uint64_t seed = 1; seed <= 100; ++seed) {
            RandomParams rp;
            rp.remove = rp.negation = rp.overlap = false;
            nets.push_back(compile_isolation(random_network(rp, seed).net));
        }
        int worst = 0;
        for (auto& net : nets) {
            size_t bound = net.pd.size() * net.port_count();
            for (auto& m : net.mboxes) bound += fixture::declared_relation_size(net, m);
            FixpointOptions fo;
            fo.stop_at_violation = false;
            auto r = verify_increasing(net, fo);
            c.expect(static_cast<size_t>(r.rounds) <= bound + 1, "rounds over the bound");
            worst = std::max(worst, r.rounds);
        }
        if (c.ok) c.note = std::to_string(nets.size()) + " instances, at most " + std::to_string(worst) + " rounds";
    });

    criterion(9, [&](Check& c) {
        std::vector<Network> nets;
        for (auto& name : corpus_names()) nets.push_back(fixture::compiled(name));
        for (uint64_t seed = 1; seed <= 60; ++seed) {
            RandomParams rp;
            rp.remove = false;
            nets.push_back(compile_isolation(random_network(rp, seed).net));
        }
        int checked = 0;
        for (auto& net : nets) {
            if (!progressing_net(net)) continue;
            auto [k, value] = oracle::expected_bound(net);
            auto b = witness_bound(net);
            c.expect(b.k == k && b.value == value, "bound mismatch");
            ++checked;
        }
        if (c.ok) c.note = std::to_string(checked) + " networks";
    });

    criterion(10, [&](Check& c) {
        int yes = 0, no = 0;
        for (uint64_t seed = 0; seed < 200; ++seed) {
            auto v = random_vass(seed, 4, 2);
            bool truth = oracle::vass_reaches(v);
            auto pr = petri_verify(compile_isolation(vass_to_network(v)));
            c.expect(pr.verdict != CoverResult::Verdict::resource_limit, "petri gave up on seed " + std::to_string(seed));
            c.expect((pr.verdict == CoverResult::Verdict::coverable) == truth,
                     "disagreement on seed " + std::to_string(seed));
            (truth ? yes : no)++;
        }
        if (c.ok) c.note = std::to_string(yes) + " reachable, " + std::to_string(no) + " unreachable";
    });

    criterion(11, [&](Check& c) {
        std::string note;
        for (auto [name, places, transitions] :
             {std::tuple{"lb-ratelimiter", 243, 663}, std::tuple{"fw-proxy", 530, 4447}}) {
            auto enc = encode(fixture::compiled(name));
            double rp = double(enc.net.places.size()) / places, rt = double(enc.net.transitions.size()) / transitions;
            char buf[160];
            std::snprintf(buf, sizeof buf, "%s %zu/%zu vs %d/%d (x%.2f, x%.2f)", name, enc.net.places.size(),
                          enc.net.transitions.size(), places, transitions, rp, rt);
            note += (note.empty() ? "" : "; ") + std::string(buf);
            c.expect(rp <= 10 && rp >= 0.1 && rt <= 10 && rt >= 0.1, "outside 10x");
        }
        c.note = note + (c.ok ? "" : " " + c.note);
    }, 0, false);

    fs::remove_all(tmp);
    return failures == 0 ? 0 : 1;
}
