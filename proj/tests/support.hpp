#pragma once

#include <map>
#include <memory>
#include <string>

#include "mbv/explore.hpp"
#include "mbv/gen.hpp"
#include "mbv/interp.hpp"
#include "mbv/mbdl.hpp"
#include "mbv/network.hpp"

namespace fixture {

// Resolver over in-memory program sources.
inline mbv::ProgramResolver programs(const std::map<std::string, std::string>& src) {
    auto cache = std::make_shared<std::map<std::string, std::shared_ptr<const mbv::MiddleboxProgram>>>();
    for (auto& [name, text] : src) (*cache)[name] = std::make_shared<const mbv::MiddleboxProgram>(mbv::parse_program(text));
    return [cache](const std::string& n) -> std::shared_ptr<const mbv::MiddleboxProgram> {
        auto it = cache->find(n);
        return it == cache->end() ? nullptr : it->second;
    };
}

inline mbv::Network topo(const std::string& text, const std::map<std::string, std::string>& src) {
    return mbv::parse_topology(text, programs(src));
}

inline mbv::Network compiled(const std::string& corpus_name) { return mbv::compile_isolation(mbv::corpus(corpus_name)); }

inline const char* kFirewall =
    "middlebox firewall\n"
    "ports 1, 2\n"
    "rel trusted(address)\n"
    "input(src, dst, tag, prt):\n"
    "  when prt = 1 => trusted.insert(dst); output {(src, dst, tag, 2)}\n"
    "  when prt = 2 and src in trusted => output {(src, dst, tag, 1)}\n";

inline const char* kBoom =
    "middlebox boom\n"
    "ports 1\n"
    "input(src, dst, tag, prt):\n"
    "  when prt = 1 => abort\n";

inline const char* kWire =
    "middlebox wire\n"
    "ports 1, 2\n"
    "input(src, dst, tag, prt):\n"
    "  when prt = 1 => output {(src, dst, tag, 2)}\n"
    "  when prt = 2 => output {(src, dst, tag, 1)}\n";

// One host wired to a middlebox that aborts on every packet.
inline mbv::Network always_abort() {
    return topo("tags {t}\nhost A sends {(A, A, t)}\nmbox b : boom\nlink A -- b.1\n", {{"boom", kBoom}});
}

// Firewall between A (inside) and B (outside); B may not reach A.
inline mbv::Network firewall_pair(bool a_sends) {
    std::string t = "tags {t}\n";
    t += a_sends ? "host A sends {(A, B, *)}\n" : "host A sends {}\n";
    t += "host B sends {(B, A, *)}\nmbox f : firewall\nlink A -- f.1\nlink B -- f.2\n"
         "property isolation {\n  forbidden (B, A, *) at A\n}\n";
    return topo(t, {{"firewall", kFirewall}});
}

// Calls fn on every event enabled in c, found by trying every send and every
// (middlebox, port, pending packet, outcome) combination.
template <class Fn>
void for_each_event(const mbv::Network& net, const mbv::Config& c, mbv::Semantics sem, Fn&& fn) {
    using namespace mbv;
    auto attempt = [&](const Event& e) {
        Config n = c;
        if (apply_event(net, n, e, sem)) fn(e, n);
    };
    for (size_t h = 0; h < net.hosts.size(); ++h)
        for (int p : net.hosts[h].sends) attempt({Event::Kind::send, static_cast<int>(h), 0, p, 0});
    for (size_t m = 0; m < net.mboxes.size(); ++m) {
        auto& inst = net.mboxes[m].inst;
        for (size_t i = 0; i < inst.ports.size(); ++i) {
            int ch = net.mbox_in[m][i];
            if (ch < 0 || c.chans[ch].empty()) continue;
            for (size_t p = 0; p < net.pd.size(); ++p) {
                bool present = false;
                for (int q : c.chans[ch]) present |= q == static_cast<int>(p);
                if (!present) continue;
                auto outs = step(net, static_cast<int>(m), c.states[m], static_cast<int>(p), inst.ports[i]);
                for (size_t b = 0; b < outs.size(); ++b)
                    attempt({Event::Kind::proc, static_cast<int>(m), inst.ports[i], static_cast<int>(p),
                             static_cast<int>(b)});
            }
        }
    }
}

// Summed size of the declared relation domains, computed from the program text.
inline size_t declared_relation_size(const mbv::Network& net, const mbv::MboxNode& m) {
    size_t addresses = net.hosts.size(), total = 0;
    if (net.mbox_addresses)
        for (auto& x : net.mboxes) addresses += !x.checker;
    for (auto& r : m.prog->rels) {
        size_t n = 1;
        for (auto& d : r.columns) {
            switch (d.kind) {
                case mbv::Domain::Kind::address: n *= addresses; break;
                case mbv::Domain::Kind::tag: n *= net.tags.size(); break;
                case mbv::Domain::Kind::port: n *= m.prog->ports.size(); break;
                case mbv::Domain::Kind::named: n *= m.prog->find_const(d.name)->size(); break;
            }
        }
        total += n;
    }
    return total;
}

}  // namespace fixture
