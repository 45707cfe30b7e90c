#include <algorithm>
#include <functional>
#include <sstream>

#include "mbv/fixpoint.hpp"
#include "mbv/interp.hpp"
#include "mbv/mbdl.hpp"

namespace mbv {

FixpointResult verify_increasing(const Network& net, const FixpointOptions& opt) {
    for (auto& m : net.mboxes) {
        auto c = classify(*m.prog);
        if (c > MiddleboxClass::Increasing)
            throw engine_error("fixpoint engine needs stateless or increasing middleboxes; " + m.name + " is " +
                               class_name(c));
    }
    const size_t M = net.mboxes.size(), P = net.pd.size();
    FixpointResult r;
    r.bound = P * net.port_count();
    for (auto& m : net.mboxes) r.bound += m.inst.bits;

    r.state.resize(M);
    r.packets.resize(M);
    r.state_why.resize(M);
    r.packet_why.resize(M);
    std::vector<std::vector<int>> fresh(M);
    std::vector<char> grew(M, 1);
    for (size_t m = 0; m < M; ++m) {
        auto& inst = net.mboxes[m].inst;
        r.state[m] = inst.init;
        r.state_why[m].resize(inst.bits);
        r.packets[m] = Bits(P * inst.ports.size());
        r.packet_why[m].resize(P * inst.ports.size());
    }
    for (size_t h = 0; h < net.hosts.size(); ++h) {
        auto& to = net.channels[net.host_out[h]].to;
        auto& inst = net.mboxes[to.node].inst;
        int pos = inst.port_pos(to.port);
        for (int pkt : net.hosts[h].sends) {
            size_t idx = pkt * inst.ports.size() + pos;
            r.packets[to.node].set(idx);
            r.packet_why[to.node][idx].host = static_cast<int>(h);
        }
    }

    std::vector<size_t> order(M);
    for (size_t i = 0; i < M; ++i) order[i] = opt.reverse_order ? M - 1 - i : i;

    for (;;) {
        ++r.rounds;
        size_t before = r.additions;
        for (size_t m : order) {
            auto& inst = net.mboxes[m].inst;
            const size_t np = inst.ports.size();
            std::vector<int> items;
            if (grew[m]) {
                for (size_t i = 0; i < r.packets[m].n; ++i)
                    if (r.packets[m].get(i)) items.push_back(static_cast<int>(i));
            } else {
                items = std::move(fresh[m]);
                std::sort(items.begin(), items.end());
            }
            grew[m] = 0;
            fresh[m].clear();
            for (int idx : items) {
                int pkt = idx / static_cast<int>(np), pos = idx % static_cast<int>(np);
                Bits pre = r.state[m];
                auto outs = step(inst, net.pd, pre, pkt, inst.ports[pos]);
                for (auto& o : outs) {
                    std::vector<uint32_t> reads;
                    for (auto b : o.reads)
                        if (pre.get(b)) reads.push_back(b);
                    if (o.abort) {
                        if (r.safe) {
                            r.safe = false;
                            r.mbox = static_cast<int>(m);
                            r.pkt = pkt;
                            r.port = inst.ports[pos];
                            r.abort_reason = {static_cast<int>(m), idx, -1, reads};
                        }
                        if (opt.stop_at_violation) return r;
                        continue;
                    }
                    for (size_t b = 0; b < inst.bits; ++b) {
                        if (!o.next.get(b) || r.state[m].get(b)) continue;
                        r.state[m].set(b);
                        r.state_why[m][b] = {static_cast<int>(m), idx, -1, reads};
                        grew[m] = 1;
                        ++r.additions;
                    }
                    for (auto& [opkt, oport] : o.outputs) {
                        auto& to = net.channels[net.mbox_out[m][inst.port_pos(oport)]].to;
                        if (to.host) continue;
                        auto& tinst = net.mboxes[to.node].inst;
                        size_t tidx = opkt * tinst.ports.size() + tinst.port_pos(to.port);
                        if (r.packets[to.node].get(tidx)) continue;
                        r.packets[to.node].set(tidx);
                        r.packet_why[to.node][tidx] = {static_cast<int>(m), idx, -1, reads};
                        fresh[to.node].push_back(static_cast<int>(tidx));
                        ++r.additions;
                    }
                }
            }
        }
        if (opt.on_round) opt.on_round(r);
        if (r.additions == before) break;
    }
    return r;
}

namespace {

// Rebuilds a run from derivations. Every derivation only depends on entries
// derived strictly earlier, and increasing middleboxes keep taking the same
// branch once the bits it read are present, so each entry can be replayed on
// demand. Packets are consumed when processed and simply re-derived.
struct Rebuild {
    const Network& net;
    const FixpointResult& r;
    Config c;
    Witness w;
    bool done = false;

    void fire(const Event& e) {
        StepInfo info;
        if (!apply_event(net, c, e, Semantics::unordered, &info))
            throw std::logic_error("witness reconstruction failed: " + info.error);
        w.push_back(e);
        if (c.aborted) done = true;
    }

    void need_bit(int m, uint32_t b) {
        if (done || c.states[m].get(b)) return;
        auto& d = r.state_why[m][b];
        process(d.mbox, d.idx, d.reads, [&](const Outcome& o) { return o.next.get(b); });
    }

    // Puts PacketData entry idx of m into its ingress channel.
    void deliver(int m, int idx) {
        if (done) return;
        auto& inst = net.mboxes[m].inst;
        int np = static_cast<int>(inst.ports.size());
        int pkt = idx / np, pos = idx % np;
        auto& d = r.packet_why[m][idx];
        if (d.mbox < 0) {
            fire({Event::Kind::send, d.host, 0, pkt, 0});
            return;
        }
        int port = net.channels[net.mbox_in[m][pos]].from.port;
        process(d.mbox, d.idx, d.reads, [&](const Outcome& o) {
            return std::find(o.outputs.begin(), o.outputs.end(), std::pair<int, int>{pkt, port}) != o.outputs.end();
        });
    }

    void process(int m, int idx, const std::vector<uint32_t>& reads, const std::function<bool(const Outcome&)>& want) {
        for (auto b : reads) need_bit(m, b);
        deliver(m, idx);
        if (done) return;
        auto& inst = net.mboxes[m].inst;
        int np = static_cast<int>(inst.ports.size());
        int pkt = idx / np, pos = idx % np;
        auto outs = step(inst, net.pd, c.states[m], pkt, inst.ports[pos]);
        int pick = -1;
        for (size_t i = 0; i < outs.size() && pick < 0; ++i)
            if (outs[i].abort) pick = static_cast<int>(i);  // an earlier abort ends the run just as well
        for (size_t i = 0; i < outs.size() && pick < 0; ++i)
            if (want(outs[i])) pick = static_cast<int>(i);
        if (pick < 0) throw std::logic_error("witness reconstruction: no matching outcome");
        fire({Event::Kind::proc, m, inst.ports[pos], pkt, pick});
    }
};

}  // namespace

Witness extract_witness(const Network& net, const FixpointResult& r) {
    if (r.safe) return {};
    Rebuild rb{net, r, initial_config(net), {}};
    rb.process(r.mbox, r.abort_reason.idx, r.abort_reason.reads, [](const Outcome& o) { return o.abort; });
    return rb.w;
}

std::string tables_text(const Network& net, const FixpointResult& r) {
    std::vector<std::string> lines;
    for (size_t m = 0; m < net.mboxes.size(); ++m) {
        auto& mb = net.mboxes[m];
        for (auto& [rel, tuples] : describe_state(net, static_cast<int>(m), r.state[m]))
            for (auto& t : tuples) {
                std::string s = "state " + mb.name + " " + rel + "(";
                for (size_t i = 0; i < t.size(); ++i) s += (i ? "," : "") + t[i];
                lines.push_back(s + ")");
            }
        size_t np = mb.inst.ports.size();
        for (size_t i = 0; i < r.packets[m].n; ++i)
            if (r.packets[m].get(i))
                lines.push_back("packet " + mb.name + "." + std::to_string(mb.inst.ports[i % np]) + " " +
                                net.packet_text(static_cast<int>(i / np)));
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (auto& l : lines) out += l + "\n";
    return out;
}

}  // namespace mbv
