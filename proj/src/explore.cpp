#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "lexer.hpp"
#include "mbv/explore.hpp"

namespace mbv {

int thread_count(int requested) {
    if (requested > 0) return requested;
    if (const char* e = std::getenv("MBV_THREADS")) {
        int n = std::atoi(e);
        if (n > 0) return n;
    }
    return 1;
}

DeliveryMonitor isolation_monitor(const Network& net) {
    DeliveryMonitor mon;
    auto match = [&](const std::string& pat, int sym) { return pat == "*" || net.u.find(pat) == sym; };
    std::map<int, std::set<int>> per_host;
    for (auto& iso : net.isolation) {
        int h = net.host_index(iso.host);
        if (h < 0) throw input_error("isolation target '" + iso.host + "' is not a host");
        auto& set = per_host[h];
        for (size_t pkt = 0; pkt < net.pd.size(); ++pkt) {
            Packet p = net.pd.packet(static_cast<int>(pkt));
            for (auto& f : iso.forbidden)
                if (match(f.src, p.src) && match(f.dst, p.dst) && match(f.tag, p.tag)) set.insert(static_cast<int>(pkt));
        }
    }
    for (auto& [h, pk] : per_host) mon.forbidden.emplace_back(h, std::vector<int>(pk.begin(), pk.end()));
    return mon;
}

bool DeliveryMonitor::hit(int host, int pkt) const {
    for (auto& [h, pk] : forbidden)
        if (h == host && std::binary_search(pk.begin(), pk.end(), pkt)) return true;
    return false;
}

Config initial_config(const Network& net) {
    Config c;
    for (auto& m : net.mboxes) c.states.push_back(m.inst.init);
    c.chans.assign(net.channels.size(), {});
    return c;
}

namespace {

void push(std::vector<int>& buf, int pkt, Semantics sem) {
    if (sem == Semantics::fifo) buf.push_back(pkt);
    else buf.insert(std::upper_bound(buf.begin(), buf.end(), pkt), pkt);
}

// Applies an outcome of middlebox m; returns true when the monitor fires.
bool apply_outcome(const Network& net, Config& c, int m, const Outcome& o, Semantics sem, const DeliveryMonitor* mon,
                   std::vector<std::pair<int, int>>* delivered) {
    if (o.abort) {
        c.aborted = true;
        return false;
    }
    c.states[m] = o.next;
    bool hit = false;
    auto& inst = net.mboxes[m].inst;
    for (auto& [pkt, port] : o.outputs) {
        int ch = net.mbox_out[m][inst.port_pos(port)];
        auto& to = net.channels[ch].to;
        if (to.host) {
            if (delivered) delivered->emplace_back(to.node, pkt);
            if (mon && mon->hit(to.node, pkt)) hit = true;
        } else {
            push(c.chans[ch], pkt, sem);
        }
    }
    return hit;
}

bool take(std::vector<int>& buf, int pkt, Semantics sem) {
    if (buf.empty()) return false;
    if (sem == Semantics::fifo) {
        if (buf.front() != pkt) return false;
        buf.erase(buf.begin());
        return true;
    }
    auto it = std::lower_bound(buf.begin(), buf.end(), pkt);
    if (it == buf.end() || *it != pkt) return false;
    buf.erase(it);
    return true;
}

}  // namespace

bool apply_event(const Network& net, Config& c, const Event& e, Semantics sem, StepInfo* info, const DeliveryMonitor* mon) {
    auto fail = [&](const std::string& why) {
        if (info) info->error = why;
        return false;
    };
    if (c.aborted) return fail("configuration already aborted");
    if (e.kind == Event::Kind::send) {
        if (e.node < 0 || e.node >= static_cast<int>(net.hosts.size())) return fail("unknown host");
        auto& h = net.hosts[e.node];
        if (!std::binary_search(h.sends.begin(), h.sends.end(), e.pkt)) return fail("host " + h.name + " cannot send " + net.packet_text(e.pkt));
        push(c.chans[net.host_out[e.node]], e.pkt, sem);
        return true;
    }
    if (e.node < 0 || e.node >= static_cast<int>(net.mboxes.size())) return fail("unknown middlebox");
    auto& mb = net.mboxes[e.node];
    int pos = mb.inst.port_pos(e.port);
    if (pos < 0) return fail("middlebox " + mb.name + " has no port " + std::to_string(e.port));
    int ch = net.mbox_in[e.node][pos];
    if (!take(c.chans[ch], e.pkt, sem))
        return fail(net.packet_text(e.pkt) + " is not " + (sem == Semantics::fifo ? "at the head of" : "in") + " channel " +
                    mb.name + "." + std::to_string(e.port));
    auto outs = step(net, e.node, c.states[e.node], e.pkt, e.port);
    if (e.branch < 0 || e.branch >= static_cast<int>(outs.size()))
        return fail("branch " + std::to_string(e.branch) + " out of range (" + std::to_string(outs.size()) + " outcomes)");
    bool hit = apply_outcome(net, c, e.node, outs[e.branch], sem, mon, info ? &info->delivered : nullptr);
    if (info) info->monitor_hit = hit;
    if (hit) c.aborted = true;
    return true;
}

StateCodec::StateCodec(const Network& net, Semantics sem) : net_(net), sem_(sem) {
    for (size_t ch = 0; ch < net.channels.size(); ++ch)
        if (!net.channels[ch].from.host && !net.channels[ch].to.host) internal_.push_back(static_cast<int>(ch));
    for (auto& m : net.mboxes) state_words_ += 2 * ((m.inst.bits + 63) / 64);
}

std::vector<uint32_t> StateCodec::encode(const Config& c) const {
    std::vector<uint32_t> k;
    for (auto& s : c.states)
        for (auto w : s.w) {
            k.push_back(static_cast<uint32_t>(w));
            k.push_back(static_cast<uint32_t>(w >> 32));
        }
    for (int ch : internal_) {
        k.push_back(static_cast<uint32_t>(c.chans[ch].size()));
        for (int p : c.chans[ch]) k.push_back(static_cast<uint32_t>(p));
    }
    return k;
}

Config StateCodec::decode(const std::vector<uint32_t>& k) const {
    Config c;
    size_t i = 0;
    for (auto& m : net_.mboxes) {
        Bits b(m.inst.bits);
        for (auto& w : b.w) {
            w = k[i] | (uint64_t{k[i + 1]} << 32);
            i += 2;
        }
        c.states.push_back(std::move(b));
    }
    c.chans.assign(net_.channels.size(), {});
    for (int ch : internal_) {
        uint32_t n = k[i++];
        c.chans[ch].assign(k.begin() + i, k.begin() + i + n);
        i += n;
    }
    return c;
}

void StateCodec::successors(const Config& c, std::vector<Successor>& out, const DeliveryMonitor* mon) const {
    for (size_t m = 0; m < net_.mboxes.size(); ++m) {
        auto& inst = net_.mboxes[m].inst;
        for (size_t pos = 0; pos < inst.ports.size(); ++pos) {
            int ch = net_.mbox_in[m][pos];
            int port = inst.ports[pos];
            auto& from = net_.channels[ch].from;
            auto emit = [&](int pkt, const Event* send) {
                auto outs = step(inst, net_.pd, c.states[m], pkt, port);
                for (size_t b = 0; b < outs.size(); ++b) {
                    Successor s;
                    if (send) s.ev[s.nev++] = *send;
                    s.ev[s.nev++] = {Event::Kind::proc, static_cast<int>(m), port, pkt, static_cast<int>(b)};
                    if (outs[b].abort) {
                        s.violation = true;
                    } else {
                        Config n = c;
                        if (!send) take(n.chans[ch], pkt, sem_);
                        s.violation = apply_outcome(net_, n, static_cast<int>(m), outs[b], sem_, mon, nullptr);
                        if (!s.violation) s.key = encode(n);
                    }
                    out.push_back(std::move(s));
                }
            };
            if (from.host) {
                for (int pkt : net_.hosts[from.node].sends) {
                    Event send{Event::Kind::send, from.node, 0, pkt, 0};
                    emit(pkt, &send);
                }
                continue;
            }
            auto& buf = c.chans[ch];
            if (buf.empty()) continue;
            if (sem_ == Semantics::fifo) {
                emit(buf.front(), nullptr);
            } else {
                for (size_t i = 0; i < buf.size(); ++i)
                    if (i == 0 || buf[i] != buf[i - 1]) emit(buf[i], nullptr);
            }
        }
    }
}

namespace {

// Channel parts of two keys with equal state prefixes; both hold sorted
// per-channel lists. True when every channel of `big` contains `small`'s.
bool channels_include(const std::vector<uint32_t>& big, const std::vector<uint32_t>& small, size_t from) {
    size_t i = from, j = from;
    while (i < big.size()) {
        uint32_t nb = big[i++], ns = small[j++];
        if (ns > nb) return false;
        size_t ei = i + nb, ej = j + ns;
        while (j < ej) {
            while (i < ei && big[i] < small[j]) ++i;
            if (i == ei || big[i] != small[j]) return false;
            ++i, ++j;
        }
        i = ei;
    }
    return true;
}

}  // namespace

ExploreResult explore(const Network& net, Semantics sem, int max_events, const ExploreOptions& opt) {
    ExploreResult res;
    StateCodec codec(net, sem);
    struct Node {
        int parent;
        Event ev[2];
        int nev;
        int cost;
    };
    std::vector<std::vector<uint32_t>> keys;
    std::vector<Node> nodes;
    std::unordered_map<std::vector<uint32_t>, int, KeyHash> index;
    const bool dominance = opt.dominance && sem == Semantics::unordered;
    const size_t prefix = codec.state_words();
    std::unordered_map<std::vector<uint32_t>, std::vector<int>, KeyHash> by_state;
    auto state_of = [&](const std::vector<uint32_t>& k) {
        return std::vector<uint32_t>(k.begin(), k.begin() + static_cast<long>(prefix));
    };
    auto dominated = [&](const std::vector<uint32_t>& k, int cost) {
        auto it = by_state.find(state_of(k));
        if (it == by_state.end()) return false;
        for (int id : it->second)
            if (nodes[id].cost <= cost && channels_include(keys[id], k, prefix)) return true;
        return false;
    };
    std::vector<std::vector<int>> buckets(static_cast<size_t>(std::max(0, max_events)) + 3);

    keys.push_back(codec.encode(initial_config(net)));
    nodes.push_back({-1, {}, 0, 0});
    if (opt.dedup) index.emplace(keys[0], 0);
    if (dominance) by_state[state_of(keys[0])].push_back(0);
    buckets[0].push_back(0);

    struct Found {
        int parent;
        Event ev[2];
        int nev;
    };
    int best = max_events + 1;
    std::vector<Found> found;
    bool cut = false;
    int threads = thread_count(opt.threads);

    auto witness_of = [&](int id, const Found* tail) {
        Witness w;
        if (tail) {
            for (int i = tail->nev - 1; i >= 0; --i) w.push_back(tail->ev[i]);
            id = tail->parent;
        }
        for (; id > 0; id = nodes[id].parent)
            for (int i = nodes[id].nev - 1; i >= 0; --i) w.push_back(nodes[id].ev[i]);
        std::reverse(w.begin(), w.end());
        return w;
    };

    for (int d = 0; d <= max_events; ++d) {
        std::vector<int> live;
        for (int id : buckets[d])
            if (nodes[id].cost == d) live.push_back(id);
        if (!live.empty()) res.stats.depth = d;
        const size_t block = 2048;
        for (size_t start = 0; start < live.size(); start += block) {
            size_t end = std::min(live.size(), start + block);
            std::vector<std::vector<Successor>> succ(end - start);
            auto work = [&](size_t from, size_t stride) {
                for (size_t i = from; i < end - start; i += stride)
                    codec.successors(codec.decode(keys[live[start + i]]), succ[i], opt.monitor);
            };
            if (threads > 1 && end - start > 64) {
                std::vector<std::thread> pool;
                for (int t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
                for (auto& t : pool) t.join();
            } else {
                work(0, 1);
            }
            for (size_t i = 0; i < succ.size(); ++i) {
                int pid = live[start + i];
                for (auto& s : succ[i]) {
                    int c2 = d + s.nev;
                    if (c2 > max_events) {
                        cut = true;
                        continue;
                    }
                    if (s.violation) {
                        if (c2 < best) {
                            best = c2;
                            found.clear();
                        }
                        if (c2 == best && (found.empty() || opt.all_violations))
                            found.push_back({pid, {s.ev[0], s.ev[1]}, s.nev});
                        continue;
                    }
                    int id = -1;
                    if (opt.dedup) {
                        auto it = index.find(s.key);
                        if (it != index.end()) {
                            id = it->second;
                            if (nodes[id].cost <= c2) continue;
                            nodes[id] = {pid, {s.ev[0], s.ev[1]}, s.nev, c2};
                            buckets[c2].push_back(id);
                            continue;
                        }
                    }
                    if (dominance && dominated(s.key, c2)) continue;
                    id = static_cast<int>(nodes.size());
                    nodes.push_back({pid, {s.ev[0], s.ev[1]}, s.nev, c2});
                    if (opt.dedup) index.emplace(s.key, id);
                    if (dominance) by_state[state_of(s.key)].push_back(id);
                    keys.push_back(std::move(s.key));
                    buckets[c2].push_back(id);
                }
            }
            if (nodes.size() > opt.max_configs) {
                res.verdict = ExploreResult::Verdict::resource_limit;
                res.stats.configs = nodes.size();
                return res;
            }
        }
        buckets[d].clear();
        buckets[d].shrink_to_fit();
        if (best <= d + 1) break;
    }
    res.stats.configs = nodes.size();
    if (!found.empty()) {
        res.verdict = ExploreResult::Verdict::violation;
        res.witness = witness_of(found[0].parent, &found[0]);
        if (opt.all_violations)
            for (auto& f : found) res.all.push_back(witness_of(f.parent, &f));
        return res;
    }
    res.stats.exhausted = !cut;
    return res;
}

WitnessCheck check_witness(const Network& net, const Witness& w, Semantics sem, const DeliveryMonitor* mon) {
    WitnessCheck r;
    if (w.empty()) {
        r.diagnostic = "empty witness";
        return r;
    }
    Config c = initial_config(net);
    for (size_t i = 0; i < w.size(); ++i) {
        StepInfo info;
        if (!apply_event(net, c, w[i], sem, &info, mon)) {
            r.diagnostic = "event " + std::to_string(i + 1) + " (" + event_text(net, w[i]) + "): " + info.error;
            return r;
        }
        if (c.aborted && i + 1 != w.size()) {
            r.diagnostic = "abort reached before the last event";
            return r;
        }
    }
    if (!c.aborted) {
        r.diagnostic = "final event does not abort";
        return r;
    }
    r.ok = true;
    return r;
}

RunTrace random_run(const Network& net, Semantics sem, int steps, uint64_t seed) {
    std::mt19937_64 rng(seed);
    RunTrace t;
    t.final = initial_config(net);
    for (int s = 0; s < steps && !t.final.aborted; ++s) {
        std::vector<Event> sends, procs;
        for (size_t h = 0; h < net.hosts.size(); ++h)
            for (int pkt : net.hosts[h].sends) sends.push_back({Event::Kind::send, static_cast<int>(h), 0, pkt, 0});
        for (size_t m = 0; m < net.mboxes.size(); ++m) {
            auto& inst = net.mboxes[m].inst;
            for (size_t pos = 0; pos < inst.ports.size(); ++pos) {
                auto& buf = t.final.chans[net.mbox_in[m][pos]];
                std::vector<int> cand;
                if (sem == Semantics::fifo) {
                    if (!buf.empty()) cand.push_back(buf.front());
                } else {
                    for (size_t i = 0; i < buf.size(); ++i)
                        if (i == 0 || buf[i] != buf[i - 1]) cand.push_back(buf[i]);
                }
                for (int pkt : cand) {
                    auto n = step(net, static_cast<int>(m), t.final.states[m], pkt, inst.ports[pos]).size();
                    for (size_t b = 0; b < n; ++b)
                        procs.push_back({Event::Kind::proc, static_cast<int>(m), inst.ports[pos], pkt, static_cast<int>(b)});
                }
            }
        }
        if (sends.empty() && procs.empty()) break;
        bool pick_send = procs.empty() || (!sends.empty() && (rng() & 1));
        auto& pool = pick_send ? sends : procs;
        Event e = pool[rng() % pool.size()];
        apply_event(net, t.final, e, sem);
        t.events.push_back(e);
    }
    return t;
}

std::string event_text(const Network& net, const Event& e) {
    if (e.kind == Event::Kind::send) return "send " + net.hosts[e.node].name + " " + net.packet_text(e.pkt);
    return "proc " + net.mboxes[e.node].name + "." + std::to_string(e.port) + " " + net.packet_text(e.pkt) + " branch " +
           std::to_string(e.branch);
}

std::string witness_to_text(const Network& net, const Witness& w) {
    std::string s;
    for (auto& e : w) s += event_text(net, e) + "\n";
    return s;
}

Witness witness_from_text(const Network& net, std::string_view text) {
    detail::Cursor c(detail::lex(text));
    Witness w;
    auto packet = [&]() {
        c.expect("(");
        std::string a = c.ident();
        c.expect(",");
        std::string b = c.ident();
        c.expect(",");
        std::string t = c.ident();
        c.expect(")");
        int pk = net.pd.index({net.u.find(a), net.u.find(b), net.u.find(t)});
        if (pk < 0) c.fail("unknown packet (" + a + "," + b + "," + t + ")");
        return pk;
    };
    while (!c.at_end()) {
        Event e;
        if (c.accept("send")) {
            e.kind = Event::Kind::send;
            std::string h = c.ident();
            e.node = net.host_index(h);
            if (e.node < 0) c.fail("unknown host '" + h + "'");
            e.pkt = packet();
        } else {
            c.expect("proc");
            e.kind = Event::Kind::proc;
            std::string m = c.ident();
            e.node = net.mbox_index(m);
            if (e.node < 0) c.fail("unknown middlebox '" + m + "'");
            c.expect(".");
            e.port = c.number();
            e.pkt = packet();
            c.expect("branch");
            e.branch = c.number();
        }
        w.push_back(e);
    }
    return w;
}

}  // namespace mbv
