#include "mbv/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mbv/explore.hpp"
#include "mbv/fixpoint.hpp"
#include "mbv/gen.hpp"
#include "mbv/mbdl.hpp"
#include "mbv/petri.hpp"
#include "mbv/progressing.hpp"

namespace mbv {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw input_error("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void dump(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw input_error("cannot write " + path);
    f << text;
}

MiddleboxClass network_class(const Network& net) {
    auto c = MiddleboxClass::Stateless;
    for (auto& m : net.mboxes) c = std::max(c, classify(*m.prog));
    return c;
}

struct Report {
    std::string verdict = "Inconclusive";
    std::string engine;
    std::vector<std::string> tried;
    json stats = json::object();
    Witness witness;
    Semantics sem = Semantics::unordered;
    std::string detail;
};

struct VerifyArgs {
    std::string topo;
    std::string engine = "auto";
    std::string semantics = "unordered";
    int max_depth = 20;
    bool json = false;
    std::string witness_file;
    std::string tables_file;
};

void run_fixpoint(const Network& net, Report& r, const VerifyArgs& a) {
    r.tried.push_back("fixpoint");
    r.engine = "fixpoint";
    auto res = verify_increasing(net);
    r.stats["rounds"] = res.rounds;
    r.stats["additions"] = res.additions;
    r.stats["round_bound"] = res.bound + 1;
    if (!a.tables_file.empty()) dump(a.tables_file, tables_text(net, res));
    if (res.safe) {
        r.verdict = "Safe";
    } else {
        r.verdict = "Violation";
        r.witness = extract_witness(net, res);
    }
}

void run_witness(const Network& net, Report& r, const VerifyArgs& a) {
    r.tried.push_back("witness");
    r.engine = "witness";
    ProgressingOptions po;
    po.max_depth = a.max_depth;
    auto res = find_witness(net, po);
    r.stats["configurations"] = res.configs;
    r.stats["depth"] = res.depth;
    r.stats["witness_bound"] = res.bound.value.str();
    switch (res.verdict) {
        case ProgressingResult::Verdict::violation:
            r.verdict = "Violation";
            r.witness = std::move(res.witness);
            break;
        case ProgressingResult::Verdict::proved_safe:
            r.verdict = "Safe";
            break;
        case ProgressingResult::Verdict::safe_up_to:
            r.verdict = "Inconclusive";
            r.detail = "no violation within " + std::to_string(res.depth) + " events";
            break;
    }
}

void run_petri(const Network& net, Report& r) {
    r.tried.push_back("petri");
    r.engine = "petri";
    auto res = petri_verify(net);
    r.stats["places"] = res.places;
    r.stats["transitions"] = res.transitions;
    r.stats["episodes"] = res.episodes;
    r.stats["basis"] = res.basis;
    switch (res.verdict) {
        case CoverResult::Verdict::uncoverable:
            r.verdict = "Safe";
            break;
        case CoverResult::Verdict::resource_limit:
            r.verdict = "Inconclusive";
            r.detail = "coverability basis limit reached";
            break;
        case CoverResult::Verdict::coverable:
            if (res.witness_ok) {
                r.verdict = "Violation";
                r.witness = std::move(res.witness);
            } else {
                r.verdict = "Inconclusive";
                r.detail = "abort place coverable but no network witness: " + res.diagnostic;
            }
            break;
    }
}

void run_bounded(const Network& net, Report& r, const VerifyArgs& a) {
    r.tried.push_back("bounded");
    r.engine = "bounded";
    ExploreOptions eo;
    auto res = explore(net, r.sem, a.max_depth, eo);
    r.stats["configurations"] = res.stats.configs;
    r.stats["depth"] = a.max_depth;
    if (res.verdict == ExploreResult::Verdict::violation) {
        r.verdict = "Violation";
        r.witness = std::move(res.witness);
    } else if (res.verdict == ExploreResult::Verdict::no_violation && res.stats.exhausted && r.sem == Semantics::unordered) {
        r.verdict = "Safe";
    } else {
        r.verdict = "Inconclusive";
        r.detail = res.verdict == ExploreResult::Verdict::resource_limit
                       ? "configuration limit reached"
                       : "no violation within " + std::to_string(a.max_depth) + " events";
    }
}

int verify(const VerifyArgs& a, std::ostream& out) {
    auto t0 = std::chrono::steady_clock::now();
    Network declared = load_topology_file(a.topo);
    Network net = compile_isolation(declared);
    auto cls = network_class(declared);
    Report r;
    r.sem = a.semantics == "fifo" ? Semantics::fifo : Semantics::unordered;

    if (r.sem == Semantics::fifo) {
        if (a.engine != "auto" && a.engine != "witness")
            throw input_error("FIFO semantics only supports bounded search (--engine auto or witness)");
        run_bounded(net, r, a);
        if (r.verdict == "Safe") r.verdict = "Inconclusive";
    } else if (a.engine == "fixpoint") {
        run_fixpoint(net, r, a);
    } else if (a.engine == "witness") {
        run_witness(net, r, a);
    } else if (a.engine == "petri") {
        run_petri(net, r);
    } else if (cls <= MiddleboxClass::Increasing) {
        run_fixpoint(net, r, a);
    } else {
        if (cls <= MiddleboxClass::Progressing) {
            try {
                run_witness(net, r, a);
            } catch (const engine_error& e) {
                r.detail = e.what();
            }
        }
        if (r.verdict == "Inconclusive") run_petri(net, r);
    }

    std::string wfile;
    if (r.verdict == "Violation") {
        auto chk = check_witness(net, r.witness, r.sem);
        if (!chk.ok) {
            r.verdict = "Inconclusive";
            r.detail = "witness failed to replay: " + chk.diagnostic;
        } else {
            wfile = a.witness_file.empty() ? fs::path(a.topo).stem().string() + ".witness" : a.witness_file;
            dump(wfile, witness_to_text(net, r.witness));
        }
    }
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    r.stats["wall_ms"] = std::round(ms * 1000) / 1000;

    if (a.json) {
        json j;
        j["verdict"] = r.verdict;
        j["engine"] = r.engine;
        j["engines_tried"] = r.tried;
        j["class"] = class_name(cls);
        j["semantics"] = r.sem == Semantics::fifo ? "fifo" : "unordered";
        j["witness_file"] = wfile.empty() ? json(nullptr) : json(wfile);
        json ev = json::array();
        for (auto& e : r.witness)
            if (!wfile.empty()) ev.push_back(event_text(net, e));
        j["witness"] = ev;
        j["detail"] = r.detail;
        j["stats"] = r.stats;
        out << j.dump(2) << "\n";
    } else {
        out << "verdict: " << r.verdict << "\nengine: " << r.engine << "\nclass: " << class_name(cls) << "\n";
        if (!r.detail.empty()) out << "detail: " << r.detail << "\n";
        if (!wfile.empty()) {
            out << "witness: " << wfile << " (" << r.witness.size() << " events)\n";
            for (auto& e : r.witness) out << "  " << event_text(net, e) << "\n";
        }
        out << "stats:";
        for (auto& [k, v] : r.stats.items()) out << " " << k << "=" << (v.is_string() ? v.get<std::string>() : v.dump());
        out << "\n";
    }
    if (r.verdict == "Safe") return exit_safe;
    if (r.verdict == "Violation") return exit_violation;
    return exit_inconclusive;
}

int parse_cmd(const std::string& file, std::ostream& out) {
    if (fs::path(file).extension() == ".topo") out << print_topology(load_topology_file(file));
    else out << print_program(parse_program(slurp(file)));
    return 0;
}

int classify_cmd(const std::string& file, bool as_json, std::ostream& out) {
    json j;
    if (fs::path(file).extension() != ".topo") {
        auto p = parse_program(slurp(file));
        j[p.name] = class_name(classify(p));
        if (as_json) out << j.dump(2) << "\n";
        else out << p.name << ": " << class_name(classify(p)) << "\n";
        return 0;
    }
    Network net = load_topology_file(file);
    json boxes = json::object();
    for (auto& m : net.mboxes) {
        boxes[m.name] = class_name(classify(*m.prog));
        if (!as_json) out << m.name << " (" << m.program << "): " << class_name(classify(*m.prog)) << "\n";
    }
    if (as_json) {
        j["middleboxes"] = boxes;
        j["network"] = class_name(network_class(net));
        out << j.dump(2) << "\n";
    } else {
        out << "network: " << class_name(network_class(net)) << "\n";
    }
    return 0;
}

int simulate_cmd(const std::string& topo, int steps, uint64_t seed, const std::string& sem, std::ostream& out) {
    Network net = compile_isolation(load_topology_file(topo));
    auto tr = random_run(net, sem == "fifo" ? Semantics::fifo : Semantics::unordered, steps, seed);
    out << witness_to_text(net, tr.events);
    out << (tr.final.aborted ? "aborted\n" : "running\n");
    for (size_t m = 0; m < net.mboxes.size(); ++m) {
        if (net.mboxes[m].inst.rels.empty()) continue;
        out << "state " << net.mboxes[m].name << ":";
        for (auto& [rel, rows] : describe_state(net, static_cast<int>(m), tr.final.states[m])) {
            out << " " << rel << "{";
            for (size_t i = 0; i < rows.size(); ++i) {
                out << (i ? "," : "") << "(";
                for (size_t k = 0; k < rows[i].size(); ++k) out << (k ? "," : "") << rows[i][k];
                out << ")";
            }
            out << "}";
        }
        out << "\n";
    }
    return tr.final.aborted ? exit_violation : exit_safe;
}

int export_cmd(const std::string& topo, const std::string& file, const std::string& format, bool fold, std::ostream& out) {
    Network net = compile_isolation(load_topology_file(topo));
    EncodeOptions eo;
    eo.fold_constant_relations = fold;
    auto enc = encode(net, eo);
    if (format == "dot") {
        dump(file, export_dot(enc.net));
    } else {
        dump(file, export_lola(enc.net));
        dump(file + ".formula", export_lola_formula(enc.net));
    }
    out << "places " << enc.net.places.size() << " transitions " << enc.net.transitions.size() << "\n";
    return 0;
}

int check_cmd(const std::string& topo, const std::string& wfile, const std::string& sem, std::ostream& out) {
    Network net = compile_isolation(load_topology_file(topo));
    auto w = witness_from_text(net, slurp(wfile));
    auto chk = check_witness(net, w, sem == "fifo" ? Semantics::fifo : Semantics::unordered);
    out << (chk.ok ? "witness ok\n" : "witness rejected: " + chk.diagnostic + "\n");
    return chk.ok ? exit_safe : exit_violation;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Verification of stateful middlebox networks", "mbv"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads for exploration (default: MBV_THREADS or 1)");

    std::string file;
    auto* parse = app.add_subcommand("parse", "parse a .mbd program or .topo network and print it normalized");
    parse->add_option("file", file)->required();

    bool as_json = false;
    auto* cls = app.add_subcommand("classify", "report the class of each middlebox");
    cls->add_option("file", file)->required();
    cls->add_flag("--json", as_json);

    VerifyArgs va;
    auto* ver = app.add_subcommand("verify", "check the isolation properties of a network");
    ver->add_option("topo", va.topo)->required();
    ver->add_option("--engine", va.engine)->check(CLI::IsMember({"auto", "fixpoint", "witness", "petri"}));
    ver->add_option("--semantics", va.semantics)->check(CLI::IsMember({"unordered", "fifo"}));
    ver->add_option("--max-depth", va.max_depth, "event bound for bounded search")->check(CLI::NonNegativeNumber);
    ver->add_flag("--json", va.json);
    ver->add_option("-w,--witness", va.witness_file, "where to write the witness (default: <topo>.witness)");
    ver->add_option("--emit-tables", va.tables_file, "write the fixpoint tables to this file");

    int steps = 20;
    uint64_t seed = 1;
    std::string sem = "unordered";
    auto* sim = app.add_subcommand("simulate", "run a random execution");
    sim->add_option("topo", file)->required();
    sim->add_option("--steps", steps)->check(CLI::NonNegativeNumber);
    sim->add_option("--seed", seed);
    sim->add_option("--semantics", sem)->check(CLI::IsMember({"unordered", "fifo"}));

    std::string outfile, format = "lola";
    bool no_fold = false;
    auto* exp = app.add_subcommand("export-petri", "write the Petri net encoding");
    exp->add_option("topo", file)->required();
    exp->add_option("-o", outfile)->required();
    exp->add_option("--format", format)->check(CLI::IsMember({"lola", "dot"}));
    exp->add_flag("--no-fold", no_fold, "keep places for relations that are never modified");

    std::string wfile;
    auto* chk = app.add_subcommand("check-witness", "replay a witness file");
    chk->add_option("topo", file)->required();
    chk->add_option("witness", wfile)->required();
    chk->add_option("--semantics", sem)->check(CLI::IsMember({"unordered", "fifo"}));

    auto* gen = app.add_subcommand("gen", "generate test networks");
    gen->require_subcommand(1);
    std::string dir = ".";
    int vertices = 3, dims = 2;
    auto* gv = gen->add_subcommand("vass", "random simple VASS and its network");
    gv->add_option("--seed", seed);
    gv->add_option("--vertices", vertices)->check(CLI::PositiveNumber);
    gv->add_option("--dims", dims)->check(CLI::PositiveNumber);
    gv->add_option("-o", dir);
    RandomParams rp;
    bool no_remove = false, no_neg = false, no_overlap = false;
    auto* gr = gen->add_subcommand("random", "random network");
    gr->add_option("--seed", seed);
    gr->add_flag("--no-remove", no_remove);
    gr->add_flag("--no-negation", no_neg);
    gr->add_flag("--no-overlap", no_overlap);
    gr->add_option("-o", dir);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : exit_error;
    }
    if (threads > 0) setenv("MBV_THREADS", std::to_string(threads).c_str(), 1);

    try {
        if (*parse) return parse_cmd(file, out);
        if (*cls) return classify_cmd(file, as_json, out);
        if (*ver) return verify(va, out);
        if (*sim) return simulate_cmd(file, steps, seed, sem, out);
        if (*exp) return export_cmd(file, outfile, format, !no_fold, out);
        if (*chk) return check_cmd(file, wfile, sem, out);
        if (*gv) {
            Vass v = random_vass(seed, vertices, dims);
            Network net = vass_to_network(v);
            write_network(net, dir, "vass-" + std::to_string(seed));
            out << "vertices " << v.vertices << " dims " << v.dims << " initial v" << v.initial << "\n";
            for (auto& e : v.edges) {
                out << "edge v" << e.from << " -> v" << e.to << " (";
                for (size_t i = 0; i < e.w.size(); ++i) out << (i ? "," : "") << e.w[i];
                out << ")\n";
            }
            out << "reach";
            for (int r : v.reach) out << " v" << r;
            out << "\n";
            return 0;
        }
        if (*gr) {
            rp.remove = !no_remove;
            rp.negation = !no_neg;
            rp.overlap = !no_overlap;
            auto rn = random_network(rp, seed);
            write_network(rn.net, dir, "random-" + std::to_string(seed));
            for (size_t i = 0; i < rn.classes.size(); ++i)
                out << rn.net.mboxes[i].name << ": " << class_name(rn.classes[i]) << "\n";
            return 0;
        }
    } catch (const parse_error& e) {
        err << "parse error: " << e.what() << "\n";
        return exit_error;
    } catch (const input_error& e) {
        err << "error: " << e.what() << "\n";
        return exit_error;
    } catch (const engine_error& e) {
        err << "error: " << e.what() << "\n";
        return exit_error;
    }
    return exit_error;
}

}  // namespace mbv
