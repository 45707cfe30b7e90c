#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mbv/cli.hpp"
#include "mbv/petri.hpp"
#include "support.hpp"

using namespace mbv;
namespace fs = std::filesystem;

namespace {

struct Out {
    int code;
    std::string out, err;
};

Out mbv_run(std::vector<std::string> args) {
    args.insert(args.begin(), "mbv");
    std::vector<const char*> argv;
    for (auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string topo(const std::string& name) { return (fs::path(corpus_dir()) / (name + ".topo")).string(); }

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("mbv_cli_" + std::to_string(reinterpret_cast<uintptr_t>(this)));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& f) const { return (path / f).string(); }
};

nlohmann::ordered_json verify_json(const std::string& name, std::vector<std::string> extra, const TempDir& tmp,
                                   int* code = nullptr) {
    std::vector<std::string> args{"verify", topo(name), "--json", "-w", tmp / (name + ".witness")};
    args.insert(args.end(), extra.begin(), extra.end());
    auto r = mbv_run(args);
    if (code) *code = r.code;
    return nlohmann::ordered_json::parse(r.out);
}

}  // namespace

TEST_CASE("verify exit codes and engines") {
    TempDir tmp;
    int code = -1;
    auto mt = verify_json("multi-tenant", {}, tmp, &code);
    CHECK(code == exit_safe);
    CHECK(mt["verdict"] == "Safe");
    CHECK(mt["engine"] == "fixpoint");
    CHECK(mt["witness_file"].is_null());

    auto om = verify_json("order-matters", {"--engine", "petri"}, tmp, &code);
    CHECK(code == exit_violation);
    CHECK(om["verdict"] == "Violation");
    REQUIRE(om["witness_file"].is_string());
    auto wf = om["witness_file"].get<std::string>();
    CHECK(fs::exists(wf));
    CHECK(om["witness"].size() > 0);
    CHECK(mbv_run({"check-witness", topo("order-matters"), wf}).code == exit_safe);
    CHECK(mbv_run({"check-witness", topo("order-matters"), wf, "--semantics", "fifo"}).code != exit_safe);

    auto fifo = verify_json("order-matters", {"--semantics", "fifo", "--max-depth", "10"}, tmp, &code);
    CHECK(code == exit_inconclusive);
    CHECK(fifo["verdict"] == "Inconclusive");
    CHECK(fifo["semantics"] == "fifo");
    CHECK(fifo["engine"] == "bounded");

    auto fw = verify_json("fw-proxy", {}, tmp, &code);
    CHECK(code == exit_violation);
    CHECK(fw["engine"] == "witness");
    CHECK(fw["class"] == "Progressing");

    // Plain text output names the verdict.
    auto text = mbv_run({"verify", topo("acl"), "-w", tmp / "acl.witness"});
    CHECK(text.out.find("verdict: Safe") == 0);
    CHECK(text.code == exit_safe);
}

TEST_CASE("json report layout") {
    TempDir tmp;
    auto j = verify_json("firewall2", {}, tmp);
    std::vector<std::string> keys;
    for (auto& [k, v] : j.items()) keys.push_back(k);
    CHECK(keys == std::vector<std::string>{"verdict", "engine", "engines_tried", "class", "semantics", "witness_file",
                                           "witness", "detail", "stats"});
    CHECK(j["stats"].contains("wall_ms"));
    CHECK(j["engines_tried"] == nlohmann::ordered_json::array({"fixpoint"}));
    CHECK(j["class"] == "Increasing");
    std::ifstream f(j["witness_file"].get<std::string>());
    std::stringstream ss;
    ss << f.rdbuf();
    auto net = fixture::compiled("firewall2");
    auto w = witness_from_text(net, ss.str());
    REQUIRE(w.size() == j["witness"].size());
    for (size_t i = 0; i < w.size(); ++i) CHECK(event_text(net, w[i]) == j["witness"][i]);
}

TEST_CASE("auto agrees with the explicit engines") {
    TempDir tmp;
    for (auto& name : corpus_names()) {
        auto a = verify_json(name, {}, tmp);
        auto pr = petri_verify(fixture::compiled(name));
        std::string expect = pr.verdict == CoverResult::Verdict::coverable ? "Violation" : "Safe";
        CAPTURE(name);
        CHECK(a["verdict"] == expect);
        auto p = verify_json(name, {"--engine", "petri"}, tmp);
        CHECK(p["verdict"] == expect);
    }
}

TEST_CASE("other subcommands") {
    TempDir tmp;
    auto fw = (fs::path(corpus_dir()) / "firewall.mbd").string();
    auto p = mbv_run({"parse", fw});
    CHECK(p.code == 0);
    CHECK(parse_program(p.out).name == "firewall");
    auto t = mbv_run({"parse", topo("acl")});
    CHECK(t.code == 0);
    CHECK(t.out.find("host") != std::string::npos);

    auto c = mbv_run({"classify", topo("fw-proxy"), "--json"});
    REQUIRE(c.code == 0);
    auto cj = nlohmann::json::parse(c.out);
    CHECK(cj["network"] == "Progressing");
    CHECK(cj["middleboxes"].size() == 2);
    CHECK(mbv_run({"classify", fw}).out == "firewall: Increasing\n");

    auto e = mbv_run({"export-petri", topo("acl"), "-o", tmp / "acl.lola"});
    CHECK(e.code == 0);
    CHECK(fs::exists(tmp / "acl.lola"));
    CHECK(fs::exists(tmp / "acl.lola.formula"));
    CHECK(mbv_run({"export-petri", topo("acl"), "-o", tmp / "acl.dot", "--format", "dot"}).code == 0);
    std::ifstream dot(tmp / "acl.dot");
    std::string first;
    dot >> first;
    CHECK(first == "digraph");

    auto s1 = mbv_run({"simulate", topo("fw-proxy"), "--steps", "25", "--seed", "3"});
    auto s2 = mbv_run({"simulate", topo("fw-proxy"), "--steps", "25", "--seed", "3"});
    CHECK(s1.out == s2.out);
    CHECK(s1.code != exit_error);

    auto gv = mbv_run({"gen", "vass", "--seed", "4", "-o", tmp.path.string()});
    CHECK(gv.code == 0);
    CHECK(fs::exists(tmp / "vass-4.topo"));
    CHECK(mbv_run({"verify", tmp / "vass-4.topo", "-w", tmp / "v.witness"}).code != exit_error);
    auto gr = mbv_run({"gen", "random", "--seed", "5", "-o", tmp.path.string()});
    CHECK(gr.code == 0);
    CHECK(fs::exists(tmp / "random-5.topo"));
    CHECK(mbv_run({"classify", tmp / "random-5.topo"}).code == 0);
}

TEST_CASE("usage and input errors exit 3") {
    CHECK(mbv_run({}).code == exit_error);
    CHECK(mbv_run({"frobnicate"}).code == exit_error);
    CHECK(mbv_run({"verify"}).code == exit_error);
    CHECK(mbv_run({"verify", topo("acl"), "--engine", "magic"}).code == exit_error);
    CHECK(mbv_run({"verify", "/nonexistent.topo"}).code == exit_error);
    auto g = mbv_run({"verify", topo("fw-proxy"), "--engine", "fixpoint"});
    CHECK(g.code == exit_error);
    CHECK_FALSE(g.err.empty());
    CHECK(mbv_run({"verify", topo("acl"), "--engine", "petri", "--semantics", "fifo"}).code == exit_error);
    CHECK(mbv_run({"verify", topo("lb-ratelimiter"), "--engine", "witness"}).code == exit_error);

    TempDir tmp;
    {
        std::ofstream bad(tmp / "bad.mbd");
        bad << "middlebox x\nports 1\ninput(src, dst, tag, prt):\n  when prt = => abort\n";
    }
    auto b = mbv_run({"parse", tmp / "bad.mbd"});
    CHECK(b.code == exit_error);
    CHECK(b.err.find("parse error") != std::string::npos);
    CHECK(mbv_run({"--help"}).code == 0);
}
