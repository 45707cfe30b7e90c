#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbv/ast.hpp"
#include "mbv/network.hpp"

namespace mbv {

// Directory holding the shipped .mbd/.topo files; MBV_CORPUS overrides the
// build-time location.
std::string corpus_dir();
std::vector<std::string> corpus_names();
// The named network as declared, isolation not yet compiled.
Network corpus(const std::string& name);

struct Vass {
    struct Edge {
        int from = 0, to = 0;
        std::vector<int> w;
    };
    int vertices = 1;
    int initial = 0;
    int dims = 1;
    std::vector<Edge> edges;
    std::vector<int> reach;
};

// Every weight has exactly one entry, +1 or -1, and no vertex has two
// outgoing edges with the same weight.
bool is_simple(const Vass& v, std::string* why = nullptr);

// Hosts h1 (sends every (h1, h2, t_i)) and h2, one middlebox with a self-link
// on port 2 whose pending packets count the VASS dimensions. The property
// forbids any delivery at h2.
Network vass_to_network(const Vass& v);

Vass random_vass(uint64_t seed, int max_vertices = 4, int dims = 2);

struct RandomParams {
    int hosts = 3, mboxes = 3, tags = 2, relations = 2, block = 3;
    bool remove = true;
    bool negation = true;
    bool overlap = true;  // when false, guards of a block test distinct ports
    double abort_rate = 0.08;
};

struct RandomNetwork {
    Network net;  // isolation not compiled
    std::vector<MiddleboxProgram> programs;
    std::vector<MiddleboxClass> classes;  // per middlebox
};

RandomNetwork random_network(const RandomParams& p, uint64_t seed);

// Writes NAME.topo and one PROGRAM.mbd per distinct program into dir.
void write_network(const Network& net, const std::string& dir, const std::string& name);

}  // namespace mbv
