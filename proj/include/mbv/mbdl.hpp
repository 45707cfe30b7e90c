#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mbv/ast.hpp"

namespace mbv {

struct parse_error : std::runtime_error {
    int line, col;
    parse_error(int l, int c, const std::string& msg)
        : std::runtime_error(std::to_string(l) + ":" + std::to_string(c) + ": " + msg), line(l), col(c) {}
};

struct ParseOptions {
    int max_arity = 3;
};

MiddleboxProgram parse_program(std::string_view text, const ParseOptions& opt = {});
std::string print_program(const MiddleboxProgram& p);
std::string print_guard(const Guard& g);

// Concrete value sets the classifier enumerates over. `self` stands for `this`.
struct Domains {
    std::vector<std::string> addresses;
    std::vector<std::string> tags;
    std::vector<int> ports;
    std::string self = "this";
};

// Every constant named in the program plus a few fresh values, enough to
// separate all equality patterns between variables and constants.
Domains default_domains(const MiddleboxProgram& p);

struct ExclusivityWitness {
    std::string src, dst, tag;
    int port = 0;
    std::vector<std::pair<std::string, bool>> assignment;  // "rel(a,b)" -> truth
    int first = -1, second = -1;                            // overlapping guard indices
};

struct ExclusivityResult {
    bool exclusive = true;
    std::optional<ExclusivityWitness> witness;
};

ExclusivityResult check_mutually_exclusive(const std::vector<GuardedCommand>& block, const Domains& d);

struct SyntaxFacts {
    bool insert = false;
    bool remove = false;
    bool negated_member = false;
    bool exclusive = true;
    std::optional<ExclusivityWitness> overlap;
};

SyntaxFacts syntax_facts(const MiddleboxProgram& p, const Domains& d);
MiddleboxClass classify(const MiddleboxProgram& p, const Domains& d);
inline MiddleboxClass classify(const MiddleboxProgram& p) { return classify(p, default_domains(p)); }

// Relations mutated by some insert/remove in the body.
std::vector<std::string> mutated_relations(const MiddleboxProgram& p);

MiddleboxProgram explicit_to_symbolic(const ExplicitMiddlebox& m);

}  // namespace mbv
