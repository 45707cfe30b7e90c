#include <algorithm>
#include <set>
#include <sstream>

#include "lexer.hpp"
#include "mbv/mbdl.hpp"

namespace mbv {

const char* class_name(MiddleboxClass c) {
    switch (c) {
        case MiddleboxClass::Stateless: return "Stateless";
        case MiddleboxClass::Increasing: return "Increasing";
        case MiddleboxClass::Progressing: return "Progressing";
        case MiddleboxClass::Arbitrary: return "Arbitrary";
    }
    return "?";
}

namespace {

using detail::Cursor;
using detail::Token;

const std::set<std::string> kReserved = {"src", "dst", "tag", "prt", "this", "when", "block", "end",
                                          "output", "abort", "not", "and", "or", "in", "input"};

class ProgramParser {
public:
    ProgramParser(std::string_view text, const ParseOptions& opt) : c_(detail::lex(text)), opt_(opt) {}

    MiddleboxProgram run() {
        c_.expect("middlebox");
        p_.name = c_.ident();
        if (c_.accept("ports")) {
            do {
                p_.ports.push_back(c_.number());
            } while (c_.accept(","));
        }
        while (true) {
            if (c_.accept("const")) {
                auto tok = c_.peek();
                std::string n = c_.ident();
                if (p_.find_const(n)) throw parse_error(tok.line, tok.col, "duplicate const set '" + n + "'");
                c_.expect("=");
                c_.expect("{");
                std::vector<std::string> vals;
                if (!c_.is("}")) {
                    do {
                        vals.push_back(constant_text());
                    } while (c_.accept(","));
                }
                c_.expect("}");
                p_.consts.emplace_back(n, std::move(vals));
            } else if (c_.accept("rel")) {
                parse_rel();
            } else {
                break;
            }
        }
        c_.expect("input");
        c_.expect("(");
        for (const char* v : {"src", "dst", "tag", "prt"}) {
            c_.expect(v);
            if (std::string_view(v) != "prt") c_.expect(",");
        }
        c_.expect(")");
        c_.expect(":");
        while (c_.is("when")) p_.body.push_back(gcmd());
        if (!c_.at_end()) c_.fail("expected 'when' or end of input");
        return std::move(p_);
    }

private:
    Cursor c_;
    ParseOptions opt_;
    MiddleboxProgram p_;

    std::string constant_text() {
        auto& t = c_.peek();
        if (t.kind == Token::Kind::number) return c_.next().text;
        if (t.kind == Token::Kind::ident && !kReserved.count(t.text)) return c_.next().text;
        c_.fail("expected constant");
    }

    void parse_rel() {
        auto tok = c_.peek();
        RelationDecl r;
        r.name = c_.ident();
        if (kReserved.count(r.name) || r.name == "allPorts") throw parse_error(tok.line, tok.col, "reserved name '" + r.name + "'");
        if (p_.find_rel(r.name)) throw parse_error(tok.line, tok.col, "duplicate relation '" + r.name + "'");
        c_.expect("(");
        do {
            auto dt = c_.peek();
            std::string d = c_.ident();
            Domain dom;
            if (d == "address") dom.kind = Domain::Kind::address;
            else if (d == "tag") dom.kind = Domain::Kind::tag;
            else if (d == "port") dom.kind = Domain::Kind::port;
            else if (p_.find_const(d)) dom = {Domain::Kind::named, d};
            else throw parse_error(dt.line, dt.col, "unknown column domain '" + d + "'");
            r.columns.push_back(dom);
        } while (c_.accept(","));
        c_.expect(")");
        if (static_cast<int>(r.columns.size()) > opt_.max_arity)
            throw parse_error(tok.line, tok.col, "relation '" + r.name + "' has arity " + std::to_string(r.columns.size()) +
                                                     " above bound " + std::to_string(opt_.max_arity));
        if (c_.accept("init")) {
            c_.expect("{");
            if (!c_.is("}")) {
                do {
                    auto tt = c_.peek();
                    std::vector<Expr> tup;
                    if (c_.accept("(")) {
                        do {
                            tup.push_back(Expr::constant(constant_text()));
                        } while (c_.accept(","));
                        c_.expect(")");
                    } else {
                        tup.push_back(Expr::constant(constant_text()));
                    }
                    if (tup.size() != r.columns.size())
                        throw parse_error(tt.line, tt.col, "arity mismatch in initial tuple of '" + r.name + "'");
                    for (size_t i = 0; i < tup.size(); ++i) check_column(r.columns[i], tup[i].name, tt);
                    if (std::find(r.init.begin(), r.init.end(), tup) == r.init.end()) r.init.push_back(tup);
                } while (c_.accept(","));
            }
            c_.expect("}");
        }
        p_.rels.push_back(std::move(r));
    }

    void check_column(const Domain& d, const std::string& v, const Token& at) {
        bool num = std::isdigit(static_cast<unsigned char>(v[0]));
        if (d.kind == Domain::Kind::port && !num) throw parse_error(at.line, at.col, "port column expects a number, got '" + v + "'");
        if (d.kind == Domain::Kind::named) {
            auto* vals = p_.find_const(d.name);
            if (std::find(vals->begin(), vals->end(), v) == vals->end())
                throw parse_error(at.line, at.col, "'" + v + "' is not in const set '" + d.name + "'");
        }
    }

    Expr expr() {
        auto& t = c_.peek();
        if (t.kind == Token::Kind::ident) {
            if (t.text == "src") return c_.next(), Expr::variable(Var::src);
            if (t.text == "dst") return c_.next(), Expr::variable(Var::dst);
            if (t.text == "tag") return c_.next(), Expr::variable(Var::tag);
            if (t.text == "prt") return c_.next(), Expr::variable(Var::prt);
            if (t.text == "this") return c_.next(), Expr::self();
        }
        return Expr::constant(constant_text());
    }

    const RelationDecl& relation(const Token& at, const std::string& name, size_t arity) {
        auto* r = p_.find_rel(name);
        if (!r) throw parse_error(at.line, at.col, "undeclared relation '" + name + "'");
        if (r->columns.size() != arity)
            throw parse_error(at.line, at.col, "arity mismatch for '" + name + "': expected " +
                                                   std::to_string(r->columns.size()) + ", got " + std::to_string(arity));
        return *r;
    }

    // '(' e, ... ')' 'in' R  -- returns false (cursor restored) when the parenthesis opens something else
    bool try_tuple_member(Atom& out) {
        size_t save = c_.pos();
        if (!c_.accept("(")) return false;
        std::vector<Expr> tup;
        try {
            tup.push_back(expr());
            while (c_.accept(",")) tup.push_back(expr());
        } catch (const parse_error&) {
            c_.reset(save);
            return false;
        }
        if (!c_.accept(")") || !c_.is("in")) {
            c_.reset(save);
            return false;
        }
        c_.expect("in");
        auto at = c_.peek();
        std::string rel = c_.ident();
        relation(at, rel, tup.size());
        out.kind = Atom::Kind::member;
        out.tuple = std::move(tup);
        out.rel = rel;
        return true;
    }

    Atom atom() {
        Atom a;
        if (c_.is("(") && try_tuple_member(a)) return a;
        if (c_.is("(")) {
            c_.expect("(");
            Atom inner = atom();
            c_.expect(")");
            return inner;
        }
        Expr l = expr();
        if (c_.accept("=")) {
            a.kind = Atom::Kind::eq;
            a.lhs = l;
            a.rhs = expr();
            return a;
        }
        if (c_.accept("in")) {
            auto at = c_.peek();
            a.kind = Atom::Kind::member;
            a.rel = c_.ident();
            a.tuple = {l};
            relation(at, a.rel, 1);
            return a;
        }
        c_.fail("expected '=' or 'in'");
    }

    Guard primary() {
        if (c_.accept("not")) {
            auto at = c_.peek();
            try {
                return Guard::negated(atom());
            } catch (const parse_error& e) {
                if (std::string(e.what()).find("undeclared") != std::string::npos ||
                    std::string(e.what()).find("arity") != std::string::npos)
                    throw;
                throw parse_error(at.line, at.col, "negation applies only to atoms");
            }
        }
        if (c_.is("(")) {
            Atom a;
            if (try_tuple_member(a)) return Guard::of(a);
            size_t save = c_.pos();
            c_.expect("(");
            Guard g = guard();
            if (!c_.accept(")")) {
                c_.reset(save);
                return Guard::of(atom());
            }
            return g;
        }
        return Guard::of(atom());
    }

    Guard conj() {
        Guard g = primary();
        while (c_.accept("and")) g = Guard::conj(std::move(g), primary());
        return g;
    }

    Guard guard() {
        Guard g = conj();
        while (c_.accept("or")) g = Guard::disj(std::move(g), conj());
        return g;
    }

    GuardedCommand gcmd() {
        c_.expect("when");
        GuardedCommand gc;
        gc.guard = guard();
        c_.expect("=>");
        gc.cmd = command();
        return gc;
    }

    Command command() {
        std::vector<Command> parts;
        auto push = [&](Command c) {
            if (c.kind == Command::Kind::seq)
                for (auto& k : c.seq) parts.push_back(std::move(k));
            else
                parts.push_back(std::move(c));
        };
        push(simple());
        while (c_.accept(";")) push(simple());
        if (parts.size() == 1) return std::move(parts[0]);
        Command s;
        s.kind = Command::Kind::seq;
        s.seq = std::move(parts);
        return s;
    }

    Command simple() {
        Command c;
        if (c_.accept("abort")) {
            c.kind = Command::Kind::abort;
            return c;
        }
        if (c_.accept("block")) {
            c.kind = Command::Kind::block;
            while (c_.is("when")) c.block.push_back(gcmd());
            c_.expect("end");
            return c;
        }
        if (c_.accept("output")) return output();
        auto at = c_.peek();
        if (at.kind == Token::Kind::ident && c_.is(".", 1)) {
            std::string rel = c_.ident();
            c_.expect(".");
            auto op = c_.peek();
            std::string verb = c_.ident();
            if (verb == "insert") c.kind = Command::Kind::insert;
            else if (verb == "remove") c.kind = Command::Kind::remove;
            else throw parse_error(op.line, op.col, "expected insert or remove");
            if (c_.is("(")) {
                c_.expect("(");
                c.tuple.push_back(expr());
                while (c_.accept(",")) c.tuple.push_back(expr());
                c_.expect(")");
            } else {
                c.tuple.push_back(expr());
            }
            c.rel = rel;
            relation(at, rel, c.tuple.size());
            return c;
        }
        c_.fail("expected command");
    }

    Command output() {
        Command c;
        c.kind = Command::Kind::output;
        c_.expect("{");
        if (c_.accept("}")) return c;
        do {
            auto at = c_.peek();
            c_.expect("(");
            OutTuple o;
            o.src = expr();
            c_.expect(",");
            o.dst = expr();
            c_.expect(",");
            o.tag = expr();
            c_.expect(",");
            // flood shorthand: (s,d,t,x) | x in allPorts and x != prt
            if (c_.peek().kind == Token::Kind::ident && !kReserved.count(c_.peek().text) && c_.is(")", 1) && c_.is("|", 2)) {
                std::string var = c_.ident();
                c_.expect(")");
                c_.expect("|");
                c_.expect(var);
                c_.expect("in");
                c_.expect("allPorts");
                c_.expect("and");
                c_.expect(var);
                c_.expect("!=");
                c_.expect("prt");
                c_.expect("}");
                if (!c.outs.empty()) throw parse_error(at.line, at.col, "flood shorthand must be the only output element");
                if (p_.ports.empty()) throw parse_error(at.line, at.col, "flood shorthand needs a 'ports' declaration");
                return flood(o);
            }
            o.port = expr();
            c_.expect(")");
            if (std::find(c.outs.begin(), c.outs.end(), o) == c.outs.end()) c.outs.push_back(o);
        } while (c_.accept(","));
        c_.expect("}");
        return c;
    }

    // One single-guard block per declared port k: when not prt = k => output {(s,d,t,k)}
    Command flood(const OutTuple& head) {
        std::vector<Command> parts;
        for (int k : p_.ports) {
            Atom eq;
            eq.kind = Atom::Kind::eq;
            eq.lhs = Expr::variable(Var::prt);
            eq.rhs = Expr::constant(std::to_string(k));
            Command out;
            out.kind = Command::Kind::output;
            OutTuple o = head;
            o.port = Expr::constant(std::to_string(k));
            out.outs.push_back(o);
            Command b;
            b.kind = Command::Kind::block;
            b.block.push_back({Guard::negated(eq), std::move(out)});
            parts.push_back(std::move(b));
        }
        if (parts.size() == 1) return std::move(parts[0]);
        Command s;
        s.kind = Command::Kind::seq;
        s.seq = std::move(parts);
        return s;
    }
};

std::string expr_text(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::self: return "this";
        case Expr::Kind::constant: return e.name;
        case Expr::Kind::variable:
            switch (e.var) {
                case Var::src: return "src";
                case Var::dst: return "dst";
                case Var::tag: return "tag";
                case Var::prt: return "prt";
            }
    }
    return "?";
}

std::string tuple_text(const std::vector<Expr>& t) {
    std::string s = "(";
    for (size_t i = 0; i < t.size(); ++i) s += (i ? ", " : "") + expr_text(t[i]);
    return s + ")";
}

std::string atom_text(const Atom& a) {
    if (a.kind == Atom::Kind::eq) return expr_text(a.lhs) + " = " + expr_text(a.rhs);
    if (a.tuple.size() == 1) return expr_text(a.tuple[0]) + " in " + a.rel;
    return tuple_text(a.tuple) + " in " + a.rel;
}

void print_cmd(std::ostringstream& os, const Command& c, int ind);

void print_gcmds(std::ostringstream& os, const std::vector<GuardedCommand>& b, int ind) {
    for (auto& gc : b) {
        os << std::string(ind, ' ') << "when " << print_guard(gc.guard) << " =>\n";
        print_cmd(os, gc.cmd, ind + 2);
        os << "\n";
    }
}

void print_cmd(std::ostringstream& os, const Command& c, int ind) {
    std::string pad(ind, ' ');
    switch (c.kind) {
        case Command::Kind::abort: os << pad << "abort"; break;
        case Command::Kind::output: {
            os << pad << "output {";
            for (size_t i = 0; i < c.outs.size(); ++i) {
                auto& o = c.outs[i];
                os << (i ? ", " : "") << "(" << expr_text(o.src) << ", " << expr_text(o.dst) << ", " << expr_text(o.tag)
                   << ", " << expr_text(o.port) << ")";
            }
            os << "}";
            break;
        }
        case Command::Kind::insert:
        case Command::Kind::remove:
            os << pad << c.rel << (c.kind == Command::Kind::insert ? ".insert" : ".remove") << tuple_text(c.tuple);
            break;
        case Command::Kind::seq:
            for (size_t i = 0; i < c.seq.size(); ++i) {
                if (i) os << ";\n";
                print_cmd(os, c.seq[i], ind);
            }
            break;
        case Command::Kind::block:
            os << pad << "block\n";
            print_gcmds(os, c.block, ind + 2);
            os << pad << "end";
            break;
    }
}

}  // namespace

MiddleboxProgram parse_program(std::string_view text, const ParseOptions& opt) {
    return ProgramParser(text, opt).run();
}

std::string print_guard(const Guard& g) {
    switch (g.kind) {
        case Guard::Kind::atom: return atom_text(g.atom);
        case Guard::Kind::not_atom: {
            // parenthesize equalities so the negation visibly scopes one atom
            return g.atom.kind == Atom::Kind::eq ? "not (" + atom_text(g.atom) + ")" : "not " + atom_text(g.atom);
        }
        case Guard::Kind::conj: {
            auto wrap = [](const Guard& k, bool right) {
                bool par = k.kind == Guard::Kind::disj || (right && k.kind == Guard::Kind::conj);
                return par ? "(" + print_guard(k) + ")" : print_guard(k);
            };
            return wrap(g.kids[0], false) + " and " + wrap(g.kids[1], true);
        }
        case Guard::Kind::disj: {
            auto r = g.kids[1].kind == Guard::Kind::disj ? "(" + print_guard(g.kids[1]) + ")" : print_guard(g.kids[1]);
            return print_guard(g.kids[0]) + " or " + r;
        }
    }
    return "";
}

std::string print_program(const MiddleboxProgram& p) {
    std::ostringstream os;
    os << "middlebox " << p.name << "\n";
    if (!p.ports.empty()) {
        os << "ports ";
        for (size_t i = 0; i < p.ports.size(); ++i) os << (i ? ", " : "") << p.ports[i];
        os << "\n";
    }
    for (auto& [n, vals] : p.consts) {
        os << "const " << n << " = {";
        for (size_t i = 0; i < vals.size(); ++i) os << (i ? ", " : "") << vals[i];
        os << "}\n";
    }
    for (auto& r : p.rels) {
        os << "rel " << r.name << "(";
        for (size_t i = 0; i < r.columns.size(); ++i) {
            auto& d = r.columns[i];
            os << (i ? ", " : "");
            switch (d.kind) {
                case Domain::Kind::address: os << "address"; break;
                case Domain::Kind::tag: os << "tag"; break;
                case Domain::Kind::port: os << "port"; break;
                case Domain::Kind::named: os << d.name; break;
            }
        }
        os << ")";
        if (!r.init.empty()) {
            os << " init {";
            for (size_t i = 0; i < r.init.size(); ++i) os << (i ? ", " : "") << tuple_text(r.init[i]);
            os << "}";
        }
        os << "\n";
    }
    os << "\ninput(src, dst, tag, prt):\n";
    print_gcmds(os, p.body, 2);
    return os.str();
}

}  // namespace mbv
