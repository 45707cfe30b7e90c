#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "mbv/mbdl.hpp"

namespace mbv::detail {

struct Token {
    enum class Kind { ident, number, punct, end };
    Kind kind;
    std::string text;
    int line, col;
};

inline std::vector<Token> lex(std::string_view s) {
    std::vector<Token> out;
    int line = 1, col = 1;
    size_t i = 0;
    auto adv = [&](size_t n) {
        for (size_t k = 0; k < n; ++k) {
            if (s[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++i;
        }
    };
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            adv(1);
            continue;
        }
        if (c == '#' || (c == '/' && i + 1 < s.size() && s[i + 1] == '/')) {
            while (i < s.size() && s[i] != '\n') adv(1);
            continue;
        }
        int l = line, cc = col;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
            out.push_back({Token::Kind::ident, std::string(s.substr(i, j - i)), l, cc});
            adv(j - i);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t j = i;
            while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
            out.push_back({Token::Kind::number, std::string(s.substr(i, j - i)), l, cc});
            adv(j - i);
            continue;
        }
        static const char* two[] = {"=>", "!=", "--", ">="};
        bool done = false;
        for (auto t : two) {
            if (s.substr(i, 2) == t) {
                out.push_back({Token::Kind::punct, t, l, cc});
                adv(2);
                done = true;
                break;
            }
        }
        if (done) continue;
        if (std::string_view("(){},;:.=|*").find(c) != std::string_view::npos) {
            out.push_back({Token::Kind::punct, std::string(1, c), l, cc});
            adv(1);
            continue;
        }
        throw parse_error(l, cc, std::string("unexpected character '") + c + "'");
    }
    out.push_back({Token::Kind::end, "", line, col});
    return out;
}

class Cursor {
public:
    explicit Cursor(std::vector<Token> t) : toks_(std::move(t)) {}

    const Token& peek(size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    bool at_end() const { return peek().kind == Token::Kind::end; }
    bool is(std::string_view t, size_t k = 0) const {
        auto& x = peek(k);
        return x.kind != Token::Kind::end && x.text == t;
    }
    bool accept(std::string_view t) {
        if (is(t)) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(std::string_view t) {
        if (!accept(t)) fail("expected '" + std::string(t) + "'");
    }
    std::string ident() {
        if (peek().kind != Token::Kind::ident) fail("expected identifier");
        return toks_[pos_++].text;
    }
    int number() {
        if (peek().kind != Token::Kind::number) fail("expected number");
        return std::stoi(toks_[pos_++].text);
    }
    const Token& next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
    [[noreturn]] void fail(const std::string& msg) const {
        auto& t = peek();
        throw parse_error(t.line, t.col, msg + (t.kind == Token::Kind::end ? " at end of input" : ", got '" + t.text + "'"));
    }
    size_t pos() const { return pos_; }
    void reset(size_t p) { pos_ = p; }

private:
    std::vector<Token> toks_;
    size_t pos_ = 0;
};

}  // namespace mbv::detail
