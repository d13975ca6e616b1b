#pragma once

#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wrc/cmd.hpp"
#include "wrc/expr.hpp"

namespace wrc {

struct ParseError : std::runtime_error {
    int line, column;
    ParseError(const std::string& msg, int l, int c)
        : std::runtime_error("parse error at " + std::to_string(l) + ":" + std::to_string(c) +
                             ": " + msg),
          line(l), column(c) {}
};

namespace detail {

struct Token {
    enum Kind { Ident, Number, Keyword, Symbol, End } kind;
    std::string text;
    int line, column;
};

inline bool is_keyword(const std::string& s) {
    static const char* kws[] = {"skip", "if", "then", "else", "fi",
                                "while", "do", "od", "acquire", "release"};
    for (const char* k : kws)
        if (s == k) return true;
    return false;
}

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }
    Token next() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        skip_ws_and_comments();
        tok_.line = line_;
        tok_.column = col_;
        if (pos_ >= src_.size()) {
            tok_ = {Token::End, "", line_, col_};
            return;
        }
        char c = src_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string s;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                s += take();
            tok_ = {is_keyword(s) ? Token::Keyword : Token::Ident, s, tok_.line, tok_.column};
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::string s;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                s += take();
            tok_ = {Token::Number, s, tok_.line, tok_.column};
            return;
        }
        // Multi-character symbols first.
        static const char* two[] = {":=", "==", "!=", "<=", "&&", "||"};
        if (pos_ + 1 < src_.size()) {
            std::string pair{src_[pos_], src_[pos_ + 1]};
            for (const char* s : two)
                if (pair == s) {
                    take(); take();
                    tok_ = {Token::Symbol, pair, tok_.line, tok_.column};
                    return;
                }
        }
        static const std::string singles = "+-*<();";
        if (singles.find(c) != std::string::npos) {
            std::string s(1, take());
            tok_ = {Token::Symbol, s, tok_.line, tok_.column};
            return;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
    }

    void skip_ws_and_comments() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                take();
            } else if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') take();
            } else {
                break;
            }
        }
    }

    char take() {
        char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    const std::string& src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token tok_{};
};

class Parser {
public:
    explicit Parser(const std::string& src) : lex_(src) {}

    CmdPtr parse_program() {
        CmdPtr c = parse_seq();
        expect_end();
        return c;
    }

    ExprPtr parse_expression() {
        ExprPtr e = parse_expr(1);
        expect_end();
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) {
        const auto& t = lex_.peek();
        throw ParseError(msg + (t.kind == Token::End ? " (at end of input)"
                                                     : " (found '" + t.text + "')"),
                         t.line, t.column);
    }

    void expect_end() {
        if (lex_.peek().kind != Token::End) fail("trailing input");
    }

    bool accept_symbol(const std::string& s) {
        if (lex_.peek().kind == Token::Symbol && lex_.peek().text == s) {
            lex_.next();
            return true;
        }
        return false;
    }
    void expect_symbol(const std::string& s) {
        if (!accept_symbol(s)) fail("expected '" + s + "'");
    }
    bool accept_keyword(const std::string& s) {
        if (lex_.peek().kind == Token::Keyword && lex_.peek().text == s) {
            lex_.next();
            return true;
        }
        return false;
    }
    void expect_keyword(const std::string& s) {
        if (!accept_keyword(s)) fail("expected '" + s + "'");
    }
    std::string expect_ident() {
        if (lex_.peek().kind != Token::Ident) fail("expected identifier");
        return lex_.next().text;
    }

    CmdPtr parse_seq() {
        std::vector<CmdPtr> parts;
        parts.push_back(parse_atom());
        while (accept_symbol(";")) parts.push_back(parse_atom());
        CmdPtr c = parts.back();
        for (size_t i = parts.size() - 1; i-- > 0;) c = c_seq(parts[i], c);
        return c;
    }

    CmdPtr parse_atom() {
        if (accept_keyword("skip")) return c_skip();
        if (accept_keyword("if")) {
            ExprPtr cond = parse_expr(1);
            expect_keyword("then");
            CmdPtr t = parse_seq();
            expect_keyword("else");
            CmdPtr f = parse_seq();
            expect_keyword("fi");
            return c_if(cond, t, f);
        }
        if (accept_keyword("while")) {
            ExprPtr cond = parse_expr(1);
            expect_keyword("do");
            CmdPtr body = parse_seq();
            expect_keyword("od");
            return c_while(cond, body);
        }
        if (accept_keyword("acquire")) {
            expect_symbol("(");
            std::string k = expect_ident();
            expect_symbol(")");
            return c_acquire(k);
        }
        if (accept_keyword("release")) {
            expect_symbol("(");
            std::string k = expect_ident();
            expect_symbol(")");
            return c_release(k);
        }
        if (lex_.peek().kind == Token::Ident) {
            std::string v = lex_.next().text;
            expect_symbol(":=");
            return c_assign(v, parse_expr(1));
        }
        fail("expected command");
    }

    // Precedence climbing over the fixed operator table.
    ExprPtr parse_expr(int min_prec) {
        ExprPtr lhs = parse_primary();
        for (;;) {
            const auto& t = lex_.peek();
            BinOp op;
            if (t.kind != Token::Symbol || !op_from_name(t.text, op)) break;
            int prec = op_precedence(op);
            if (prec < min_prec) break;
            lex_.next();
            ExprPtr rhs = parse_expr(prec + 1);
            lhs = e_bin(op, lhs, rhs);
        }
        return lhs;
    }

    ExprPtr parse_primary() {
        const auto& t = lex_.peek();
        if (t.kind == Token::Number) {
            Token n = lex_.next();
            return e_const(Value{std::stoll(n.text)});
        }
        if (t.kind == Token::Ident) return e_var(lex_.next().text);
        if (accept_symbol("(")) {
            ExprPtr e = parse_expr(1);
            expect_symbol(")");
            return e;
        }
        fail("expected expression");
    }

    Lexer lex_;
};

} // namespace detail

inline CmdPtr parse(const std::string& source_text) {
    return detail::Parser(source_text).parse_program();
}

inline ExprPtr parse_expr_text(const std::string& source_text) {
    return detail::Parser(source_text).parse_expression();
}

} // namespace wrc
