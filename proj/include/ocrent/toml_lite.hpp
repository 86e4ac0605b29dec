#pragma once

// Minimal TOML subset parser, enough for the sweep config files: comments,
// [section] headers (dotted allowed), key = value lines with basic strings,
// multiline """strings""", integers, floats, booleans, arrays, and inline
// tables. Dates, dotted keys outside headers, and [[arrays of tables]] are
// out of scope.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ocrent/errors.hpp"

namespace ocrent::toml_lite {

class Value;
using Table = std::map<std::string, Value>;
using Array = std::vector<Value>;

class Value {
public:
    Value() : data_(std::monostate{}) {}
    Value(std::string v) : data_(std::move(v)) {}
    Value(std::int64_t v) : data_(v) {}
    Value(double v) : data_(v) {}
    Value(bool v) : data_(v) {}
    Value(Array v) : data_(std::move(v)) {}
    Value(Table v) : data_(std::move(v)) {}

    bool is_string() const { return std::holds_alternative<std::string>(data_); }
    bool is_integer() const { return std::holds_alternative<std::int64_t>(data_); }
    bool is_float() const { return std::holds_alternative<double>(data_); }
    bool is_bool() const { return std::holds_alternative<bool>(data_); }
    bool is_array() const { return std::holds_alternative<Array>(data_); }
    bool is_table() const { return std::holds_alternative<Table>(data_); }

    const std::string& as_string() const { return get<std::string>("string"); }
    std::int64_t as_integer() const { return get<std::int64_t>("integer"); }
    bool as_bool() const { return get<bool>("boolean"); }
    const Array& as_array() const { return get<Array>("array"); }
    const Table& as_table() const { return get<Table>("table"); }

    // Integers promote to floats.
    double as_float() const {
        if (is_integer()) return static_cast<double>(as_integer());
        return get<double>("float");
    }

private:
    template <typename T>
    const T& get(const char* name) const {
        if (!std::holds_alternative<T>(data_)) {
            throw ValidationError(std::string("TOML value is not a ") + name);
        }
        return std::get<T>(data_);
    }

    std::variant<std::monostate, std::string, std::int64_t, double, bool, Array, Table> data_;
};

namespace detail {

class Parser {
public:
    explicit Parser(const std::string& text) : text_(text) {}

    Table parse() {
        Table root;
        Table* current = &root;
        skip_trivia();
        while (pos_ < text_.size()) {
            if (text_[pos_] == '[') {
                current = enter_section(root);
            } else {
                parse_key_value(*current);
            }
            skip_trivia();
        }
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& message) const {
        throw ParseError("TOML: " + message, pos_);
    }

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }

    void skip_spaces() {
        while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

    void skip_comment() {
        if (!at_end() && peek() == '#') {
            while (!at_end() && peek() != '\n') ++pos_;
        }
    }

    // Spaces, newlines and comments between top-level items.
    void skip_trivia() {
        while (!at_end()) {
            skip_spaces();
            skip_comment();
            if (!at_end() && (peek() == '\n' || peek() == '\r')) {
                ++pos_;
                continue;
            }
            break;
        }
    }

    void expect_line_end() {
        skip_spaces();
        skip_comment();
        if (at_end()) return;
        if (peek() == '\n' || peek() == '\r') return;
        fail("unexpected trailing characters on line");
    }

    static bool is_bare_key_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
    }

    std::string parse_key() {
        skip_spaces();
        if (at_end()) fail("expected key");
        if (peek() == '"') return parse_basic_string();
        std::size_t start = pos_;
        while (!at_end() && is_bare_key_char(peek())) ++pos_;
        if (pos_ == start) fail("expected key");
        return text_.substr(start, pos_ - start);
    }

    Table* enter_section(Table& root) {
        ++pos_;  // '['
        Table* t = &root;
        while (true) {
            std::string key = parse_key();
            Value& slot = (*t)[key];
            if (!slot.is_table()) slot = Value(Table{});
            t = const_cast<Table*>(&slot.as_table());
            skip_spaces();
            if (!at_end() && peek() == '.') {
                ++pos_;
                continue;
            }
            break;
        }
        if (at_end() || peek() != ']') fail("expected ']' after section name");
        ++pos_;
        expect_line_end();
        return t;
    }

    void parse_key_value(Table& table) {
        std::string key = parse_key();
        skip_spaces();
        if (at_end() || peek() != '=') fail("expected '=' after key '" + key + "'");
        ++pos_;
        skip_spaces();
        table[key] = parse_value();
        expect_line_end();
    }

    Value parse_value() {
        skip_spaces();
        if (at_end()) fail("expected value");
        const char c = peek();
        if (c == '"') {
            if (text_.compare(pos_, 3, "\"\"\"") == 0) return Value(parse_multiline_string());
            return Value(parse_basic_string());
        }
        if (c == '[') return Value(parse_array());
        if (c == '{') return Value(parse_inline_table());
        if (text_.compare(pos_, 4, "true") == 0) {
            pos_ += 4;
            return Value(true);
        }
        if (text_.compare(pos_, 5, "false") == 0) {
            pos_ += 5;
            return Value(false);
        }
        return parse_number();
    }

    std::string parse_basic_string() {
        ++pos_;  // opening quote
        std::string out;
        while (true) {
            if (at_end() || peek() == '\n') fail("unterminated string");
            char c = text_[pos_++];
            if (c == '"') break;
            if (c == '\\') {
                if (at_end()) fail("unterminated escape");
                char e = text_[pos_++];
                switch (e) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case 'r': out += '\r'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: fail(std::string("unsupported escape \\") + e);
                }
            } else {
                out += c;
            }
        }
        return out;
    }

    std::string parse_multiline_string() {
        pos_ += 3;  // opening """
        // A newline immediately after the opening delimiter is trimmed.
        if (!at_end() && peek() == '\r') ++pos_;
        if (!at_end() && peek() == '\n') ++pos_;
        std::string out;
        while (true) {
            if (at_end()) fail("unterminated multiline string");
            if (text_.compare(pos_, 3, "\"\"\"") == 0) {
                pos_ += 3;
                break;
            }
            out += text_[pos_++];
        }
        return out;
    }

    Array parse_array() {
        ++pos_;  // '['
        Array items;
        while (true) {
            skip_trivia();
            if (at_end()) fail("unterminated array");
            if (peek() == ']') {
                ++pos_;
                break;
            }
            items.push_back(parse_value());
            skip_trivia();
            if (!at_end() && peek() == ',') {
                ++pos_;
                continue;
            }
            if (!at_end() && peek() == ']') {
                ++pos_;
                break;
            }
            fail("expected ',' or ']' in array");
        }
        return items;
    }

    Table parse_inline_table() {
        ++pos_;  // '{'
        Table t;
        skip_spaces();
        if (!at_end() && peek() == '}') {
            ++pos_;
            return t;
        }
        while (true) {
            std::string key = parse_key();
            skip_spaces();
            if (at_end() || peek() != '=') fail("expected '=' in inline table");
            ++pos_;
            t[key] = parse_value();
            skip_spaces();
            if (!at_end() && peek() == ',') {
                ++pos_;
                skip_spaces();
                continue;
            }
            if (!at_end() && peek() == '}') {
                ++pos_;
                break;
            }
            fail("expected ',' or '}' in inline table");
        }
        return t;
    }

    Value parse_number() {
        std::size_t start = pos_;
        bool is_float = false;
        if (!at_end() && (peek() == '+' || peek() == '-')) ++pos_;
        while (!at_end()) {
            char c = peek();
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '_') {
                ++pos_;
            } else if (c == '.' || c == 'e' || c == 'E' || c == '+' || c == '-') {
                is_float = true;
                ++pos_;
            } else {
                break;
            }
        }
        std::string raw = text_.substr(start, pos_ - start);
        raw.erase(std::remove(raw.begin(), raw.end(), '_'), raw.end());
        if (raw.empty() || raw == "+" || raw == "-") fail("expected a value");
        try {
            std::size_t consumed = 0;
            if (is_float) {
                const double v = std::stod(raw, &consumed);
                if (consumed != raw.size()) fail("malformed number '" + raw + "'");
                return Value(v);
            }
            const auto v = static_cast<std::int64_t>(std::stoll(raw, &consumed));
            if (consumed != raw.size()) fail("malformed number '" + raw + "'");
            return Value(v);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception&) {
            fail("malformed number '" + raw + "'");
        }
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline Table parse(const std::string& text) { return detail::Parser(text).parse(); }

inline Table parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open TOML file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

// Dotted-path lookup ("sweep.images"); null when absent.
inline const Value* find(const Table& root, const std::string& dotted_path) {
    const Table* t = &root;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = dotted_path.find('.', start);
        const std::string key = dotted_path.substr(start, dot - start);
        const auto it = t->find(key);
        if (it == t->end()) return nullptr;
        if (dot == std::string::npos) return &it->second;
        if (!it->second.is_table()) return nullptr;
        t = &it->second.as_table();
        start = dot + 1;
    }
}

}  // namespace ocrent::toml_lite
