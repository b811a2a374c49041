#pragma once

// Shared helpers for the text formats (body asset, pose library, config).

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace forge::text {

/// Shortest representation that parses back to the identical double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

template <typename Int>
inline bool parse_int(std::string_view s, Int& out) {
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        if (i >= s.size()) break;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
        out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

/// Line cursor over a whole file that skips blank lines and '#' comments and
/// remembers 1-based line numbers for error messages.
class LineReader {
public:
    LineReader(std::string content, std::string source) : content_(std::move(content)), source_(std::move(source)) {}

    /// Next significant line, trimmed. False at end of input.
    bool next(std::string_view& line) {
        while (pos_ < content_.size()) {
            const auto nl = content_.find('\n', pos_);
            const auto end = nl == std::string::npos ? content_.size() : nl;
            std::string_view raw(content_.data() + pos_, end - pos_);
            pos_ = end + 1;
            ++line_no_;
            raw = trim(raw);
            if (raw.empty() || raw.front() == '#') continue;
            line = raw;
            return true;
        }
        return false;
    }

    /// Peek without consuming.
    bool peek(std::string_view& line) {
        const auto save_pos = pos_;
        const auto save_line = line_no_;
        const bool ok = next(line);
        pos_ = save_pos;
        line_no_ = save_line;
        return ok;
    }

    int line_no() const { return line_no_; }
    const std::string& source() const { return source_; }
    std::string where() const { return source_ + ":" + std::to_string(line_no_); }

private:
    std::string content_;
    std::string source_;
    std::size_t pos_ = 0;
    int line_no_ = 0;
};

}  // namespace forge::text
