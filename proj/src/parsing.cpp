#include "fallacy/parsing.hpp"

#include <cctype>
#include <regex>
#include <utility>
#include <vector>

#include "fallacy/error.hpp"

namespace fallacy::parsing {

std::string_view to_string(ParseMode m) { return m == ParseMode::strict ? "strict" : "lenient"; }

ParseMode parse_mode(std::string_view name) {
    const std::string n = text::to_lower(text::trim(name));
    if (n == "lenient") return ParseMode::lenient;
    if (n == "strict") return ParseMode::strict;
    throw ConfigError("unknown parse mode: " + std::string(name));
}

std::string_view to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::prediction: return "prediction";
        case OutcomeKind::no_fallacy: return "no_fallacy";
        case OutcomeKind::out_of_space: return "out_of_space";
        case OutcomeKind::unparseable: return "unparseable";
    }
    return "unparseable";
}

OutcomeKind parse_outcome_kind(std::string_view name) {
    for (auto k : {OutcomeKind::prediction, OutcomeKind::no_fallacy, OutcomeKind::out_of_space, OutcomeKind::unparseable})
        if (to_string(k) == name) return k;
    throw SchemaError("unknown outcome kind: " + std::string(name));
}

namespace {

using Span = std::pair<std::size_t, std::size_t>;  // [begin, end) including braces

/// Balanced brace spans at nesting depth zero. Double-quoted strings inside a span are
/// skipped. An unclosed '{' is treated as prose and scanning resumes after it.
std::vector<Span> brace_spans(std::string_view s, std::size_t from = 0, std::size_t to = std::string_view::npos) {
    if (to > s.size()) to = s.size();
    std::vector<Span> spans;
    std::size_t i = from;
    while (i < to) {
        const std::size_t open = s.find('{', i);
        if (open == std::string_view::npos || open >= to) break;
        int depth = 0;
        bool in_str = false;
        bool esc = false;
        std::size_t j = open;
        std::size_t close = std::string_view::npos;
        for (; j < to; ++j) {
            const char c = s[j];
            if (in_str) {
                if (esc) esc = false;
                else if (c == '\\') esc = true;
                else if (c == '"') in_str = false;
                continue;
            }
            if (c == '"') in_str = true;
            else if (c == '{') ++depth;
            else if (c == '}' && --depth == 0) {
                close = j;
                break;
            }
        }
        if (close == std::string_view::npos) {
            i = open + 1;
            continue;
        }
        spans.emplace_back(open, close + 1);
        i = close + 1;
    }
    return spans;
}

std::string value_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return {};
    if (v.is_array()) {
        std::vector<std::string> parts;
        for (const auto& e : v) parts.push_back(value_text(e));
        return text::join(parts, ", ");
    }
    return v.dump();
}

std::optional<AnswerObject> from_json_object(const json& obj, bool exact_key) {
    std::optional<AnswerObject> out;
    for (const auto& [k, v] : obj.items()) {
        const bool is_fallacy = exact_key ? k == "fallacy" : text::to_lower(text::trim(k)) == "fallacy";
        if (is_fallacy) {
            if (!out) out.emplace();
            out->fallacy = value_text(v);
        }
    }
    if (!out) return out;
    for (const auto& [k, v] : obj.items()) {
        const bool is_expl = exact_key ? k == "explanation" : text::to_lower(text::trim(k)) == "explanation";
        if (is_expl && !v.is_null()) out->explanation = value_text(v);
    }
    return out;
}

// ---- tolerant flat-object parser

class LenientObject {
public:
    explicit LenientObject(std::string_view span) : s_(span) {}

    std::optional<std::vector<std::pair<std::string, std::string>>> parse() {
        if (s_.size() < 2 || s_.front() != '{' || s_.back() != '}') return std::nullopt;
        pos_ = 1;
        std::vector<std::pair<std::string, std::string>> fields;
        while (true) {
            skip_ws();
            if (at_end()) return fields;
            auto key = read_key();
            if (!key) return std::nullopt;
            skip_ws();
            if (pos_ >= last() || s_[pos_] != ':') return std::nullopt;
            ++pos_;
            skip_ws();
            auto value = read_value();
            if (!value) return std::nullopt;
            fields.emplace_back(std::move(*key), std::move(*value));
            skip_ws();
            if (at_end()) return fields;
            if (s_[pos_] != ',') return std::nullopt;
            ++pos_;
        }
    }

private:
    std::size_t last() const { return s_.size() - 1; }  // index of the closing brace
    bool at_end() const { return pos_ >= last(); }
    void skip_ws() {
        while (pos_ < last() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    /// Closing quote of a string opened at pos_, accepted only when followed by one of `follow`.
    std::optional<std::string> read_quoted(std::string_view follow) {
        const char q = s_[pos_];
        std::string out;
        for (std::size_t i = pos_ + 1; i < last(); ++i) {
            const char c = s_[i];
            if (c == '\\' && i + 1 < last()) {
                const char n = s_[++i];
                switch (n) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case 'r': out += '\r'; break;
                    default: out += n;
                }
                continue;
            }
            if (c == q) {
                std::size_t k = i + 1;
                while (k < s_.size() && std::isspace(static_cast<unsigned char>(s_[k]))) ++k;
                if (k < s_.size() && follow.find(s_[k]) != std::string_view::npos) {
                    pos_ = i + 1;
                    return out;
                }
            }
            out += c;
        }
        return std::nullopt;
    }

    std::optional<std::string> read_key() {
        if (s_[pos_] == '"' || s_[pos_] == '\'') return read_quoted(":");
        const std::size_t colon = s_.find(':', pos_);
        if (colon == std::string_view::npos || colon >= last()) return std::nullopt;
        std::string key = text::trim(s_.substr(pos_, colon - pos_));
        if (key.empty() || key.find_first_of(",{}\n\"'") != std::string::npos) return std::nullopt;
        pos_ = colon;
        return key;
    }

    /// True when a `key:` follows position `i` (just after a comma).
    bool key_follows(std::size_t i) const {
        static const std::regex key_re(R"(^\s*["']?[A-Za-z_][A-Za-z0-9_ ]*["']?\s*:)");
        const auto rest = s_.substr(i, std::min<std::size_t>(64, last() - i));
        return std::regex_search(std::string(rest), key_re);
    }

    std::optional<std::string> read_value() {
        if (pos_ >= last()) return std::nullopt;
        const char c = s_[pos_];
        if (c == '"' || c == '\'') return read_quoted(",}");
        if (c == '{' || c == '[') return std::nullopt;
        std::size_t i = pos_;
        for (; i < last(); ++i)
            if (s_[i] == ',' && key_follows(i + 1)) break;
        std::string v = text::trim(s_.substr(pos_, i - pos_));
        pos_ = i;
        if (v.empty()) return std::nullopt;
        return v;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

std::optional<AnswerObject> lenient_object(std::string_view span) {
    auto fields = LenientObject(span).parse();
    if (!fields) return std::nullopt;
    std::optional<AnswerObject> out;
    for (const auto& [k, v] : *fields)
        if (text::to_lower(k) == "fallacy") {
            if (!out) out.emplace();
            out->fallacy = v;
        }
    if (!out) return out;
    for (const auto& [k, v] : *fields)
        if (text::to_lower(k) == "explanation") out->explanation = v;
    return out;
}

/// Candidates from the spans of [from, to), in textual order. A span without a
/// candidate of its own contributes the candidates nested inside it.
void collect_candidates(std::string_view s, std::size_t from, std::size_t to, std::vector<AnswerObject>& out) {
    for (const auto& [b, e] : brace_spans(s, from, to)) {
        const std::string_view span = s.substr(b, e - b);
        std::optional<AnswerObject> found;
        const json parsed = json::parse(span, nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) found = from_json_object(parsed, false);
        if (!found && (parsed.is_discarded() || !parsed.is_object())) found = lenient_object(span);
        if (found) out.push_back(std::move(*found));
        else collect_candidates(s, b + 1, e - 1, out);
    }
}

std::optional<AnswerObject> fallback_line(std::string_view reply) {
    static const std::regex line_re(R"(^[\s>#*_-]*(fallacy|answer)[\s*_]*[:=]\s*(.*)$)", std::regex::icase);
    std::optional<AnswerObject> out;
    for (const auto& line : text::split_lines(reply)) {
        std::smatch m;
        if (!std::regex_match(line, m, line_re)) continue;
        std::string value = text::trim(m[2].str());
        if (value.empty()) continue;
        out = AnswerObject{std::move(value), std::nullopt};
    }
    return out;
}

bool is_strippable_prefix(std::string_view s, std::size_t& len) {
    static constexpr std::string_view curly[] = {"\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98", "\xE2\x80\x99"};
    if (s.empty()) return false;
    if (s[0] == '"' || s[0] == '\'' || s[0] == '`' || s[0] == '*' || std::isspace(static_cast<unsigned char>(s[0]))) {
        len = 1;
        return true;
    }
    for (auto q : curly)
        if (s.substr(0, q.size()) == q) {
            len = q.size();
            return true;
        }
    return false;
}

bool is_strippable_suffix(std::string_view s, std::size_t& len) {
    static constexpr std::string_view curly[] = {"\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98", "\xE2\x80\x99"};
    if (s.empty()) return false;
    const char c = s.back();
    if (c == '"' || c == '\'' || c == '`' || c == '*' || c == '.' || std::isspace(static_cast<unsigned char>(c))) {
        len = 1;
        return true;
    }
    for (auto q : curly)
        if (s.size() >= q.size() && s.substr(s.size() - q.size()) == q) {
            len = q.size();
            return true;
        }
    return false;
}

/// trim, strip wrapping quotes/asterisks, case-fold, collapse whitespace, strip trailing periods.
std::string clean(std::string_view raw) {
    std::string_view s = raw;
    std::size_t n = 0;
    while (is_strippable_prefix(s, n)) s.remove_prefix(n);
    while (is_strippable_suffix(s, n)) s.remove_suffix(n);
    return text::collapse_whitespace(text::to_lower(s));
}

std::pair<std::string, std::string> split_parenthetical(const std::string& label) {
    const auto open = label.find(" (");
    if (open == std::string::npos || label.back() != ')') return {};
    return {label.substr(0, open), label.substr(open + 2, label.size() - open - 3)};
}

}  // namespace

std::optional<AnswerObject> extract_answer_object(std::string_view raw_reply, ParseMode mode) {
    if (mode == ParseMode::strict) {
        for (const auto& [b, e] : brace_spans(raw_reply)) {
            const json parsed = json::parse(raw_reply.substr(b, e - b), nullptr, false);
            if (parsed.is_discarded() || !parsed.is_object()) continue;
            return from_json_object(parsed, true);
        }
        return std::nullopt;
    }
    std::vector<AnswerObject> candidates;
    collect_candidates(raw_reply, 0, raw_reply.size(), candidates);
    if (!candidates.empty()) return candidates.back();
    return fallback_line(raw_reply);
}

std::optional<std::string> normalize_label(std::string_view raw, const corpus::LabelSpace& space) {
    const std::string key = clean(raw);
    if (key.empty()) return std::nullopt;
    if (key == "no fallacy" || key == "none" || key == "no_fallacy") return std::string(corpus::kNoFallacy);
    for (const auto& l : space.labels())
        if (clean(l) == key) return l;
    for (const auto& [canonical, forms] : space.aliases())
        for (const auto& f : forms)
            if (clean(f) == key) return canonical;
    for (const auto& l : space.labels()) {
        const auto [head, inner] = split_parenthetical(l);
        if (!head.empty() && (clean(head) == key || clean(inner) == key)) return l;
    }
    return std::nullopt;
}

NormalizedField normalize_field(std::string_view field, const corpus::LabelSpace& space) {
    if (auto whole = normalize_label(field, space)) return {std::move(whole), false};
    static const std::regex punct_re(R"([,;/&])");
    static const std::regex word_re(R"(\s+(?:and|or)\s+)", std::regex::icase);
    const std::string f(field);
    std::vector<std::string> parts;
    for (std::sregex_token_iterator it(f.begin(), f.end(), punct_re, -1), end; it != end; ++it) {
        const std::string piece = text::trim(it->str());
        if (piece.empty()) continue;
        if (normalize_label(piece, space)) {
            parts.push_back(piece);
            continue;
        }
        for (std::sregex_token_iterator w(piece.begin(), piece.end(), word_re, -1); w != end; ++w) {
            const std::string sub = text::trim(w->str());
            if (!sub.empty()) parts.push_back(sub);
        }
    }
    if (parts.size() < 2) return {};
    for (const auto& p : parts)
        if (auto l = normalize_label(p, space)) return {std::move(l), true};
    return {};
}

ParsedOutcome classify_outcome(const std::optional<AnswerObject>& extracted, const corpus::LabelSpace& space,
                               std::string raw_reply) {
    ParsedOutcome out;
    out.raw_reply = std::move(raw_reply);
    if (!extracted) return out;
    out.extracted_field = extracted->fallacy;
    if (clean(extracted->fallacy).empty()) return out;

    const NormalizedField nf = normalize_field(extracted->fallacy, space);
    out.multi_label = nf.multi_label;
    if (!nf.label) {
        out.kind = OutcomeKind::out_of_space;
        out.label = extracted->fallacy;
    } else if (*nf.label == corpus::kNoFallacy && !space.allows_no_fallacy()) {
        out.kind = OutcomeKind::no_fallacy;
    } else {
        out.kind = OutcomeKind::prediction;
        out.label = *nf.label;
    }
    return out;
}

ParsedOutcome parse_reply(std::string_view raw_reply, const corpus::LabelSpace& space, ParseMode mode) {
    auto outcome = classify_outcome(extract_answer_object(raw_reply, mode), space, std::string(raw_reply));
    if (outcome.multi_label)
        log_note("reply names several labels; kept '" + outcome.label + "' from '" + *outcome.extracted_field + "'");
    return outcome;
}

}  // namespace fallacy::parsing
