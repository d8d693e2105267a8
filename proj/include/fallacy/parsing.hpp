#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "fallacy/corpus.hpp"

namespace fallacy::parsing {

enum class ParseMode { lenient, strict };
std::string_view to_string(ParseMode m);
ParseMode parse_mode(std::string_view name);

struct AnswerObject {
    std::string fallacy;
    std::optional<std::string> explanation;
    friend bool operator==(const AnswerObject&, const AnswerObject&) = default;
};

/// Lenient: the last object in the reply carrying a "fallacy" key, trying a strict JSON
/// parse and then a tolerant one (single quotes, bare keys and values, trailing commas)
/// per brace span; failing that, the last `fallacy: x` or `Answer: x` line.
/// Strict: the first well-formed JSON object only, no fallbacks.
std::optional<AnswerObject> extract_answer_object(std::string_view raw_reply, ParseMode mode = ParseMode::lenient);

/// Canonical label of `space`, the "No Fallacy" sentinel, or none.
std::optional<std::string> normalize_label(std::string_view raw, const corpus::LabelSpace& space);

struct NormalizedField {
    std::optional<std::string> label;
    /// The field named several labels; the first normalizable one was kept.
    bool multi_label = false;
};

/// normalize_label on the whole field, then on its parts split at , ; / & and at
/// standalone "and"/"or".
NormalizedField normalize_field(std::string_view field, const corpus::LabelSpace& space);

enum class OutcomeKind { prediction, no_fallacy, out_of_space, unparseable };
std::string_view to_string(OutcomeKind k);
OutcomeKind parse_outcome_kind(std::string_view name);

struct ParsedOutcome {
    OutcomeKind kind = OutcomeKind::unparseable;
    /// Canonical label for predictions, the raw field for out_of_space, else empty.
    std::string label;
    std::string raw_reply;
    std::optional<std::string> extracted_field;
    bool multi_label = false;

    bool is_failure() const { return kind != OutcomeKind::prediction; }
};

/// Total mapping from an extraction result to an outcome. "No Fallacy" is a prediction
/// when the space admits it and a no_fallacy failure otherwise. An empty field is unparseable.
ParsedOutcome classify_outcome(const std::optional<AnswerObject>& extracted, const corpus::LabelSpace& space,
                               std::string raw_reply = {});

/// extract_answer_object followed by classify_outcome.
ParsedOutcome parse_reply(std::string_view raw_reply, const corpus::LabelSpace& space,
                          ParseMode mode = ParseMode::lenient);

}  // namespace fallacy::parsing
