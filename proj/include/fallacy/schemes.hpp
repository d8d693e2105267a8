#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fallacy/corpus.hpp"

namespace fallacy::schemes {

enum class Scheme { wod, wd, dg, gfa, gfa_w, pc1, pc2, cot };

inline constexpr std::array<Scheme, 8> kAllSchemes = {Scheme::wod, Scheme::wd,  Scheme::dg,  Scheme::gfa,
                                                      Scheme::gfa_w, Scheme::pc1, Scheme::pc2, Scheme::cot};

/// Lower-case identifier, also the template directory name ("gfa_w").
std::string_view to_string(Scheme s);
/// Accepts identifiers case-insensitively, with '-' or '_' ("GFA-W", "gfa_w").
Scheme parse_scheme(std::string_view name);
std::string_view display_name(Scheme s);
int round_count(Scheme s);

struct SchemeId {
    Scheme value = Scheme::wod;
    int fewshot_k = 0;

    /// "gfa_w" for zero-shot, "gfa_w+2shot" otherwise.
    std::string token() const;
    friend bool operator==(const SchemeId&, const SchemeId&) = default;
};

enum class Role { system, user, assistant };
std::string_view to_string(Role r);

struct Turn {
    Role role;
    std::string content;
    friend bool operator==(const Turn&, const Turn&) = default;
};

/// Chat history. Roles alternate user/assistant after an optional leading system turn;
/// appends that break alternation throw ContractViolation.
class Transcript {
public:
    void add_system(std::string content);
    void add_user(std::string content);
    void add_assistant(std::string content);

    const std::vector<Turn>& turns() const noexcept { return turns_; }
    std::size_t assistant_count() const;
    bool ends_with_user() const { return !turns_.empty() && turns_.back().role == Role::user; }
    /// [{role, content}, ...] as sent on the wire.
    json to_json() const;

private:
    std::vector<Turn> turns_;
};

struct RoundTemplate {
    int index = 1;
    std::string template_text;
    bool expects_structured_answer = false;
};

struct SchemePlan {
    SchemeId scheme;
    std::vector<RoundTemplate> rounds;
    std::map<std::string, std::string> placeholder_bindings;
    /// Prepended to round 1, separated by a blank line. Empty for zero-shot.
    std::string fewshot_block;
};

/// Prompt templates keyed by (scheme, round, dataset). A dataset-specific file
/// `r<k>.<dataset>.txt` overrides the default `r<k>.txt`.
class TemplateStore {
public:
    /// Loads `<data_dir>/templates/<scheme>/r<k>[.<dataset>].txt`. One trailing newline is
    /// stripped. Throws TemplateError when a scheme lacks a default for any of its rounds.
    static TemplateStore load(const std::filesystem::path& data_dir);

    void set(Scheme scheme, int round, std::optional<corpus::DatasetId> dataset, std::string text);
    const std::string& get(Scheme scheme, int round, corpus::DatasetId dataset) const;

    /// Relative file name ("wod/r1.txt") -> sha256 of the loaded text.
    std::map<std::string, std::string> checksums() const;

private:
    std::map<std::string, std::string> texts_;
};

/// "1. A, 2. B, ..." over the fallacy labels.
std::string fallacy_list(const corpus::LabelSpace& space);

/// Substitutes `{{name}}` markers. Throws TemplateError naming the first marker without a binding.
std::string render_template(std::string_view text, const std::map<std::string, std::string>& bindings);

/// Binds the example and dataset phrases into the scheme's rounds. `definitions` is the
/// rendered definition block and must be present exactly when the scheme is WD.
SchemePlan plan_scheme(const TemplateStore& templates, const SchemeId& scheme, const corpus::DatasetSpec& spec,
                       const corpus::FallacyExample& example, const std::optional<std::string>& definitions,
                       std::string fewshot_block = {});

/// User message for round `round_index` (1-based). The transcript must hold exactly
/// round_index - 1 assistant replies.
std::string render_round(const SchemePlan& plan, int round_index, const Transcript& transcript);

using Demonstration = std::pair<corpus::FallacyExample, std::string>;

/// One stanza per demonstration, separated by blank lines:
///   Example: <discourse>
///   Answer: {"fallacy": "<label>"}
/// Demonstrations must cover every fallacy label of `space` the same number of times.
std::string build_fewshot_block(std::span<const Demonstration> demonstrations, const corpus::LabelSpace& space);

}  // namespace fallacy::schemes
