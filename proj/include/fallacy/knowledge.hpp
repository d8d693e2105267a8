#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "fallacy/corpus.hpp"

namespace fallacy::knowledge {

enum class DefinitionStyle { informal, formal };

std::string_view to_string(DefinitionStyle s);
DefinitionStyle parse_style(std::string_view name);

struct FallacyDefinition {
    std::string label;
    /// Dataset the text is scoped to; empty when shared across datasets.
    std::optional<corpus::DatasetId> dataset;
    DefinitionStyle style = DefinitionStyle::informal;
    std::string text;
};

class DefinitionRegistry {
public:
    /// Reads `definitions.jsonl` from `data_dir`.
    static DefinitionRegistry load(const std::filesystem::path& data_dir);

    void add(FallacyDefinition def);

    /// Dataset-scoped entry if present, else the shared entry.
    std::optional<FallacyDefinition> lookup(std::string_view label, corpus::DatasetId dataset,
                                            DefinitionStyle style) const;

    std::size_t size() const noexcept { return entries_.size(); }

private:
    // key: (label, scope or "", style)
    std::map<std::tuple<std::string, std::string, DefinitionStyle>, FallacyDefinition> entries_;
};

/// Definitions for every fallacy label of `space`, in label order.
/// ConfigError when the formal style is requested for a dataset other than mafalda,
/// or when a label has no definition.
std::vector<FallacyDefinition> get_definitions(const DefinitionRegistry& registry, const corpus::LabelSpace& space,
                                               DefinitionStyle style);

/// "1. <Label> is <text> 2. <Label> is <text> ...". Empty input is a ContractViolation.
std::string render_definition_block(std::span<const FallacyDefinition> definitions);

}  // namespace fallacy::knowledge
