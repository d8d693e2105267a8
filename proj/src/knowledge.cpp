#include "fallacy/knowledge.hpp"

#include "fallacy/error.hpp"

namespace fallacy::knowledge {

std::string_view to_string(DefinitionStyle s) {
    return s == DefinitionStyle::formal ? "formal" : "informal";
}

DefinitionStyle parse_style(std::string_view name) {
    const std::string n = text::to_lower(text::trim(name));
    if (n == "informal") return DefinitionStyle::informal;
    if (n == "formal") return DefinitionStyle::formal;
    throw ConfigError("unknown definition style: " + std::string(name));
}

DefinitionRegistry DefinitionRegistry::load(const std::filesystem::path& data_dir) {
    DefinitionRegistry reg;
    for (const auto& r : read_jsonl(data_dir / "definitions.jsonl")) {
        FallacyDefinition d;
        d.label = r.at("label").get<std::string>();
        const std::string scope = r.value("scope", std::string("shared"));
        if (scope != "shared") d.dataset = corpus::parse_dataset(scope);
        d.style = parse_style(r.value("style", std::string("informal")));
        d.text = text::trim(r.at("text").get<std::string>());
        if (d.text.empty()) throw SchemaError("empty definition for " + d.label);
        reg.add(std::move(d));
    }
    return reg;
}

void DefinitionRegistry::add(FallacyDefinition def) {
    std::string scope = def.dataset ? std::string(corpus::to_string(*def.dataset)) : std::string();
    auto key = std::make_tuple(def.label, std::move(scope), def.style);
    if (entries_.count(key)) throw SchemaError("duplicate definition for " + def.label);
    entries_.emplace(std::move(key), std::move(def));
}

std::optional<FallacyDefinition> DefinitionRegistry::lookup(std::string_view label, corpus::DatasetId dataset,
                                                            DefinitionStyle style) const {
    const std::string l(label);
    if (auto it = entries_.find({l, std::string(corpus::to_string(dataset)), style}); it != entries_.end())
        return it->second;
    if (auto it = entries_.find({l, std::string(), style}); it != entries_.end()) return it->second;
    return std::nullopt;
}

std::vector<FallacyDefinition> get_definitions(const DefinitionRegistry& registry, const corpus::LabelSpace& space,
                                               DefinitionStyle style) {
    if (style == DefinitionStyle::formal && space.dataset() != corpus::DatasetId::mafalda)
        throw ConfigError("formal definitions are only available for mafalda, not " +
                          std::string(corpus::to_string(space.dataset())));
    std::vector<FallacyDefinition> out;
    for (const auto& label : space.labels()) {
        auto def = registry.lookup(label, space.dataset(), style);
        if (!def)
            throw ConfigError("no " + std::string(to_string(style)) + " definition for '" + label + "' in " +
                              std::string(corpus::to_string(space.dataset())));
        out.push_back(std::move(*def));
    }
    return out;
}

std::string render_definition_block(std::span<const FallacyDefinition> definitions) {
    if (definitions.empty()) throw ContractViolation("definition block needs at least one definition");
    std::string out;
    for (std::size_t i = 0; i < definitions.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(i + 1) + ". " + definitions[i].label + " is " + definitions[i].text;
    }
    return out;
}

}  // namespace fallacy::knowledge
