#include "fallacy/schemes.hpp"

#include <algorithm>
#include <regex>

#include "fallacy/error.hpp"

namespace fallacy::schemes {

namespace {

struct SchemeInfo {
    Scheme scheme;
    std::string_view id;
    std::string_view display;
    int rounds;
};

constexpr std::array<SchemeInfo, 8> kSchemeInfo = {{
    {Scheme::wod, "wod", "Without Definitions", 1},
    {Scheme::wd, "wd", "With Definitions", 1},
    {Scheme::dg, "dg", "Definition Generation", 2},
    {Scheme::gfa, "gfa", "General Fallacy Analysis", 2},
    {Scheme::gfa_w, "gfa_w", "General Fallacy Analysis with Warm Up", 3},
    {Scheme::pc1, "pc1", "Premises & Conclusion 1", 3},
    {Scheme::pc2, "pc2", "Premises & Conclusion 2", 3},
    {Scheme::cot, "cot", "Zero-shot CoT", 2},
}};

const SchemeInfo& info(Scheme s) {
    for (const auto& i : kSchemeInfo)
        if (i.scheme == s) return i;
    throw ConfigError("unknown scheme");
}

std::string template_key(Scheme scheme, int round, std::optional<corpus::DatasetId> dataset) {
    std::string key = std::string(to_string(scheme)) + "/r" + std::to_string(round);
    if (dataset) key += "." + std::string(corpus::to_string(*dataset));
    return key + ".txt";
}

}  // namespace

std::string_view to_string(Scheme s) { return info(s).id; }
std::string_view display_name(Scheme s) { return info(s).display; }
int round_count(Scheme s) { return info(s).rounds; }

Scheme parse_scheme(std::string_view name) {
    std::string n = text::to_lower(text::trim(name));
    std::replace(n.begin(), n.end(), '-', '_');
    for (const auto& i : kSchemeInfo)
        if (n == i.id) return i.scheme;
    throw ConfigError("unknown scheme: " + std::string(name));
}

std::string SchemeId::token() const {
    std::string t(to_string(value));
    if (fewshot_k > 0) t += "+" + std::to_string(fewshot_k) + "shot";
    return t;
}

std::string_view to_string(Role r) {
    switch (r) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

void Transcript::add_system(std::string content) {
    if (!turns_.empty()) throw ContractViolation("system turn must lead the transcript");
    turns_.push_back({Role::system, std::move(content)});
}

void Transcript::add_user(std::string content) {
    if (ends_with_user()) throw ContractViolation("two consecutive user turns");
    turns_.push_back({Role::user, std::move(content)});
}

void Transcript::add_assistant(std::string content) {
    if (!ends_with_user()) throw ContractViolation("assistant turn must follow a user turn");
    turns_.push_back({Role::assistant, std::move(content)});
}

std::size_t Transcript::assistant_count() const {
    return static_cast<std::size_t>(
        std::count_if(turns_.begin(), turns_.end(), [](const Turn& t) { return t.role == Role::assistant; }));
}

json Transcript::to_json() const {
    json out = json::array();
    for (const auto& t : turns_) out.push_back({{"role", std::string(to_string(t.role))}, {"content", t.content}});
    return out;
}

// ---------------------------------------------------------------- templates

TemplateStore TemplateStore::load(const std::filesystem::path& data_dir) {
    TemplateStore store;
    const auto root = data_dir / "templates";
    static const std::regex name_re(R"(r([0-9]+)(?:\.([a-z0-9_-]+))?\.txt)");
    for (Scheme s : kAllSchemes) {
        const auto dir = root / std::string(to_string(s));
        if (!std::filesystem::is_directory(dir))
            throw TemplateError(std::string(to_string(s)), "missing template directory: " + dir.string());
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir))
            if (entry.is_regular_file()) files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            std::smatch m;
            const std::string fname = f.filename().string();
            if (!std::regex_match(fname, m, name_re)) continue;
            const int round = std::stoi(m[1].str());
            if (round < 1 || round > round_count(s))
                throw TemplateError(fname, "template round out of range for " + std::string(to_string(s)));
            std::optional<corpus::DatasetId> ds;
            if (m[2].matched) ds = corpus::parse_dataset(m[2].str());
            std::string body = read_text(f);
            if (!body.empty() && body.back() == '\n') body.pop_back();
            if (!body.empty() && body.back() == '\r') body.pop_back();
            store.set(s, round, ds, std::move(body));
        }
        for (int r = 1; r <= round_count(s); ++r)
            if (!store.texts_.count(template_key(s, r, std::nullopt)))
                throw TemplateError(template_key(s, r, std::nullopt), "missing default template");
    }
    return store;
}

void TemplateStore::set(Scheme scheme, int round, std::optional<corpus::DatasetId> dataset, std::string text) {
    if (round < 1 || round > round_count(scheme)) throw ContractViolation("template round out of range");
    texts_[template_key(scheme, round, dataset)] = std::move(text);
}

const std::string& TemplateStore::get(Scheme scheme, int round, corpus::DatasetId dataset) const {
    if (auto it = texts_.find(template_key(scheme, round, dataset)); it != texts_.end()) return it->second;
    if (auto it = texts_.find(template_key(scheme, round, std::nullopt)); it != texts_.end()) return it->second;
    throw TemplateError(template_key(scheme, round, std::nullopt), "no template loaded");
}

std::map<std::string, std::string> TemplateStore::checksums() const {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : texts_) out[k] = sha256_hex(v);
    return out;
}

// ---------------------------------------------------------------- rendering

std::string fallacy_list(const corpus::LabelSpace& space) {
    std::string out;
    const auto& labels = space.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(i + 1) + ". " + labels[i];
    }
    return out;
}

std::string render_template(std::string_view text, const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(text.size() * 2);
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t open = text.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        const std::size_t close = text.find("}}", open + 2);
        if (close == std::string_view::npos) throw TemplateError(std::string(text.substr(open)), "unterminated placeholder");
        out.append(text.substr(pos, open - pos));
        const std::string name = text::trim(text.substr(open + 2, close - open - 2));
        auto it = bindings.find(name);
        if (it == bindings.end()) throw TemplateError(name, "unresolved placeholder {{" + name + "}}");
        out += it->second;
        pos = close + 2;
    }
    return out;
}

SchemePlan plan_scheme(const TemplateStore& templates, const SchemeId& scheme, const corpus::DatasetSpec& spec,
                       const corpus::FallacyExample& example, const std::optional<std::string>& definitions,
                       std::string fewshot_block) {
    if (scheme.fewshot_k < 0) throw ConfigError("few-shot k must be non-negative");
    if (scheme.value == Scheme::wd && !definitions)
        throw ConfigError("the WD scheme requires fallacy definitions");
    if (scheme.value != Scheme::wd && definitions)
        throw ConfigError("definitions are only supplied to the WD scheme, not " + std::string(to_string(scheme.value)));
    if (example.dataset != spec.dataset) throw ContractViolation("example does not belong to the dataset spec");

    SchemePlan plan;
    plan.scheme = scheme;
    plan.fewshot_block = std::move(fewshot_block);
    const int n = round_count(scheme.value);
    for (int r = 1; r <= n; ++r)
        plan.rounds.push_back({r, templates.get(scheme.value, r, spec.dataset), r == n});

    auto& b = plan.placeholder_bindings;
    b["num_classes"] = std::to_string(spec.label_space.cardinality());
    b["fallacy_list"] = fallacy_list(spec.label_space);
    b["discourse_type"] = spec.discourse_type_phrase;
    b["discourse"] = example.discourse();
    b["segment"] = spec.segment_phrase;
    b["argument"] = spec.argument_phrase;
    if (definitions) b["fallacy_definitions"] = *definitions;
    return plan;
}

std::string render_round(const SchemePlan& plan, int round_index, const Transcript& transcript) {
    if (round_index < 1 || round_index > static_cast<int>(plan.rounds.size()))
        throw ContractViolation("round index " + std::to_string(round_index) + " out of range");
    if (transcript.assistant_count() != static_cast<std::size_t>(round_index - 1) || transcript.ends_with_user())
        throw ContractViolation("transcript must hold exactly the replies of the earlier rounds");
    std::string message = render_template(plan.rounds[round_index - 1].template_text, plan.placeholder_bindings);
    if (round_index == 1 && !plan.fewshot_block.empty()) message = plan.fewshot_block + "\n\n" + message;
    return message;
}

std::string build_fewshot_block(std::span<const Demonstration> demonstrations, const corpus::LabelSpace& space) {
    if (demonstrations.empty()) return {};
    std::map<std::string, std::size_t> coverage;
    for (const auto& l : space.labels()) coverage[l] = 0;
    for (const auto& [ex, label] : demonstrations) {
        auto it = coverage.find(label);
        if (it == coverage.end()) throw ConfigError("demonstration label outside the label space: " + label);
        ++it->second;
    }
    const std::size_t k = coverage.begin()->second;
    for (const auto& [label, count] : coverage)
        if (count != k || count == 0)
            throw ConfigError("few-shot demonstrations must cover every label equally; '" + label + "' has " +
                              std::to_string(count));

    std::string out;
    for (std::size_t i = 0; i < demonstrations.size(); ++i) {
        if (i) out += "\n\n";
        const auto& [ex, label] = demonstrations[i];
        out += "Example: " + ex.discourse() + "\nAnswer: {\"fallacy\": " + json(label).dump() + "}";
    }
    return out;
}

}  // namespace fallacy::schemes
