#include "fallacy/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "fallacy/error.hpp"

namespace fallacy::corpus {

namespace {

constexpr std::array<std::pair<DatasetId, std::string_view>, 7> kDatasetNames = {{
    {DatasetId::argotario, "argotario"},
    {DatasetId::logic, "logic"},
    {DatasetId::reddit, "reddit"},
    {DatasetId::mafalda, "mafalda"},
    {DatasetId::elecdeb, "elecdeb"},
    {DatasetId::propaganda, "propaganda"},
    {DatasetId::covid, "covid"},
}};

std::string fold(std::string_view s) { return text::to_lower(text::collapse_whitespace(s)); }

bool is_no_fallacy(std::string_view s) { return fold(s) == fold(kNoFallacy); }

std::string meta_value(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

std::string_view to_string(DatasetId id) {
    for (const auto& [k, v] : kDatasetNames)
        if (k == id) return v;
    return "unknown";
}

DatasetId parse_dataset(std::string_view name) {
    const std::string n = text::to_lower(text::trim(name));
    for (const auto& [k, v] : kDatasetNames)
        if (n == v) return k;
    if (n == "covid-19" || n == "covid19") return DatasetId::covid;
    if (n == "elecdeb60to20") return DatasetId::elecdeb;
    throw ConfigError("unknown dataset: " + std::string(name));
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
        case Split::inference: return "inference";
    }
    return "unknown";
}

Split parse_split(std::string_view name) {
    const std::string n = text::to_lower(text::trim(name));
    if (n == "train") return Split::train;
    if (n == "dev" || n == "valid" || n == "validation" || n == "val") return Split::dev;
    if (n == "test") return Split::test;
    if (n == "inference") return Split::inference;
    throw SchemaError("unknown split: " + std::string(name));
}

// ---------------------------------------------------------------- LabelSpace

LabelSpace::LabelSpace(DatasetId dataset, std::vector<std::string> labels,
                       std::map<std::string, std::vector<std::string>> aliases, bool allows_no_fallacy)
    : dataset_(dataset), labels_(std::move(labels)), aliases_(std::move(aliases)),
      allows_no_fallacy_(allows_no_fallacy) {
    std::map<std::string, std::string> owner;
    for (const auto& l : labels_) {
        if (text::trim(l).empty()) throw SchemaError("empty label in label space");
        if (!owner.emplace(fold(l), l).second)
            throw SchemaError("duplicate label after case-folding: " + l);
    }
    for (const auto& [canonical, forms] : aliases_) {
        if (!contains(canonical)) throw SchemaError("alias target is not a label: " + canonical);
        for (const auto& f : forms) {
            auto [it, inserted] = owner.emplace(fold(f), canonical);
            if (!inserted && it->second != canonical)
                throw SchemaError("alias '" + f + "' maps to both '" + it->second + "' and '" + canonical + "'");
        }
    }
}

std::vector<std::string> LabelSpace::classes() const {
    std::vector<std::string> out = labels_;
    if (allows_no_fallacy_) out.emplace_back(kNoFallacy);
    return out;
}

bool LabelSpace::contains(std::string_view label) const { return index_of(label) < labels_.size(); }

std::size_t LabelSpace::index_of(std::string_view label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
        if (labels_[i] == label) return i;
    return labels_.size();
}

std::optional<std::string> LabelSpace::resolve(std::string_view surface) const {
    const std::string key = fold(surface);
    for (const auto& l : labels_)
        if (fold(l) == key) return l;
    for (const auto& [canonical, forms] : aliases_)
        for (const auto& f : forms)
            if (fold(f) == key) return canonical;
    return std::nullopt;
}

json LabelSpace::to_json() const {
    return json{{"dataset", std::string(to_string(dataset_))},
                {"labels", labels_},
                {"aliases", aliases_},
                {"allows_no_fallacy", allows_no_fallacy_}};
}

// ---------------------------------------------------------------- registry

DatasetRegistry DatasetRegistry::load(const std::filesystem::path& data_dir) {
    DatasetRegistry reg;
    for (const auto& r : read_jsonl(data_dir / "aliases.jsonl"))
        reg.aliases_[r.at("label").get<std::string>()] = r.at("aliases").get<std::vector<std::string>>();
    if (std::filesystem::exists(data_dir / "label_unification.jsonl"))
        for (const auto& r : read_jsonl(data_dir / "label_unification.jsonl"))
            reg.unification_[r.at("label").get<std::string>()] = r.at("unified").get<std::string>();

    for (const auto& r : read_jsonl(data_dir / "datasets.jsonl")) {
        DatasetProfile p;
        p.dataset = parse_dataset(r.at("dataset").get<std::string>());
        p.labels = r.at("labels").get<std::vector<std::string>>();
        p.allows_no_fallacy = r.at("allows_no_fallacy").get<bool>();
        p.discourse_type = r.at("discourse_type").get<std::string>();
        p.segment = r.at("segment").get<std::string>();
        p.argument = r.at("argument").get<std::string>();
        p.classify_split = parse_split(r.at("classify_split").get<std::string>());
        for (const auto& s : r.value("merge_splits", json::array())) p.merge_splits.push_back(parse_split(s.get<std::string>()));
        p.exclude_labels = r.value("exclude_labels", std::vector<std::string>{});
        if (r.contains("context_radius") && !r["context_radius"].is_null())
            p.context_radius = r["context_radius"].get<int>();
        for (const auto& [k, v] : r.at("expected_splits").items()) p.expected_splits[parse_split(k)] = v.get<std::size_t>();
        reg.profiles_[p.dataset] = std::move(p);
    }
    for (DatasetId id : kAllDatasets)
        if (!reg.profiles_.count(id))
            throw IngestionError("dataset registry has no entry for " + std::string(to_string(id)));
    return reg;
}

const DatasetProfile& DatasetRegistry::profile(DatasetId id) const {
    auto it = profiles_.find(id);
    if (it == profiles_.end()) throw ConfigError("no profile for dataset " + std::string(to_string(id)));
    return it->second;
}

LabelSpace DatasetRegistry::label_space(DatasetId id) const {
    const auto& p = profile(id);
    std::map<std::string, std::vector<std::string>> aliases;
    for (const auto& l : p.labels)
        if (auto it = aliases_.find(l); it != aliases_.end()) aliases[l] = it->second;
    return LabelSpace(id, p.labels, std::move(aliases), p.allows_no_fallacy);
}

std::string DatasetRegistry::unify(std::string_view label) const {
    auto it = unification_.find(std::string(label));
    return it == unification_.end() ? std::string(label) : it->second;
}

// ---------------------------------------------------------------- examples

std::string FallacyExample::context() const {
    std::vector<std::string> all = context_before;
    all.insert(all.end(), context_after.begin(), context_after.end());
    return text::join(all, " ");
}

std::string FallacyExample::discourse() const {
    if (target_in_context) {
        std::vector<std::string> all = context_before;
        all.push_back(target_segment);
        all.insert(all.end(), context_after.begin(), context_after.end());
        return text::join(all, " ");
    }
    if (context_before.empty() && context_after.empty()) return target_segment;
    return context() + "\n" + target_segment;
}

json FallacyExample::to_json() const {
    return json{{"id", id},
                {"dataset", std::string(to_string(dataset))},
                {"split", std::string(to_string(split))},
                {"discourse_type", discourse_type},
                {"context_before", context_before},
                {"target_segment", target_segment},
                {"context_after", context_after},
                {"target_in_context", target_in_context},
                {"gold_labels", gold_labels},
                {"dominant_label", dominant_label},
                {"meta", meta}};
}

std::string ContextWindow::context() const {
    std::vector<std::string> all = before;
    all.insert(all.end(), after.begin(), after.end());
    return text::join(all, " ");
}

std::string make_example_id(DatasetId dataset, Split split, std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%05zu", index);
    return std::string(to_string(dataset)) + ":" + std::string(to_string(split)) + ":" + buf;
}

std::string select_dominant_label(std::span<const std::pair<std::string, int>> annotations,
                                  std::span<const std::string> label_order) {
    if (annotations.empty()) throw SchemaError("cannot select a dominant label from no annotations");
    // Merge repeated labels, remembering first appearance.
    std::vector<std::pair<std::string, int>> totals;
    for (const auto& [label, count] : annotations) {
        auto it = std::find_if(totals.begin(), totals.end(), [&](const auto& t) { return t.first == label; });
        if (it == totals.end()) totals.emplace_back(label, count);
        else it->second += count;
    }
    auto rank = [&](std::size_t i) -> std::pair<std::size_t, std::size_t> {
        auto pos = std::find(label_order.begin(), label_order.end(), totals[i].first);
        return {static_cast<std::size_t>(pos - label_order.begin()), i};
    };
    std::size_t best = 0;
    for (std::size_t i = 1; i < totals.size(); ++i) {
        if (totals[i].second > totals[best].second ||
            (totals[i].second == totals[best].second && rank(i) < rank(best)))
            best = i;
    }
    return totals[best].first;
}

std::vector<FallacyExample> filter_class(std::vector<FallacyExample> examples,
                                         std::span<const std::string> excluded) {
    if (excluded.empty()) return examples;
    std::set<std::string> drop;
    for (const auto& e : excluded) drop.insert(fold(e));
    std::erase_if(examples, [&](const FallacyExample& ex) { return drop.count(fold(ex.dominant_label)) > 0; });
    return examples;
}

ContextWindow attach_context_window(std::span<const std::string> document_sentences,
                                    std::ptrdiff_t target_index, int radius) {
    if (radius < 0) throw ContractViolation("context radius must be non-negative");
    const auto n = static_cast<std::ptrdiff_t>(document_sentences.size());
    if (target_index < 0 || target_index >= n)
        throw SchemaError("target index " + std::to_string(target_index) + " out of range for " +
                          std::to_string(n) + " sentences");
    ContextWindow w;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, target_index - radius);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, target_index + radius);
    for (auto i = lo; i < target_index; ++i) w.before.push_back(document_sentences[i]);
    for (auto i = target_index + 1; i <= hi; ++i) w.after.push_back(document_sentences[i]);
    w.target_segment = "<" + document_sentences[target_index] + ">";
    return w;
}

std::vector<FallacyExample> merge_splits(std::span<const FallacyExample> examples,
                                         std::span<const Split> splits_to_merge) {
    if (splits_to_merge.empty()) throw ContractViolation("merge_splits needs at least one split");
    std::vector<FallacyExample> out;
    for (const auto& ex : examples) {
        if (std::find(splits_to_merge.begin(), splits_to_merge.end(), ex.split) == splits_to_merge.end()) continue;
        FallacyExample copy = ex;
        copy.meta.emplace("source_split", std::string(to_string(ex.split)));
        copy.split = Split::inference;
        out.push_back(std::move(copy));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
}

std::vector<FallacyExample> examples_in_split(std::span<const FallacyExample> examples, Split split) {
    std::vector<FallacyExample> out;
    for (const auto& ex : examples)
        if (ex.split == split) out.push_back(ex);
    return out;
}

namespace {

/// Canonical form of a raw annotation: No-Fallacy sentinel, an excluded raw label kept
/// verbatim, or a label of the space. Unknown labels are schema errors.
std::string resolve_raw_label(const std::string& raw, const LabelSpace& space, const DatasetProfile& profile,
                              const std::string& example_id) {
    if (is_no_fallacy(raw)) return std::string(kNoFallacy);
    for (const auto& ex : profile.exclude_labels)
        if (fold(ex) == fold(raw)) return ex;
    if (auto canonical = space.resolve(raw)) return *canonical;
    throw SchemaError("unknown gold label '" + raw + "' in example " + example_id);
}

FallacyExample parse_record(const json& r, std::size_t line_index, const DatasetProfile& profile,
                            const LabelSpace& space) {
    FallacyExample ex;
    ex.dataset = profile.dataset;
    if (r.contains("dataset") && parse_dataset(r["dataset"].get<std::string>()) != profile.dataset)
        throw SchemaError("record " + std::to_string(line_index) + " belongs to dataset " +
                          r["dataset"].get<std::string>());
    ex.split = parse_split(r.at("split").get<std::string>());
    ex.id = r.value("id", std::string{});
    if (ex.id.empty()) ex.id = make_example_id(profile.dataset, ex.split, line_index);
    ex.discourse_type = r.value("discourse_type", profile.discourse_type);

    const auto sentences = r.value("context_sentences", std::vector<std::string>{});
    const bool indexed = r.contains("target_index") && !r["target_index"].is_null();
    if (indexed) {
        const int radius = profile.context_radius.value_or(static_cast<int>(sentences.size()));
        auto window = attach_context_window(sentences, r["target_index"].get<std::ptrdiff_t>(), radius);
        ex.context_before = std::move(window.before);
        ex.context_after = std::move(window.after);
        ex.target_segment = std::move(window.target_segment);
        ex.target_in_context = true;
    } else {
        ex.context_before = sentences;
        ex.target_segment = r.value("target_segment", std::string{});
    }
    if (text::trim(ex.target_segment).empty() || ex.target_segment == "<>")
        throw SchemaError("empty target segment in example " + ex.id);

    const auto raw_labels = r.value("gold_labels", std::vector<std::string>{});
    std::vector<std::pair<std::string, int>> occurrences;
    for (const auto& raw : raw_labels) {
        const std::string label = resolve_raw_label(raw, space, profile, ex.id);
        auto it = std::find_if(occurrences.begin(), occurrences.end(), [&](const auto& o) { return o.first == label; });
        if (it == occurrences.end()) occurrences.emplace_back(label, 1);
        else ++it->second;
    }

    const std::string given = r.contains("dominant_label") && r["dominant_label"].is_string()
                                  ? r["dominant_label"].get<std::string>()
                                  : std::string{};
    if (!given.empty()) {
        ex.dominant_label = resolve_raw_label(given, space, profile, ex.id);
    } else {
        if (occurrences.empty()) throw SchemaError("example " + ex.id + " has no gold labels");
        ex.dominant_label = select_dominant_label(occurrences, space.labels());
    }
    ex.gold_labels.push_back(ex.dominant_label);
    for (const auto& [label, count] : occurrences)
        if (label != ex.dominant_label) ex.gold_labels.push_back(label);

    if (r.contains("meta") && r["meta"].is_object())
        for (const auto& [k, v] : r["meta"].items()) ex.meta[k] = meta_value(v);
    if (raw_labels.size() > 1) ex.meta["gold_annotations"] = json(raw_labels).dump();
    return ex;
}

}  // namespace

std::pair<DatasetSpec, std::vector<FallacyExample>> load_dataset(const DatasetRegistry& registry,
                                                                 DatasetId dataset,
                                                                 const std::filesystem::path& source) {
    const auto& profile = registry.profile(dataset);
    LabelSpace space = registry.label_space(dataset);

    std::filesystem::path file = source;
    if (std::filesystem::is_directory(source)) file = source / (std::string(to_string(dataset)) + ".jsonl");
    if (!std::filesystem::exists(file)) throw IngestionError("missing dataset file: " + file.string());

    const auto records = read_jsonl(file);
    std::vector<FallacyExample> examples;
    examples.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) examples.push_back(parse_record(records[i], i, profile, space));

    DatasetSpec spec{dataset,
                     space,
                     profile.discourse_type,
                     profile.segment,
                     profile.argument,
                     profile.classify_split,
                     {},
                     {}};

    if (!profile.exclude_labels.empty()) {
        examples = filter_class(std::move(examples), profile.exclude_labels);
        spec.preprocessing_notes.push_back("exclude:" + text::join(profile.exclude_labels, "|"));
    }
    if (profile.context_radius)
        spec.preprocessing_notes.push_back("context_window:" + std::to_string(*profile.context_radius));
    if (!profile.merge_splits.empty()) {
        auto merged = merge_splits(examples, profile.merge_splits);
        std::erase_if(examples, [&](const FallacyExample& ex) {
            return std::find(profile.merge_splits.begin(), profile.merge_splits.end(), ex.split) !=
                   profile.merge_splits.end();
        });
        examples.insert(examples.end(), merged.begin(), merged.end());
        std::vector<std::string> names;
        for (Split s : profile.merge_splits) names.emplace_back(to_string(s));
        spec.preprocessing_notes.push_back("merge:" + text::join(names, "+") + "->inference");
    }
    if (dataset == DatasetId::mafalda) spec.preprocessing_notes.push_back("dominant_label:max_occurrence,tie=label_order");

    if (examples.empty()) throw IngestionError("dataset " + std::string(to_string(dataset)) + " is empty: " + file.string());

    std::sort(examples.begin(), examples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < examples.size(); ++i)
        if (examples[i].id == examples[i - 1].id) throw SchemaError("duplicate example id " + examples[i].id);

    for (const auto& ex : examples) {
        if (ex.dominant_label == kNoFallacy) {
            if (!space.allows_no_fallacy())
                throw SchemaError("example " + ex.id + " is labeled No Fallacy but " +
                                  std::string(to_string(dataset)) + " does not admit it");
        } else if (!space.contains(ex.dominant_label)) {
            throw SchemaError("example " + ex.id + " has label outside the label space: " + ex.dominant_label);
        }
        ++spec.split_sizes[ex.split];
    }
    return {std::move(spec), std::move(examples)};
}

DistributionCheck check_class_distribution(const std::filesystem::path& data_dir, const DatasetSpec& spec,
                                           std::span<const FallacyExample> examples) {
    DistributionCheck check{spec.dataset, {}, {}, {}};
    for (const auto& r : read_jsonl(data_dir / "class_distribution.jsonl")) {
        if (parse_dataset(r.at("dataset").get<std::string>()) != spec.dataset) continue;
        for (const auto& [k, v] : r.at("counts").items()) check.expected[k] = v.get<std::size_t>();
    }
    for (const auto& ex : examples)
        if (ex.split == spec.classify_split) ++check.observed[ex.dominant_label];

    for (const auto& [label, want] : check.expected) {
        auto it = check.observed.find(label);
        const std::size_t got = it == check.observed.end() ? 0 : it->second;
        if (got != want)
            check.mismatches.push_back(label + ": expected " + std::to_string(want) + ", observed " + std::to_string(got));
    }
    for (const auto& [label, got] : check.observed) {
        if (label == kNoFallacy) continue;
        if (!check.expected.count(label))
            check.mismatches.push_back(label + ": not in table, observed " + std::to_string(got));
    }
    return check;
}

}  // namespace fallacy::corpus
