#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <random>

#include "fallacy/error.hpp"

namespace fallacy::fixtures {

namespace {

using corpus::DatasetId;
using corpus::Split;

const std::vector<std::string> kSubjects = {"the council", "my neighbor", "the senator", "this company",
                                            "the new law", "our school", "the vaccine", "every expert",
                                            "the festival", "the railway"};
const std::vector<std::string> kClaims = {"will ruin everything",      "has always been right",
                                          "is backed by everyone",     "caused the storm last week",
                                          "cannot be trusted at all",  "must be stopped right now",
                                          "proves the whole theory",   "is the only possible choice",
                                          "was praised by a celebrity", "hides the real problem"};

std::string pick(std::mt19937_64& rng, const std::vector<std::string>& from) { return from[rng() % from.size()]; }

std::string sentence(DatasetId dataset, std::string_view tag, std::size_t n, std::mt19937_64& rng) {
    char num[16];
    std::snprintf(num, sizeof num, "%05zu", n);
    return std::string(corpus::to_string(dataset)) + " " + std::string(tag) + " " + num + ": " + pick(rng, kSubjects) +
           " " + pick(rng, kClaims) + ".";
}

/// Labels of the classified split, in table order, then padded to `total`.
std::vector<std::string> classified_labels(const corpus::DatasetRegistry& registry, DatasetId dataset,
                                           std::size_t total, bool follow_table) {
    const auto space = registry.label_space(dataset);
    std::vector<std::string> out;
    if (follow_table) {
        std::map<std::string, std::size_t> table;
        for (const auto& r : read_jsonl(shipped_data_dir() / "class_distribution.jsonl"))
            if (corpus::parse_dataset(r.at("dataset").get<std::string>()) == dataset)
                for (const auto& [k, v] : r.at("counts").items()) table[k] = v.get<std::size_t>();
        for (const auto& label : space.labels()) {
            const auto it = table.find(label);
            if (it == table.end()) continue;
            for (std::size_t i = 0; i < it->second && out.size() < total; ++i) out.push_back(label);
        }
    }
    const auto classes = space.classes();
    for (std::size_t i = 0; out.size() < total; ++i) {
        if (follow_table && space.allows_no_fallacy()) out.emplace_back(corpus::kNoFallacy);
        else out.push_back(classes[i % classes.size()]);
    }
    return out;
}

json make_record(DatasetId dataset, Split split, std::size_t n, const std::string& label,
                 const corpus::LabelSpace& space, std::mt19937_64& rng) {
    json r;
    r["dataset"] = std::string(corpus::to_string(dataset));
    r["split"] = std::string(corpus::to_string(split));
    r["id"] = corpus::make_example_id(dataset, split, n);
    r["meta"] = {{"source", "synthetic"}};
    const std::string tag = std::string(corpus::to_string(split));

    switch (dataset) {
        case DatasetId::argotario:
            r["context_sentences"] = {"A: " + sentence(dataset, tag + " question", n, rng)};
            r["target_segment"] = "B: " + sentence(dataset, tag + " answer", n, rng);
            break;
        case DatasetId::propaganda: {
            std::vector<std::string> doc;
            const std::size_t len = 7 + rng() % 6;
            for (std::size_t i = 0; i < len; ++i)
                doc.push_back(sentence(dataset, tag + " s" + std::to_string(i), n, rng));
            r["context_sentences"] = doc;
            r["target_index"] = rng() % len;
            break;
        }
        case DatasetId::reddit:
        case DatasetId::elecdeb:
            r["context_sentences"] = {sentence(dataset, tag + " context", n, rng)};
            r["target_segment"] = sentence(dataset, tag, n, rng);
            break;
        default:
            r["target_segment"] = sentence(dataset, tag, n, rng);
    }

    std::vector<std::string> gold{label};
    if (dataset == DatasetId::mafalda && label != corpus::kNoFallacy) {
        const auto& labels = space.labels();
        const std::size_t idx = space.index_of(label);
        if (n % 3 == 0) {
            gold = {label, labels[(idx + 1) % labels.size()], label};
        } else if (n % 7 == 0 && idx + 1 < labels.size()) {
            gold = {labels[idx + 1], label};  // tie, resolved by label order
        }
    }
    if (n % 11 == 0)
        for (auto& g : gold) g = text::to_lower(g);
    r["gold_labels"] = gold;
    return r;
}

}  // namespace

std::filesystem::path shipped_data_dir() {
#ifdef FALLACY_TEST_DATA_DIR
    return FALLACY_TEST_DATA_DIR;
#else
    return default_data_dir();
#endif
}

const corpus::DatasetRegistry& shipped_registry() {
    static const corpus::DatasetRegistry registry = corpus::DatasetRegistry::load(shipped_data_dir());
    return registry;
}

std::filesystem::path fresh_dir(std::string_view tag) {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    const auto dir = std::filesystem::temp_directory_path() /
                     ("fallacy-" + std::string(tag) + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::vector<json> synthetic_records(const corpus::DatasetRegistry& registry, DatasetId dataset,
                                    const FixtureOptions& options) {
    const auto& profile = registry.profile(dataset);
    const auto space = registry.label_space(dataset);
    std::mt19937_64 rng(options.seed + static_cast<std::uint64_t>(dataset) * 1000003ULL);
    const bool capped = options.per_split.has_value();
    auto cap = [&](std::size_t n) { return capped ? std::min(n, *options.per_split) : n; };

    // Raw split -> labels.
    std::vector<std::pair<Split, std::vector<std::string>>> plan;
    const auto classes = space.classes();
    for (const auto& [split, size] : profile.expected_splits) {
        if (split == profile.classify_split && profile.merge_splits.empty()) {
            plan.emplace_back(split, classified_labels(registry, dataset, cap(size), !capped));
        } else if (split == Split::inference) {
            auto labels = classified_labels(registry, dataset, cap(size), !capped);
            std::shuffle(labels.begin(), labels.end(), rng);
            const std::size_t parts = profile.merge_splits.size();
            std::size_t start = 0;
            for (std::size_t p = 0; p < parts; ++p) {
                const std::size_t end = labels.size() * (p + 1) / parts;
                plan.emplace_back(profile.merge_splits[p],
                                  std::vector<std::string>(labels.begin() + start, labels.begin() + end));
                start = end;
            }
        } else {
            std::vector<std::string> labels;
            for (std::size_t i = 0; i < cap(size); ++i) labels.push_back(classes[i % classes.size()]);
            plan.emplace_back(split, std::move(labels));
        }
    }

    std::vector<json> out;
    for (auto& [split, labels] : plan) {
        for (std::size_t e = 0; e < options.excluded_per_split && !profile.exclude_labels.empty(); ++e)
            labels.push_back(profile.exclude_labels[e % profile.exclude_labels.size()]);
        std::shuffle(labels.begin(), labels.end(), rng);
        for (std::size_t i = 0; i < labels.size(); ++i)
            out.push_back(make_record(dataset, split, i, labels[i], space, rng));
    }
    return out;
}

std::filesystem::path write_dataset(const std::filesystem::path& dir, const corpus::DatasetRegistry& registry,
                                    DatasetId dataset, const FixtureOptions& options) {
    std::filesystem::create_directories(dir);
    const auto path = dir / (std::string(corpus::to_string(dataset)) + ".jsonl");
    write_jsonl(path, synthetic_records(registry, dataset, options));
    return path;
}

void write_corpus(const std::filesystem::path& dir, const corpus::DatasetRegistry& registry,
                  const FixtureOptions& options) {
    for (auto id : corpus::kAllDatasets) write_dataset(dir, registry, id, options);
}

std::filesystem::path golden_dir() { return FALLACY_GOLDEN_DIR; }
std::filesystem::path test_cases_dir() { return FALLACY_TEST_CASES_DIR; }

std::pair<corpus::DatasetSpec, corpus::FallacyExample> golden_example(DatasetId dataset) {
    std::vector<json> rows;
    for (const auto& r : read_jsonl(golden_dir() / "examples.jsonl"))
        if (corpus::parse_dataset(r.at("dataset").get<std::string>()) == dataset) rows.push_back(r);
    const auto dir = fresh_dir("golden");
    const auto file = dir / "golden.jsonl";
    write_jsonl(file, rows);
    auto [spec, examples] = corpus::load_dataset(shipped_registry(), dataset, file);
    std::filesystem::remove_all(dir);
    if (examples.size() != 1) throw Error("expected one golden example for " + std::string(corpus::to_string(dataset)));
    return {std::move(spec), std::move(examples.front())};
}

std::vector<std::string> render_prompts(const schemes::SchemePlan& plan) {
    std::vector<std::string> out;
    schemes::Transcript t;
    for (int r = 1; r <= static_cast<int>(plan.rounds.size()); ++r) {
        out.push_back(schemes::render_round(plan, r, t));
        t.add_user(out.back());
        t.add_assistant("placeholder reply " + std::to_string(r));
    }
    return out;
}

std::vector<json> records_from_labels(DatasetId dataset, Split split, const std::vector<std::string>& labels) {
    std::vector<json> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out.push_back({{"dataset", std::string(corpus::to_string(dataset))},
                       {"split", std::string(corpus::to_string(split))},
                       {"id", corpus::make_example_id(dataset, split, i)},
                       {"target_segment", std::string(corpus::to_string(dataset)) + " constructed item " +
                                              std::to_string(1000 + i) + " argues its point."},
                       {"gold_labels", {labels[i]}}});
    }
    return out;
}

}  // namespace fallacy::fixtures
