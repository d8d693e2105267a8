#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fallacy/util.hpp"

namespace fallacy::corpus {

enum class DatasetId { argotario, logic, reddit, mafalda, elecdeb, propaganda, covid };

inline constexpr std::array<DatasetId, 7> kAllDatasets = {
    DatasetId::argotario, DatasetId::logic,      DatasetId::reddit, DatasetId::mafalda,
    DatasetId::elecdeb,   DatasetId::propaganda, DatasetId::covid};

std::string_view to_string(DatasetId id);
/// Accepts the canonical lower-case identifiers plus "covid-19" and "elecdeb60to20".
DatasetId parse_dataset(std::string_view name);

enum class Split { train, dev, test, inference };

std::string_view to_string(Split s);
Split parse_split(std::string_view name);

/// Gold label used for non-fallacious examples, and the sentinel the parser emits.
inline constexpr std::string_view kNoFallacy = "No Fallacy";

/// Closed set of fallacy types for one dataset.
class LabelSpace {
public:
    /// Validates uniqueness after case-folding and that every alias names exactly one label.
    /// Throws SchemaError otherwise.
    LabelSpace(DatasetId dataset, std::vector<std::string> labels,
               std::map<std::string, std::vector<std::string>> aliases, bool allows_no_fallacy);

    DatasetId dataset() const noexcept { return dataset_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::map<std::string, std::vector<std::string>>& aliases() const noexcept { return aliases_; }
    bool allows_no_fallacy() const noexcept { return allows_no_fallacy_; }
    std::size_t cardinality() const noexcept { return labels_.size(); }

    /// Fallacy labels followed by "No Fallacy" when it is a valid gold label.
    std::vector<std::string> classes() const;

    bool contains(std::string_view label) const;
    /// Position in label order, or labels().size() when absent.
    std::size_t index_of(std::string_view label) const;

    /// Exact (case-insensitive) match against canonical labels and aliases only.
    std::optional<std::string> resolve(std::string_view surface) const;

    /// Canonical JSON; stable across runs and used for checksums.
    json to_json() const;

private:
    DatasetId dataset_;
    std::vector<std::string> labels_;
    std::map<std::string, std::vector<std::string>> aliases_;
    bool allows_no_fallacy_;
};

/// Static per-dataset rules and prompt phrases from the dataset registry file.
struct DatasetProfile {
    DatasetId dataset;
    std::vector<std::string> labels;
    bool allows_no_fallacy = false;
    std::string discourse_type;
    std::string segment;
    std::string argument;
    Split classify_split = Split::test;
    std::vector<Split> merge_splits;
    std::vector<std::string> exclude_labels;
    std::optional<int> context_radius;
    std::map<Split, std::size_t> expected_splits;
};

class DatasetRegistry {
public:
    /// Reads `datasets.jsonl` and `aliases.jsonl` from `data_dir`.
    static DatasetRegistry load(const std::filesystem::path& data_dir);

    const DatasetProfile& profile(DatasetId id) const;
    LabelSpace label_space(DatasetId id) const;
    /// Cross-dataset unification (label -> unified label); identity for unlisted labels.
    std::string unify(std::string_view label) const;
    const std::map<std::string, std::string>& unification() const noexcept { return unification_; }

private:
    std::map<DatasetId, DatasetProfile> profiles_;
    std::map<std::string, std::vector<std::string>> aliases_;
    std::map<std::string, std::string> unification_;
};

struct DatasetSpec {
    DatasetId dataset;
    LabelSpace label_space;
    std::string discourse_type_phrase;
    std::string segment_phrase;
    std::string argument_phrase;
    Split classify_split;
    std::map<Split, std::size_t> split_sizes;
    std::vector<std::string> preprocessing_notes;
};

struct FallacyExample {
    std::string id;
    DatasetId dataset;
    std::string discourse_type;
    std::vector<std::string> context_before;
    std::string target_segment;
    std::vector<std::string> context_after;
    /// True when the target sits inside its context and is delimited with '<' '>'.
    bool target_in_context = false;
    /// Dominant label first, then the other annotated labels in order of appearance.
    std::vector<std::string> gold_labels;
    std::string dominant_label;
    Split split = Split::test;
    std::map<std::string, std::string> meta;

    /// Surrounding material without the target.
    std::string context() const;
    /// The text bound to the [Discourse] slot: context with the delimited target in place,
    /// or the context followed by the target on its own line.
    std::string discourse() const;

    json to_json() const;
};

/// Result of clipping a window of sentences around a target sentence.
struct ContextWindow {
    std::vector<std::string> before;
    std::string target_segment;  ///< target sentence wrapped in '<' '>'
    std::vector<std::string> after;

    std::string context() const;
};

/// Loads one dataset from the normalized line-delimited format and applies its
/// preprocessing rules. `source` is either the dataset file or a directory holding
/// `<dataset>.jsonl`. Output is sorted by id.
std::pair<DatasetSpec, std::vector<FallacyExample>> load_dataset(const DatasetRegistry& registry,
                                                                 DatasetId dataset,
                                                                 const std::filesystem::path& source);

/// Label with the most occurrences; ties go to the label earliest in `label_order`
/// (labels absent from it rank after, by first appearance).
std::string select_dominant_label(std::span<const std::pair<std::string, int>> annotations,
                                  std::span<const std::string> label_order = {});

/// Drops examples whose dominant label is in `excluded` (case-insensitive). Order preserved.
std::vector<FallacyExample> filter_class(std::vector<FallacyExample> examples,
                                         std::span<const std::string> excluded);

ContextWindow attach_context_window(std::span<const std::string> document_sentences,
                                    std::ptrdiff_t target_index, int radius);

/// Returns the examples of `splits_to_merge`, relabeled as the inference split and
/// sorted by id. The original split is kept in meta["source_split"].
std::vector<FallacyExample> merge_splits(std::span<const FallacyExample> examples,
                                         std::span<const Split> splits_to_merge);

std::vector<FallacyExample> examples_in_split(std::span<const FallacyExample> examples, Split split);

/// Per-class counts of the classified split against the shipped distribution table.
struct DistributionCheck {
    DatasetId dataset;
    std::map<std::string, std::size_t> observed;
    std::map<std::string, std::size_t> expected;
    std::vector<std::string> mismatches;
    bool ok() const { return mismatches.empty(); }
};

DistributionCheck check_class_distribution(const std::filesystem::path& data_dir, const DatasetSpec& spec,
                                           std::span<const FallacyExample> examples);

/// Deterministic example id: `<dataset>:<split>:<index zero-padded to 5>`.
std::string make_example_id(DatasetId dataset, Split split, std::size_t index);

}  // namespace fallacy::corpus
