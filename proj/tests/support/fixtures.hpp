#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fallacy/corpus.hpp"
#include "fallacy/schemes.hpp"

namespace fallacy::fixtures {

struct FixtureOptions {
    std::uint64_t seed = 17;
    /// Cap on records per raw split; labels then cycle through the classes.
    /// Unset: full registry split sizes, classified split following the distribution table.
    std::optional<std::size_t> per_split;
    /// Extra records per raw split carrying excluded labels (datasets with exclusions only).
    std::size_t excluded_per_split = 6;
};

std::filesystem::path shipped_data_dir();
const corpus::DatasetRegistry& shipped_registry();

/// Empty directory under the system temp dir, unique per call.
std::filesystem::path fresh_dir(std::string_view tag);

/// Normalized records for one dataset in the loader's input format.
std::vector<json> synthetic_records(const corpus::DatasetRegistry& registry, corpus::DatasetId dataset,
                                    const FixtureOptions& options = {});

/// Writes `<dataset>.jsonl` into `dir` and returns the file path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const corpus::DatasetRegistry& registry,
                                    corpus::DatasetId dataset, const FixtureOptions& options = {});

/// All seven datasets.
void write_corpus(const std::filesystem::path& dir, const corpus::DatasetRegistry& registry,
                  const FixtureOptions& options = {});

/// Records with exactly these (split, label) rows, one per entry, for hand-built sets.
std::vector<json> records_from_labels(corpus::DatasetId dataset, corpus::Split split,
                                      const std::vector<std::string>& labels);

std::filesystem::path golden_dir();
std::filesystem::path test_cases_dir();

/// The hand-written golden example of `dataset`, loaded through the normal ingestion path.
std::pair<corpus::DatasetSpec, corpus::FallacyExample> golden_example(corpus::DatasetId dataset);

/// Every round of `plan`, rendered against placeholder assistant replies.
std::vector<std::string> render_prompts(const schemes::SchemePlan& plan);

}  // namespace fallacy::fixtures
