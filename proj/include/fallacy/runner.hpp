#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fallacy/backend.hpp"
#include "fallacy/corpus.hpp"
#include "fallacy/knowledge.hpp"
#include "fallacy/metrics.hpp"
#include "fallacy/parsing.hpp"
#include "fallacy/schemes.hpp"

namespace fallacy::runner {

enum class DefinitionsStyle { none, informal, formal };
std::string_view to_string(DefinitionsStyle d);
DefinitionsStyle parse_definitions_style(std::string_view s);

struct RunConfig {
    corpus::DatasetId dataset = corpus::DatasetId::argotario;
    schemes::SchemeId scheme;
    DefinitionsStyle definitions = DefinitionsStyle::none;
    backend::BackendConfig backend;
    /// Sampling parameters; max_new_tokens is replaced per round by the two limits below.
    backend::GenerationParams params;
    int max_tokens_intermediate = 1024;
    int max_tokens_terminal = 256;
    /// Send seed + repeat as the provider seed.
    bool send_seed = true;
    int repeats = 1;
    std::int64_t seed = 0;
    std::optional<std::size_t> subsample;
    std::filesystem::path output_dir;
    parsing::ParseMode parse_mode = parsing::ParseMode::lenient;
    /// Normalized dataset file, or a directory holding `<dataset>.jsonl`.
    std::filesystem::path data_source;
    /// Registry, definitions and templates; defaults to default_data_dir().
    std::filesystem::path data_dir;
    std::optional<corpus::Split> split_override;
    std::optional<std::string> system_message;
    metrics::MetricOptions metric_options;
    /// Transport-failed share of a repeat above which the run aborts.
    double abort_fraction = 0.05;

    /// ConfigError on inconsistent settings (definitions vs scheme, formal outside mafalda, ...).
    void validate() const;
    json to_json() const;
    /// Key used to detect duplicate sweep cells and to address grid columns.
    std::string cell_scheme_key() const;
};

struct EpisodeRecord {
    std::string example_id;
    std::string scheme;
    int repeat = 1;
    std::string gold;
    schemes::Transcript transcript;
    parsing::ParsedOutcome outcome;
    std::vector<std::string> request_digests;
    std::vector<std::string> response_ids;
    std::vector<std::string> fewshot_ids;
    std::string resume_key;
    bool transport_failed = false;
    std::string error;
    /// Seconds; kept out of episodes.jsonl so replays stay byte-identical.
    double wall_time = 0;

    json to_json() const;
    static EpisodeRecord from_json(const json& j);
};

struct RunResult {
    std::vector<metrics::MetricsReport> repeats;
    metrics::MetricsReport aggregate;
    std::vector<EpisodeRecord> episodes;
    std::vector<std::size_t> transport_failed;  ///< per repeat
    std::size_t resumed = 0;
    json manifest;
};

/// Executes every example of the classified split through the scheme for each repeat,
/// writing episodes.jsonl, timings.jsonl, report.json and manifest.json to output_dir.
/// Episodes already recorded in output_dir/episodes.jsonl are reused.
RunResult run_experiment(const RunConfig& config);

/// Same, with a caller-supplied backend (instrumented tests). The backend must match config.backend.
RunResult run_experiment(const RunConfig& config, backend::ChatBackend& backend);

/// Backend for a config. Scripted backends get an answer key built from the classified split.
std::unique_ptr<backend::ChatBackend> make_run_backend(const RunConfig& config);

/// k demonstrations per fallacy label, drawn without replacement from `pool` (minus
/// `exclude_id`) with a generator seeded by `seed`. Label order, then draw order.
std::vector<schemes::Demonstration> sample_fewshot(std::span<const corpus::FallacyExample> pool,
                                                   const corpus::LabelSpace& space, int k, std::int64_t seed,
                                                   const std::string& exclude_id);

/// `n` ids chosen by a seeded draw from `examples` (sorted by id), returned in id order.
std::vector<corpus::FallacyExample> subsample_examples(std::span<const corpus::FallacyExample> examples, std::size_t n,
                                                       std::int64_t seed);

struct CellResult {
    std::string model;
    std::string dataset;
    std::string scheme;  ///< RunConfig::cell_scheme_key()
    int rounds = 1;
    metrics::MetricsReport aggregate;
    std::string report_digest;
    std::filesystem::path output_dir;
};

struct SweepResult {
    std::vector<CellResult> cells;
    metrics::ScoreGrid grid;
};

/// Runs each config in order. ConfigError when two configs address the same
/// (model, dataset, scheme, definitions, parse mode) cell.
SweepResult sweep(std::span<const RunConfig> configs);

struct SweepPlan {
    std::filesystem::path output_dir;  ///< root; cells live in <root>/<model>/<dataset>/<scheme key>
    std::vector<RunConfig> configs;
};

/// Reads a YAML sweep description. Relative paths resolve against the file's directory.
SweepPlan load_sweep_config(const std::filesystem::path& path);

}  // namespace fallacy::runner
