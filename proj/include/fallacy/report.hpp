#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fallacy/corpus.hpp"
#include "fallacy/metrics.hpp"
#include "fallacy/runner.hpp"

namespace fallacy::report {

struct ResultCell {
    std::string model;
    std::string dataset;
    std::string scheme;  ///< cell key, e.g. "gfa_w" or "wd+formal"
    double macro_f1 = 0;
    double accuracy = 0;
    double failure_rate = 0;
    std::size_t n = 0;
    std::string report_digest;
};

std::vector<ResultCell> cells_from_sweep(const runner::SweepResult& sweep);

enum class Layout {
    main,      ///< best single-round and best multi-round Macro-F1 per model and dataset
    detailed,  ///< Macro-F1 / accuracy / %failed per model, scheme and dataset
};

/// Markdown for people, CSV for tools. Both are byte-deterministic.
struct Emission {
    std::string text;
    std::string data;
};

/// Human-readable name of a cell key: the scheme's display name plus any shot,
/// formal-definition or strict-parse qualifiers.
std::string scheme_label(std::string_view cell_key);
/// Number of rounds of the scheme named by a cell key.
int scheme_rounds(std::string_view cell_key);

/// Main layout marks the best value of each dataset column in bold and single-round
/// cells won by the scheme without definitions with a trailing "°".
Emission emit_results_table(std::span<const ResultCell> cells, Layout layout);

/// Row-percent grid with "other" and "failure" columns, values to one decimal.
Emission emit_confusion(const metrics::ConfusionMatrix& matrix);

/// Rows sorted by mean rank, then scheme name; mean rank and mean %failed to two decimals.
Emission emit_rank_table(const metrics::RankTable& table);

/// Minimal RFC 4180 reader for the files written here.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Writes results_main.{md,csv}, results_detailed.{md,csv}, ranks.{md,csv} and a pooled
/// confusion_all.csv for a finished sweep into `dir`.
void write_sweep_reports(const std::filesystem::path& dir, const runner::SweepResult& sweep,
                         const corpus::DatasetRegistry& registry);

}  // namespace fallacy::report
