#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fallacy/corpus.hpp"
#include "fallacy/parsing.hpp"

namespace fallacy::metrics {

struct EvalPair {
    std::string gold;
    parsing::ParsedOutcome outcome;

    /// Test and tooling helper: a prediction of `label`, or a failure when empty.
    static EvalPair make(std::string gold, std::optional<std::string> predicted);
};

/// Which classes enter the macro average.
enum class Averaging {
    observed,    ///< classes with gold support or at least one prediction
    full_space,  ///< every class of the label space
};

/// How failed outcomes enter per-class F1.
enum class FailureMode {
    non_class,  ///< false negative for the gold class only
    as_class,   ///< an extra prediction-only class "FAILED", present when something failed
};

std::string_view to_string(Averaging a);
std::string_view to_string(FailureMode f);
Averaging parse_averaging(std::string_view s);
FailureMode parse_failure_mode(std::string_view s);

inline constexpr std::string_view kFailedClass = "FAILED";

struct MetricOptions {
    Averaging averaging = Averaging::observed;
    FailureMode failure_mode = FailureMode::non_class;
    friend bool operator==(const MetricOptions&, const MetricOptions&) = default;
};

struct ClassMetrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    double support = 0;
    double predicted = 0;
};

/// Percentages are unrounded; rounding happens only when reports are written out.
struct MetricsReport {
    double macro_f1 = 0;
    double accuracy = 0;
    double failure_rate = 0;
    std::map<std::string, ClassMetrics> per_class;
    std::size_t n = 0;
    parsing::ParseMode parse_mode = parsing::ParseMode::lenient;
    MetricOptions options;
    std::string dataset;
    std::string scheme;
    std::string model;
    std::map<std::string, std::size_t> outcome_counts;
    std::size_t multi_label = 0;

    json to_json() const;
    static MetricsReport from_json(const json& j);
};

/// 100 x mean per-class F1. Empty input is a ContractViolation.
double macro_f1(std::span<const EvalPair> pairs, const corpus::LabelSpace& space, const MetricOptions& options = {});
double accuracy(std::span<const EvalPair> pairs);
double failure_rate(std::span<const EvalPair> pairs);

/// All metrics at once. Every gold label must be a class of `space`.
MetricsReport evaluate(std::span<const EvalPair> pairs, const corpus::LabelSpace& space,
                       const MetricOptions& options = {}, parsing::ParseMode mode = parsing::ParseMode::lenient);

struct ConfusionMatrix {
    std::vector<std::string> labels;
    /// Rows = gold labels; columns = labels, then "other", then "failure".
    std::vector<std::vector<std::size_t>> counts;
    std::vector<std::vector<double>> row_percent;

    static constexpr std::string_view kOther = "other";
    static constexpr std::string_view kFailure = "failure";

    std::vector<std::string> columns() const;
    std::size_t support(std::size_t row) const;
};

/// Rows for pairs whose (unified) gold label is selected. Predictions outside the
/// selection fold into "other", failures into "failure". ConfigError on an empty selection.
ConfusionMatrix confusion(std::span<const EvalPair> pairs, std::span<const std::string> selected_labels,
                          const std::map<std::string, std::string>& unification = {});

/// Labels present in at least `min_datasets` spaces after unification. "No Fallacy" counts
/// for each space that admits it. Ordered by count descending, then name.
std::vector<std::string> select_common_labels(std::span<const corpus::LabelSpace> spaces, int min_datasets,
                                              const std::map<std::string, std::string>& unification = {});

/// Mean of the reports of one cell. ConfigError when dataset, scheme, model, parse mode
/// or metric options differ.
MetricsReport aggregate_repeats(std::span<const MetricsReport> reports);

struct CellScore {
    double macro_f1 = 0;
    double failure_rate = 0;
};

/// (model, dataset) -> scheme -> score
using ScoreGrid = std::map<std::pair<std::string, std::string>, std::map<std::string, CellScore>>;

struct RankEntry {
    double mean_rank = 0;
    double mean_failure_rate = 0;
    std::size_t n_cells = 0;
};

struct RankTable {
    std::map<std::string, RankEntry> entries;
};

/// Ranks schemes within each cell (1 = best, ties share the mean position) and averages
/// per scheme. Cells with fewer than two schemes are skipped.
RankTable rank_schemes(const ScoreGrid& grid);

}  // namespace fallacy::metrics
