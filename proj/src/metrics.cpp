#include "fallacy/metrics.hpp"

#include <algorithm>
#include <set>

#include "fallacy/error.hpp"

namespace fallacy::metrics {

EvalPair EvalPair::make(std::string gold, std::optional<std::string> predicted) {
    EvalPair p;
    p.gold = std::move(gold);
    if (predicted) {
        p.outcome.kind = parsing::OutcomeKind::prediction;
        p.outcome.label = std::move(*predicted);
    } else {
        p.outcome.kind = parsing::OutcomeKind::unparseable;
    }
    return p;
}

std::string_view to_string(Averaging a) { return a == Averaging::full_space ? "full_space" : "observed"; }
std::string_view to_string(FailureMode f) { return f == FailureMode::as_class ? "as_class" : "non_class"; }

Averaging parse_averaging(std::string_view s) {
    if (s == "observed") return Averaging::observed;
    if (s == "full_space" || s == "full-space") return Averaging::full_space;
    throw ConfigError("unknown averaging mode: " + std::string(s));
}

FailureMode parse_failure_mode(std::string_view s) {
    if (s == "non_class" || s == "non-class") return FailureMode::non_class;
    if (s == "as_class" || s == "as-class") return FailureMode::as_class;
    throw ConfigError("unknown failure mode: " + std::string(s));
}

namespace {

void require_nonempty(std::span<const EvalPair> pairs) {
    if (pairs.empty()) throw ContractViolation("metrics need at least one evaluation pair");
}

bool correct(const EvalPair& p) { return !p.outcome.is_failure() && p.outcome.label == p.gold; }

struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
};

std::map<std::string, ClassMetrics> per_class_metrics(std::span<const EvalPair> pairs, const corpus::LabelSpace& space,
                                                      const MetricOptions& options) {
    std::vector<std::string> classes = space.classes();
    const std::set<std::string> valid(classes.begin(), classes.end());
    std::map<std::string, Counts> counts;
    std::size_t failures = 0;
    for (const auto& p : pairs) {
        if (!valid.count(p.gold)) throw ContractViolation("gold label outside the label space: " + p.gold);
        if (p.outcome.is_failure()) {
            ++counts[p.gold].fn;
            ++failures;
            continue;
        }
        if (!valid.count(p.outcome.label))
            throw ContractViolation("prediction outside the label space: " + p.outcome.label);
        if (p.outcome.label == p.gold) {
            ++counts[p.gold].tp;
        } else {
            ++counts[p.gold].fn;
            ++counts[p.outcome.label].fp;
        }
    }
    if (options.failure_mode == FailureMode::as_class && failures) {
        classes.emplace_back(kFailedClass);
        counts[std::string(kFailedClass)].fp = failures;
    }

    std::map<std::string, ClassMetrics> out;
    for (const auto& c : classes) {
        const Counts k = counts.count(c) ? counts.at(c) : Counts{};
        const std::size_t support = k.tp + k.fn;
        const std::size_t predicted = k.tp + k.fp;
        if (options.averaging == Averaging::observed && support == 0 && predicted == 0) continue;
        ClassMetrics m;
        m.support = static_cast<double>(support);
        m.predicted = static_cast<double>(predicted);
        m.precision = predicted ? static_cast<double>(k.tp) / static_cast<double>(predicted) : 0.0;
        m.recall = support ? static_cast<double>(k.tp) / static_cast<double>(support) : 0.0;
        const std::size_t denom = 2 * k.tp + k.fp + k.fn;
        m.f1 = denom ? 2.0 * static_cast<double>(k.tp) / static_cast<double>(denom) : 0.0;
        out.emplace(c, m);
    }
    return out;
}

double mean_f1(const std::map<std::string, ClassMetrics>& per_class) {
    if (per_class.empty()) return 0.0;
    double sum = 0;
    for (const auto& [_, m] : per_class) sum += m.f1;
    return 100.0 * sum / static_cast<double>(per_class.size());
}

}  // namespace

double macro_f1(std::span<const EvalPair> pairs, const corpus::LabelSpace& space, const MetricOptions& options) {
    require_nonempty(pairs);
    return mean_f1(per_class_metrics(pairs, space, options));
}

double accuracy(std::span<const EvalPair> pairs) {
    require_nonempty(pairs);
    const auto hits = std::count_if(pairs.begin(), pairs.end(), correct);
    return 100.0 * static_cast<double>(hits) / static_cast<double>(pairs.size());
}

double failure_rate(std::span<const EvalPair> pairs) {
    require_nonempty(pairs);
    const auto failed = std::count_if(pairs.begin(), pairs.end(), [](const EvalPair& p) { return p.outcome.is_failure(); });
    return 100.0 * static_cast<double>(failed) / static_cast<double>(pairs.size());
}

MetricsReport evaluate(std::span<const EvalPair> pairs, const corpus::LabelSpace& space, const MetricOptions& options,
                       parsing::ParseMode mode) {
    require_nonempty(pairs);
    MetricsReport r;
    r.per_class = per_class_metrics(pairs, space, options);
    r.macro_f1 = mean_f1(r.per_class);
    r.accuracy = accuracy(pairs);
    r.failure_rate = failure_rate(pairs);
    r.n = pairs.size();
    r.parse_mode = mode;
    r.options = options;
    r.dataset = std::string(corpus::to_string(space.dataset()));
    for (const auto& p : pairs) {
        ++r.outcome_counts[std::string(parsing::to_string(p.outcome.kind))];
        if (p.outcome.multi_label) ++r.multi_label;
    }
    return r;
}

json MetricsReport::to_json() const {
    json pc = json::object();
    for (const auto& [label, m] : per_class)
        pc[label] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support},
                     {"predicted", m.predicted}};
    return json{{"macro_f1", macro_f1},
                {"accuracy", accuracy},
                {"failure_rate", failure_rate},
                {"n", n},
                {"parse_mode", std::string(parsing::to_string(parse_mode))},
                {"averaging", std::string(to_string(options.averaging))},
                {"failure_mode", std::string(to_string(options.failure_mode))},
                {"dataset", dataset},
                {"scheme", scheme},
                {"model", model},
                {"outcome_counts", outcome_counts},
                {"multi_label", multi_label},
                {"per_class", pc}};
}

MetricsReport MetricsReport::from_json(const json& j) {
    MetricsReport r;
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    r.failure_rate = j.at("failure_rate").get<double>();
    r.n = j.at("n").get<std::size_t>();
    r.parse_mode = parsing::parse_mode(j.value("parse_mode", std::string("lenient")));
    r.options.averaging = parse_averaging(j.value("averaging", std::string("observed")));
    r.options.failure_mode = parse_failure_mode(j.value("failure_mode", std::string("non_class")));
    r.dataset = j.value("dataset", std::string{});
    r.scheme = j.value("scheme", std::string{});
    r.model = j.value("model", std::string{});
    r.outcome_counts = j.value("outcome_counts", std::map<std::string, std::size_t>{});
    r.multi_label = j.value("multi_label", std::size_t{0});
    const json per_class = j.value("per_class", json::object());
    for (const auto& [label, m] : per_class.items())
        r.per_class[label] = {m.at("precision").get<double>(), m.at("recall").get<double>(), m.at("f1").get<double>(),
                              m.at("support").get<double>(), m.value("predicted", 0.0)};
    return r;
}

// ---------------------------------------------------------------- confusion

std::vector<std::string> ConfusionMatrix::columns() const {
    std::vector<std::string> cols = labels;
    cols.emplace_back(kOther);
    cols.emplace_back(kFailure);
    return cols;
}

std::size_t ConfusionMatrix::support(std::size_t row) const {
    std::size_t s = 0;
    for (auto c : counts.at(row)) s += c;
    return s;
}

ConfusionMatrix confusion(std::span<const EvalPair> pairs, std::span<const std::string> selected_labels,
                          const std::map<std::string, std::string>& unification) {
    if (selected_labels.empty()) throw ConfigError("confusion matrix needs at least one selected label");
    auto unify = [&](const std::string& l) {
        auto it = unification.find(l);
        return it == unification.end() ? l : it->second;
    };
    ConfusionMatrix m;
    m.labels.assign(selected_labels.begin(), selected_labels.end());
    const std::size_t k = m.labels.size();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < k; ++i)
        if (!index.emplace(m.labels[i], i).second) throw ConfigError("duplicate selected label: " + m.labels[i]);
    m.counts.assign(k, std::vector<std::size_t>(k + 2, 0));
    for (const auto& p : pairs) {
        auto row = index.find(unify(p.gold));
        if (row == index.end()) continue;
        std::size_t col = k + 1;
        if (!p.outcome.is_failure()) {
            auto c = index.find(unify(p.outcome.label));
            col = c == index.end() ? k : c->second;
        }
        ++m.counts[row->second][col];
    }
    m.row_percent.assign(k, std::vector<double>(k + 2, 0.0));
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t s = m.support(r);
        if (!s) continue;
        for (std::size_t c = 0; c < k + 2; ++c)
            m.row_percent[r][c] = 100.0 * static_cast<double>(m.counts[r][c]) / static_cast<double>(s);
    }
    return m;
}

std::vector<std::string> select_common_labels(std::span<const corpus::LabelSpace> spaces, int min_datasets,
                                              const std::map<std::string, std::string>& unification) {
    if (min_datasets < 1) throw ContractViolation("min_datasets must be >= 1");
    auto unify = [&](const std::string& l) {
        auto it = unification.find(l);
        return it == unification.end() ? l : it->second;
    };
    std::map<std::string, int> count;
    for (const auto& space : spaces) {
        std::set<std::string> seen;
        for (const auto& l : space.classes()) seen.insert(unify(l));
        for (const auto& l : seen) ++count[l];
    }
    std::vector<std::pair<std::string, int>> kept;
    for (const auto& [l, c] : count)
        if (c >= min_datasets) kept.emplace_back(l, c);
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::string> out;
    for (auto& [l, _] : kept) out.push_back(l);
    return out;
}

MetricsReport aggregate_repeats(std::span<const MetricsReport> reports) {
    if (reports.empty()) throw ContractViolation("aggregate_repeats needs at least one report");
    const MetricsReport& first = reports.front();
    for (const auto& r : reports)
        if (r.dataset != first.dataset || r.scheme != first.scheme || r.model != first.model ||
            r.parse_mode != first.parse_mode || !(r.options == first.options))
            throw ConfigError("cannot aggregate reports from different cells");
    const double k = static_cast<double>(reports.size());
    MetricsReport out;
    out.dataset = first.dataset;
    out.scheme = first.scheme;
    out.model = first.model;
    out.parse_mode = first.parse_mode;
    out.options = first.options;
    double n_sum = 0;
    std::size_t multi = 0;
    for (const auto& r : reports) {
        out.macro_f1 += r.macro_f1;
        out.accuracy += r.accuracy;
        out.failure_rate += r.failure_rate;
        n_sum += static_cast<double>(r.n);
        multi += r.multi_label;
        for (const auto& [kind, c] : r.outcome_counts) out.outcome_counts[kind] += c;
        for (const auto& [label, m] : r.per_class) {
            auto& a = out.per_class[label];
            a.precision += m.precision;
            a.recall += m.recall;
            a.f1 += m.f1;
            a.support += m.support;
            a.predicted += m.predicted;
        }
    }
    out.macro_f1 /= k;
    out.accuracy /= k;
    out.failure_rate /= k;
    out.n = static_cast<std::size_t>(n_sum / k + 0.5);
    out.multi_label = multi;
    for (auto& [_, a] : out.per_class) {
        a.precision /= k;
        a.recall /= k;
        a.f1 /= k;
        a.support /= k;
        a.predicted /= k;
    }
    return out;
}

RankTable rank_schemes(const ScoreGrid& grid) {
    struct Acc {
        double rank_sum = 0, failure_sum = 0;
        std::size_t cells = 0;
    };
    std::map<std::string, Acc> acc;
    for (const auto& [cell, scores] : grid) {
        if (scores.size() < 2) {
            log_note("rank_schemes: skipping cell (" + cell.first + ", " + cell.second + ") with a single scheme");
            continue;
        }
        std::vector<std::pair<std::string, CellScore>> sorted(scores.begin(), scores.end());
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const auto& a, const auto& b) { return a.second.macro_f1 > b.second.macro_f1; });
        std::size_t i = 0;
        while (i < sorted.size()) {
            std::size_t j = i;
            while (j + 1 < sorted.size() && sorted[j + 1].second.macro_f1 == sorted[i].second.macro_f1) ++j;
            const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
            for (std::size_t t = i; t <= j; ++t) {
                auto& a = acc[sorted[t].first];
                a.rank_sum += rank;
                a.failure_sum += sorted[t].second.failure_rate;
                ++a.cells;
            }
            i = j + 1;
        }
    }
    RankTable table;
    for (const auto& [scheme, a] : acc)
        table.entries[scheme] = {a.rank_sum / static_cast<double>(a.cells), a.failure_sum / static_cast<double>(a.cells),
                                 a.cells};
    return table;
}

}  // namespace fallacy::metrics
