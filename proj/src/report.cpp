#include "fallacy/report.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>

#include "fallacy/error.hpp"

namespace fallacy::report {

namespace {

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string csv_row(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += csv_field(fields[i]);
    }
    return out + "\n";
}

std::string md_row(const std::vector<std::string>& cells) {
    std::string out = "|";
    for (const auto& c : cells) out += " " + c + " |";
    return out + "\n";
}

std::string md_rule(std::size_t n) {
    std::string out = "|";
    for (std::size_t i = 0; i < n; ++i) out += "---|";
    return out + "\n";
}

std::vector<std::string> split_key(std::string_view key) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t plus = key.find('+', start);
        parts.emplace_back(key.substr(start, plus - start));
        if (plus == std::string_view::npos) break;
        start = plus + 1;
    }
    return parts;
}

bool zero_shot(std::string_view key) {
    for (const auto& p : split_key(key))
        if (p.size() > 4 && p.ends_with("shot")) return false;
    return true;
}

schemes::Scheme base_scheme(std::string_view key) { return schemes::parse_scheme(split_key(key).front()); }

/// Position of a scheme key in display order: scheme order, then key text.
std::pair<std::size_t, std::string> scheme_order(const std::string& key) {
    const auto s = base_scheme(key);
    const auto it = std::find(schemes::kAllSchemes.begin(), schemes::kAllSchemes.end(), s);
    return {static_cast<std::size_t>(it - schemes::kAllSchemes.begin()), key};
}

std::vector<std::string> dataset_columns(std::span<const ResultCell> cells) {
    std::vector<std::string> out;
    for (auto id : corpus::kAllDatasets) {
        const std::string name(corpus::to_string(id));
        if (std::any_of(cells.begin(), cells.end(), [&](const ResultCell& c) { return c.dataset == name; }))
            out.push_back(name);
    }
    for (const auto& c : cells)
        if (std::find(out.begin(), out.end(), c.dataset) == out.end()) out.push_back(c.dataset);
    return out;
}

std::vector<std::string> models_in_order(std::span<const ResultCell> cells) {
    std::vector<std::string> out;
    for (const auto& c : cells)
        if (std::find(out.begin(), out.end(), c.model) == out.end()) out.push_back(c.model);
    return out;
}

Emission main_table(std::span<const ResultCell> cells) {
    const auto datasets = dataset_columns(cells);
    const auto models = models_in_order(cells);
    struct Best {
        double value;
        std::string scheme;
    };
    // (setting, model, dataset) -> best zero-shot cell
    std::map<std::tuple<std::string, std::string, std::string>, Best> best;
    for (const auto& c : cells) {
        if (!zero_shot(c.scheme)) continue;
        const auto s = base_scheme(c.scheme);
        const std::string setting = schemes::round_count(s) == 1 ? "Single" : "Multi";
        auto key = std::make_tuple(setting, c.model, c.dataset);
        auto it = best.find(key);
        if (it == best.end() || c.macro_f1 > it->second.value ||
            (c.macro_f1 == it->second.value && scheme_order(c.scheme) < scheme_order(it->second.scheme)))
            best[key] = {c.macro_f1, c.scheme};
    }
    std::map<std::string, double> column_max;
    for (const auto& [k, b] : best) {
        const auto& ds = std::get<2>(k);
        if (!column_max.count(ds) || b.value > column_max[ds]) column_max[ds] = b.value;
    }

    std::vector<std::string> header{"Setting", "Model"};
    header.insert(header.end(), datasets.begin(), datasets.end());
    Emission e;
    e.text = md_row(header) + md_rule(header.size());
    e.data = csv_row({"setting", "model", "dataset", "macro_f1", "best_scheme"});
    for (const std::string setting : {"Single", "Multi"}) {
        for (const auto& model : models) {
            std::vector<std::string> row{setting, model};
            bool any = false;
            for (const auto& ds : datasets) {
                auto it = best.find({setting, model, ds});
                if (it == best.end()) {
                    row.emplace_back("-");
                    continue;
                }
                any = true;
                std::string v = text::fixed(it->second.value, 2);
                if (setting == "Single" && base_scheme(it->second.scheme) == schemes::Scheme::wod) v += "°";
                if (it->second.value == column_max[ds]) v = "**" + v + "**";
                row.push_back(v);
                e.data += csv_row({setting, model, ds, text::fixed(it->second.value, 2), it->second.scheme});
            }
            if (any) e.text += md_row(row);
        }
    }
    return e;
}

Emission detailed_table(std::span<const ResultCell> cells) {
    const auto datasets = dataset_columns(cells);
    const auto models = models_in_order(cells);
    std::vector<const ResultCell*> sorted;
    for (const auto& c : cells) sorted.push_back(&c);
    auto model_pos = [&](const std::string& m) { return std::find(models.begin(), models.end(), m) - models.begin(); };
    auto ds_pos = [&](const std::string& d) { return std::find(datasets.begin(), datasets.end(), d) - datasets.begin(); };
    std::stable_sort(sorted.begin(), sorted.end(), [&](const ResultCell* a, const ResultCell* b) {
        return std::make_tuple(model_pos(a->model), scheme_order(a->scheme), ds_pos(a->dataset)) <
               std::make_tuple(model_pos(b->model), scheme_order(b->scheme), ds_pos(b->dataset));
    });

    std::vector<std::string> header{"Model", "Scheme"};
    for (const auto& ds : datasets) header.push_back(ds + " (F1 / Acc. / %Failed)");
    Emission e;
    e.text = md_row(header) + md_rule(header.size());
    e.data = csv_row({"model", "scheme", "dataset", "macro_f1", "accuracy", "failure_rate", "n"});

    std::map<std::pair<std::string, std::string>, std::map<std::string, const ResultCell*>> rows;
    std::vector<std::pair<std::string, std::string>> row_order;
    for (const auto* c : sorted) {
        const auto key = std::make_pair(c->model, c->scheme);
        if (!rows.count(key)) row_order.push_back(key);
        rows[key][c->dataset] = c;
        e.data += csv_row({c->model, c->scheme, c->dataset, text::fixed(c->macro_f1, 2), text::fixed(c->accuracy, 2),
                           text::fixed(c->failure_rate, 2), std::to_string(c->n)});
    }
    for (const auto& key : row_order) {
        std::vector<std::string> row{key.first, scheme_label(key.second)};
        for (const auto& ds : datasets) {
            auto it = rows[key].find(ds);
            if (it == rows[key].end()) {
                row.emplace_back("-");
                continue;
            }
            const auto* c = it->second;
            row.push_back(text::fixed(c->macro_f1, 2) + " / " + text::fixed(c->accuracy, 2) + " / " +
                          text::fixed(c->failure_rate, 2));
        }
        e.text += md_row(row);
    }
    return e;
}

}  // namespace

std::string scheme_label(std::string_view cell_key) {
    const auto parts = split_key(cell_key);
    std::string label(schemes::display_name(schemes::parse_scheme(parts.front())));
    std::vector<std::string> qualifiers;
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const auto& p = parts[i];
        if (p.size() > 4 && p.ends_with("shot")) qualifiers.push_back(p.substr(0, p.size() - 4) + "-shot");
        else if (p == "formal") qualifiers.emplace_back("formal definitions");
        else if (p == "strict") qualifiers.emplace_back("strict parse");
        else qualifiers.push_back(p);
    }
    if (!qualifiers.empty()) label += " (" + text::join(qualifiers, ", ") + ")";
    return label;
}

int scheme_rounds(std::string_view cell_key) { return schemes::round_count(base_scheme(cell_key)); }

std::vector<ResultCell> cells_from_sweep(const runner::SweepResult& sweep) {
    std::vector<ResultCell> out;
    for (const auto& c : sweep.cells)
        out.push_back({c.model, c.dataset, c.scheme, c.aggregate.macro_f1, c.aggregate.accuracy,
                       c.aggregate.failure_rate, c.aggregate.n, c.report_digest});
    return out;
}

Emission emit_results_table(std::span<const ResultCell> cells, Layout layout) {
    if (cells.empty()) throw ContractViolation("results table needs at least one cell");
    return layout == Layout::main ? main_table(cells) : detailed_table(cells);
}

Emission emit_confusion(const metrics::ConfusionMatrix& matrix) {
    const auto cols = matrix.columns();
    if (matrix.row_percent.size() != matrix.labels.size()) throw ContractViolation("malformed confusion matrix");
    std::vector<std::string> header{"gold"};
    header.insert(header.end(), cols.begin(), cols.end());
    Emission e;
    e.data = csv_row(header);
    e.text = md_row(header) + md_rule(header.size());
    for (std::size_t r = 0; r < matrix.labels.size(); ++r) {
        if (matrix.row_percent[r].size() != cols.size()) throw ContractViolation("malformed confusion matrix row");
        std::vector<std::string> row{matrix.labels[r]};
        for (double v : matrix.row_percent[r]) row.push_back(text::fixed(v, 1));
        e.data += csv_row(row);
        e.text += md_row(row);
    }
    return e;
}

Emission emit_rank_table(const metrics::RankTable& table) {
    if (table.entries.empty()) throw ContractViolation("rank table is empty");
    struct Row {
        std::string key, name;
        int rounds;
        metrics::RankEntry entry;
    };
    std::vector<Row> rows;
    for (const auto& [key, entry] : table.entries) rows.push_back({key, scheme_label(key), scheme_rounds(key), entry});
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.entry.mean_rank != b.entry.mean_rank) return a.entry.mean_rank < b.entry.mean_rank;
        return a.name < b.name;
    });
    Emission e;
    e.text = md_row({"Scheme", "#R", "Mean rank", "Mean %Failed"}) + md_rule(4);
    e.data = csv_row({"scheme", "name", "rounds", "mean_rank", "mean_failure_rate", "n_cells"});
    for (const auto& r : rows) {
        const std::string rank = text::fixed(r.entry.mean_rank, 2);
        const std::string fail = text::fixed(r.entry.mean_failure_rate, 2);
        e.text += md_row({r.name, std::to_string(r.rounds), rank, fail});
        e.data += csv_row({r.key, r.name, std::to_string(r.rounds), rank, fail, std::to_string(r.entry.n_cells)});
    }
    return e;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool row_open = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
            continue;
        }
        row_open = true;
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            row_open = false;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (quoted) throw SchemaError("unterminated quoted CSV field");
    if (row_open) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_sweep_reports(const std::filesystem::path& dir, const runner::SweepResult& sweep,
                         const corpus::DatasetRegistry& registry) {
    const auto cells = cells_from_sweep(sweep);
    if (cells.empty()) return;
    const auto main = emit_results_table(cells, Layout::main);
    write_text(dir / "results_main.md", main.text);
    write_text(dir / "results_main.csv", main.data);
    const auto detailed = emit_results_table(cells, Layout::detailed);
    write_text(dir / "results_detailed.md", detailed.text);
    write_text(dir / "results_detailed.csv", detailed.data);

    const auto ranks = metrics::rank_schemes(sweep.grid);
    std::optional<std::set<std::string>> top;
    if (!ranks.entries.empty()) {
        const auto emitted = emit_rank_table(ranks);
        write_text(dir / "ranks.md", emitted.text);
        write_text(dir / "ranks.csv", emitted.data);
        std::vector<std::pair<double, std::string>> order;
        for (const auto& [k, v] : ranks.entries) order.emplace_back(v.mean_rank, k);
        std::sort(order.begin(), order.end());
        top.emplace();
        for (std::size_t i = 0; i < order.size() && i < 3; ++i) top->insert(order[i].second);
    }

    // Pooled confusion over the best-ranked schemes (all schemes when nothing was ranked).
    std::vector<corpus::LabelSpace> spaces;
    std::set<std::string> seen;
    std::vector<metrics::EvalPair> pairs;
    for (const auto& c : sweep.cells) {
        if (top && !top->count(c.scheme)) continue;
        const auto id = corpus::parse_dataset(c.dataset);
        if (seen.insert(c.dataset).second) spaces.push_back(registry.label_space(id));
        for (const auto& j : read_jsonl(c.output_dir / "episodes.jsonl")) {
            const auto e = runner::EpisodeRecord::from_json(j);
            if (!e.transport_failed) pairs.push_back({e.gold, e.outcome});
        }
    }
    const int min_datasets = spaces.size() >= 3 ? 3 : 1;
    const auto labels = metrics::select_common_labels(spaces, min_datasets, registry.unification());
    if (labels.empty() || pairs.empty()) return;
    const auto matrix = metrics::confusion(pairs, labels, registry.unification());
    write_text(dir / "confusion_all.csv", emit_confusion(matrix).data);
}

}  // namespace fallacy::report
