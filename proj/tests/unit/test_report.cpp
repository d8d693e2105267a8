#include <doctest.h>

#include "fallacy/error.hpp"
#include "fallacy/report.hpp"
#include "fixtures.hpp"

using namespace fallacy;
using namespace fallacy::report;
using corpus::DatasetId;
namespace fs = std::filesystem;

namespace {

ResultCell cell(std::string model, std::string dataset, std::string scheme, double f1) {
    return {std::move(model), std::move(dataset), std::move(scheme), f1, f1 - 1, 2.5, 100, ""};
}

const std::vector<ResultCell> kCells = {
    cell("m", "logic", "wod", 50),      cell("m", "logic", "wd", 60),  cell("m", "logic", "gfa", 70),
    cell("m", "logic", "pc1", 40),      cell("m", "logic", "gfa+1shot", 99),
    cell("m", "covid", "wod", 80),      cell("m", "covid", "wd", 70),  cell("m", "covid", "cot", 75),
    cell("n", "logic", "wod", 65),
};

}  // namespace

TEST_CASE("scheme labels") {
    CHECK(scheme_label("gfa_w") == "General Fallacy Analysis with Warm Up");
    CHECK(scheme_label("cot") == "Zero-shot CoT");
    CHECK(scheme_label("pc2+2shot") == "Premises & Conclusion 2 (2-shot)");
    CHECK(scheme_label("wd+formal+strict") == "With Definitions (formal definitions, strict parse)");
    CHECK(scheme_rounds("pc1+1shot") == 3);
    CHECK(scheme_rounds("wd+formal") == 1);
    CHECK_THROWS_AS(scheme_label("tot"), ConfigError);
}

TEST_CASE("main layout") {
    const auto e = emit_results_table(kCells, Layout::main);
    CHECK(e.text ==
          "| Setting | Model | logic | covid |\n"
          "|---|---|---|---|\n"
          "| Single | m | 60.00 | **80.00°** |\n"
          "| Single | n | 65.00° | - |\n"
          "| Multi | m | **70.00** | 75.00 |\n");
    CHECK(e.data ==
          "setting,model,dataset,macro_f1,best_scheme\n"
          "Single,m,logic,60.00,wd\n"
          "Single,m,covid,80.00,wod\n"
          "Single,n,logic,65.00,wod\n"
          "Multi,m,logic,70.00,gfa\n"
          "Multi,m,covid,75.00,cot\n");
    CHECK_THROWS_AS(emit_results_table(std::vector<ResultCell>{}, Layout::main), ContractViolation);
}

TEST_CASE("main layout ties go to the earlier scheme") {
    const std::vector<ResultCell> tied = {cell("m", "reddit", "wd", 55.25), cell("m", "reddit", "wod", 55.25),
                                          cell("m", "reddit", "pc2", 40), cell("m", "reddit", "dg", 40)};
    const auto e = emit_results_table(tied, Layout::main);
    CHECK(e.text.find("| Single | m | **55.25°** |") != std::string::npos);
    CHECK(e.data.find("Multi,m,reddit,40.00,dg\n") != std::string::npos);
}

TEST_CASE("detailed layout") {
    const auto e = emit_results_table(kCells, Layout::detailed);
    const auto lines = text::split_lines(e.text);
    CHECK(lines[0] == "| Model | Scheme | logic (F1 / Acc. / %Failed) | covid (F1 / Acc. / %Failed) |");
    CHECK(lines[2] == "| m | Without Definitions | 50.00 / 49.00 / 2.50 | 80.00 / 79.00 / 2.50 |");
    CHECK(e.text.find("| m | General Fallacy Analysis (1-shot) | 99.00 / 98.00 / 2.50 | - |") != std::string::npos);
    CHECK(e.text.find("| n | Without Definitions | 65.00 / 64.00 / 2.50 | - |") != std::string::npos);
    const auto rows = parse_csv(e.data);
    REQUIRE(rows.size() == kCells.size() + 1);
    CHECK(rows[0] == std::vector<std::string>{"model", "scheme", "dataset", "macro_f1", "accuracy", "failure_rate", "n"});
    CHECK(rows[1] == std::vector<std::string>{"m", "wod", "logic", "50.00", "49.00", "2.50", "100"});
    CHECK(rows.back()[0] == "n");
}

TEST_CASE("rank table") {
    metrics::RankTable t;
    t.entries["wod"] = {1.5, 2.0, 3};
    t.entries["gfa"] = {1.5, 4.125, 3};
    t.entries["pc1+1shot"] = {3.0, 0.0, 3};
    const auto e = emit_rank_table(t);
    CHECK(e.text ==
          "| Scheme | #R | Mean rank | Mean %Failed |\n"
          "|---|---|---|---|\n"
          "| General Fallacy Analysis | 2 | 1.50 | 4.13 |\n"
          "| Without Definitions | 1 | 1.50 | 2.00 |\n"
          "| Premises & Conclusion 1 (1-shot) | 3 | 3.00 | 0.00 |\n");
    const auto rows = parse_csv(e.data);
    CHECK(rows[1] == std::vector<std::string>{"gfa", "General Fallacy Analysis", "2", "1.50", "4.13", "3"});
    CHECK_THROWS_AS(emit_rank_table({}), ContractViolation);
}

TEST_CASE("confusion emission and CSV round-trip") {
    const std::vector<metrics::EvalPair> pairs = {
        metrics::EvalPair::make("Red, \"quoted\"", "Red, \"quoted\""), metrics::EvalPair::make("Red, \"quoted\"", "X"),
        metrics::EvalPair::make("Red, \"quoted\"", std::nullopt), metrics::EvalPair::make("two\nlines", "two\nlines")};
    const std::vector<std::string> labels = {"Red, \"quoted\"", "two\nlines"};
    const auto e = emit_confusion(metrics::confusion(pairs, labels));
    const auto rows = parse_csv(e.data);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"gold", "Red, \"quoted\"", "two\nlines", "other", "failure"});
    CHECK(rows[1] == std::vector<std::string>{"Red, \"quoted\"", "33.3", "0.0", "33.3", "33.3"});
    CHECK(rows[2] == std::vector<std::string>{"two\nlines", "0.0", "100.0", "0.0", "0.0"});

    CHECK(parse_csv("a,b\r\n\"c\"\"d\",\n") ==
          std::vector<std::vector<std::string>>{{"a", "b"}, {"c\"d", ""}});
    CHECK(parse_csv("tail,no newline") == std::vector<std::vector<std::string>>{{"tail", "no newline"}});
    CHECK_THROWS_AS(parse_csv("\"open"), SchemaError);
}

TEST_CASE("sweep report files are deterministic") {
    const auto root = fixtures::fresh_dir("report-sweep");
    fixtures::FixtureOptions opts;
    opts.per_split = 12;
    for (auto d : {DatasetId::logic, DatasetId::covid, DatasetId::argotario})
        fixtures::write_dataset(root / "data", fixtures::shipped_registry(), d, opts);

    std::vector<runner::RunConfig> configs;
    for (auto d : {DatasetId::logic, DatasetId::covid, DatasetId::argotario})
        for (auto s : {schemes::Scheme::wod, schemes::Scheme::gfa}) {
            runner::RunConfig c;
            c.dataset = d;
            c.scheme = {s, 0};
            c.backend = backend::scripted_backend(backend::ScriptedBehavior::round_robin);
            c.backend.scripted.cycle = {"Appeal to False Authority", "Red Herring", "No Fallacy"};
            c.params = backend::default_params(c.backend.model_name);
            c.data_source = root / "data";
            c.data_dir = fixtures::shipped_data_dir();
            c.output_dir = root / "cells" / std::string(corpus::to_string(d)) / std::string(schemes::to_string(s));
            c.abort_fraction = 1.0;
            configs.push_back(c);
        }
    const auto result = runner::sweep(configs);
    write_sweep_reports(root / "a", result, fixtures::shipped_registry());
    write_sweep_reports(root / "b", result, fixtures::shipped_registry());
    for (const char* f : {"results_main.md", "results_main.csv", "results_detailed.md", "results_detailed.csv",
                          "ranks.md", "ranks.csv", "confusion_all.csv"}) {
        CAPTURE(f);
        REQUIRE(fs::exists(root / "a" / f));
        CHECK(read_text(root / "a" / f) == read_text(root / "b" / f));
    }
    const auto ranks = parse_csv(read_text(root / "a" / "ranks.csv"));
    CHECK(ranks.size() == 3);
    CHECK(ranks[1][5] == "3");
    const auto confusion = parse_csv(read_text(root / "a" / "confusion_all.csv"));
    CHECK(confusion[0].front() == "gold");
    CHECK(confusion[0].back() == "failure");
    CHECK(confusion[1][0] == "Red Herring");
    CHECK(parse_csv(read_text(root / "a" / "results_detailed.csv")).size() == configs.size() + 1);
    fs::remove_all(root);
}
