// Command-line front end: run, sweep, validate, render.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "fallacy/error.hpp"
#include "fallacy/report.hpp"
#include "fallacy/runner.hpp"

using namespace fallacy;

namespace {

struct RunOptions {
    std::string dataset;
    std::string scheme;
    std::string definitions = "none";
    std::string model;
    std::string endpoint;
    int repeats = 1;
    std::int64_t seed = 0;
    int shots = 0;
    std::string parse_mode = "lenient";
    std::string replay;
    std::string record;
    std::string out;
    std::string data;
    std::string data_dir;
    std::size_t subsample = 0;
    std::string split;
    std::string system_message;
    int max_in_flight = 4;
    int max_retries = 5;
    std::string auth_env = "OPENAI_API_KEY";
    bool supports_top_k = false;
    std::string scripted;
    std::string scripted_label;
    std::vector<std::string> scripted_cycle;
    double temperature = -1;
    double top_p = -1;
    int top_k = -1;
    bool no_seed = false;
    bool full_space = false;
    bool failures_as_class = false;
};

runner::RunConfig to_config(const RunOptions& o) {
    runner::RunConfig c;
    c.dataset = corpus::parse_dataset(o.dataset);
    c.scheme.value = schemes::parse_scheme(o.scheme);
    c.scheme.fewshot_k = o.shots;
    c.definitions = runner::parse_definitions_style(o.definitions);
    c.repeats = o.repeats;
    c.seed = o.seed;
    c.parse_mode = parsing::parse_mode(o.parse_mode);
    c.output_dir = o.out;
    c.data_source = o.data;
    if (!o.data_dir.empty()) c.data_dir = o.data_dir;
    if (o.subsample) c.subsample = o.subsample;
    if (!o.split.empty()) c.split_override = corpus::parse_split(o.split);
    if (!o.system_message.empty()) c.system_message = o.system_message;
    c.send_seed = !o.no_seed;
    if (o.full_space) c.metric_options.averaging = metrics::Averaging::full_space;
    if (o.failures_as_class) c.metric_options.failure_mode = metrics::FailureMode::as_class;

    auto& b = c.backend;
    if (!o.scripted.empty()) {
        b = backend::scripted_backend(backend::parse_scripted_behavior(o.scripted), o.scripted_label, o.scripted_cycle);
    } else if (!o.replay.empty()) {
        b.kind = backend::BackendKind::replay;
        b.record_path = o.replay;
    } else if (!o.endpoint.empty()) {
        b.kind = backend::BackendKind::http;
        b.endpoint_url = o.endpoint;
    } else {
        throw ConfigError("choose a backend: --endpoint, --replay or --scripted");
    }
    if (!o.model.empty()) b.model_name = o.model;
    if (!o.record.empty()) b.record_output = o.record;
    b.max_in_flight = o.max_in_flight;
    b.retry_policy.max_retries = o.max_retries;
    b.auth_env_var = o.auth_env;
    b.supports_top_k = o.supports_top_k;

    c.params = backend::default_params(b.model_name);
    if (o.temperature >= 0) c.params.temperature = o.temperature;
    if (o.top_p >= 0) c.params.top_p = o.top_p;
    if (o.top_k >= 0) c.params.top_k = o.top_k;
    return c;
}

void print_report(const std::string& title, const metrics::MetricsReport& r) {
    std::printf("%-10s macro_f1=%s accuracy=%s failed=%s n=%zu\n", title.c_str(), text::fixed(r.macro_f1, 2).c_str(),
                text::fixed(r.accuracy, 2).c_str(), text::fixed(r.failure_rate, 2).c_str(), r.n);
}

int cmd_run(const RunOptions& o) {
    const auto config = to_config(o);
    const auto result = runner::run_experiment(config);
    for (std::size_t i = 0; i < result.repeats.size(); ++i)
        print_report("repeat " + std::to_string(i + 1), result.repeats[i]);
    print_report("mean", result.aggregate);
    if (result.resumed) std::printf("resumed %zu episodes\n", result.resumed);
    std::printf("outputs in %s\n", config.output_dir.string().c_str());
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& report_dir) {
    const auto plan = runner::load_sweep_config(config_path);
    const auto result = runner::sweep(plan.configs);
    const auto data_dir = plan.configs.empty() || plan.configs.front().data_dir.empty()
                              ? default_data_dir()
                              : plan.configs.front().data_dir;
    const std::filesystem::path out = report_dir.empty() ? plan.output_dir : std::filesystem::path(report_dir);
    report::write_sweep_reports(out, result, corpus::DatasetRegistry::load(data_dir));
    for (const auto& c : result.cells)
        std::printf("%s %s %s macro_f1=%s failed=%s\n", c.model.c_str(), c.dataset.c_str(), c.scheme.c_str(),
                    text::fixed(c.aggregate.macro_f1, 2).c_str(), text::fixed(c.aggregate.failure_rate, 2).c_str());
    std::printf("reports in %s\n", out.string().c_str());
    return 0;
}

int cmd_validate(const std::vector<std::string>& datasets, const std::string& data, const std::string& data_dir_opt) {
    const auto data_dir = data_dir_opt.empty() ? default_data_dir() : std::filesystem::path(data_dir_opt);
    const auto registry = corpus::DatasetRegistry::load(data_dir);
    std::vector<corpus::DatasetId> ids;
    if (datasets.empty()) ids.assign(corpus::kAllDatasets.begin(), corpus::kAllDatasets.end());
    for (const auto& d : datasets) ids.push_back(corpus::parse_dataset(d));

    bool ok = true;
    for (auto id : ids) {
        const auto& profile = registry.profile(id);
        const auto [spec, examples] = corpus::load_dataset(registry, id, data);
        std::printf("%s: %zu labels%s\n", std::string(corpus::to_string(id)).c_str(), spec.label_space.cardinality(),
                    spec.label_space.allows_no_fallacy() ? " + No Fallacy" : "");
        for (const auto& [split, want] : profile.expected_splits) {
            const auto it = spec.split_sizes.find(split);
            const std::size_t got = it == spec.split_sizes.end() ? 0 : it->second;
            std::printf("  %-9s %5zu (expected %zu)%s\n", std::string(corpus::to_string(split)).c_str(), got, want,
                        got == want ? "" : "  MISMATCH");
            ok = ok && got == want;
        }
        for (const auto& [split, got] : spec.split_sizes)
            if (!profile.expected_splits.count(split)) {
                std::printf("  %-9s %5zu (unexpected split)  MISMATCH\n", std::string(corpus::to_string(split)).c_str(), got);
                ok = false;
            }
        const auto check = corpus::check_class_distribution(data_dir, spec, examples);
        for (const auto& m : check.mismatches) std::printf("  distribution: %s\n", m.c_str());
    }
    return ok ? 0 : 1;
}

int cmd_render(const RunOptions& o, const std::string& example_id) {
    const auto data_dir = o.data_dir.empty() ? default_data_dir() : std::filesystem::path(o.data_dir);
    const auto registry = corpus::DatasetRegistry::load(data_dir);
    const auto id = corpus::parse_dataset(o.dataset);
    const auto [spec, examples] = corpus::load_dataset(registry, id, o.data);
    const auto split = o.split.empty() ? spec.classify_split : corpus::parse_split(o.split);

    const corpus::FallacyExample* target = nullptr;
    std::vector<corpus::FallacyExample> pool;
    for (const auto& ex : examples) {
        if (ex.split != split) pool.push_back(ex);
        if (!target && ex.split == split && (example_id.empty() || ex.id == example_id)) target = &ex;
    }
    if (!target) throw ConfigError("no matching example in split " + std::string(corpus::to_string(split)));

    schemes::SchemeId scheme{schemes::parse_scheme(o.scheme), o.shots};
    const auto style = runner::parse_definitions_style(o.definitions);
    std::optional<std::string> defs;
    if (style != runner::DefinitionsStyle::none) {
        const auto reg = knowledge::DefinitionRegistry::load(data_dir);
        defs = knowledge::render_definition_block(knowledge::get_definitions(
            reg, spec.label_space,
            style == runner::DefinitionsStyle::formal ? knowledge::DefinitionStyle::formal
                                                      : knowledge::DefinitionStyle::informal));
    }
    const auto demos = runner::sample_fewshot(pool, spec.label_space, o.shots, o.seed + 1, target->id);
    const auto plan = schemes::plan_scheme(schemes::TemplateStore::load(data_dir), scheme, spec, *target, defs,
                                           schemes::build_fewshot_block(demos, spec.label_space));
    schemes::Transcript t;
    std::printf("# %s (gold: %s)\n", target->id.c_str(), target->dominant_label.c_str());
    for (int r = 1; r <= static_cast<int>(plan.rounds.size()); ++r) {
        const auto msg = schemes::render_round(plan, r, t);
        std::printf("\n## round %d\n%s\n", r, msg.c_str());
        t.add_user(msg);
        t.add_assistant("<reply " + std::to_string(r) + ">");
    }
    return 0;
}

void add_common(CLI::App* cmd, RunOptions& o) {
    cmd->add_option("--dataset", o.dataset, "Dataset identifier")->required();
    cmd->add_option("--scheme", o.scheme, "wod|wd|dg|gfa|gfa-w|pc1|pc2|cot")->required();
    cmd->add_option("--definitions", o.definitions, "none|informal|formal");
    cmd->add_option("--shots", o.shots, "Demonstrations per label (0 = zero-shot)");
    cmd->add_option("--seed", o.seed, "Base seed");
    cmd->add_option("--data", o.data, "Normalized dataset file or directory")->required();
    cmd->add_option("--data-dir", o.data_dir, "Registry, definitions and templates");
    cmd->add_option("--split", o.split, "Override the classified split");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-shot fallacy classification harness"};
    app.require_subcommand(1);
    RunOptions run_opts;

    auto* run = app.add_subcommand("run", "Run one experiment cell");
    add_common(run, run_opts);
    run->add_option("--model", run_opts.model, "Model name sent to the endpoint");
    run->add_option("--endpoint", run_opts.endpoint, "OpenAI-compatible base URL");
    run->add_option("--repeats", run_opts.repeats, "Number of repeats");
    run->add_option("--parse-mode", run_opts.parse_mode, "lenient|strict");
    run->add_option("--replay", run_opts.replay, "Replay responses from this cache file");
    run->add_option("--record", run_opts.record, "Append every response to this cache file");
    run->add_option("--out", run_opts.out, "Output directory")->required();
    run->add_option("--subsample", run_opts.subsample, "Classify a seeded subset of this size");
    run->add_option("--system", run_opts.system_message, "Optional system message");
    run->add_option("--max-in-flight", run_opts.max_in_flight, "Concurrent episodes");
    run->add_option("--max-retries", run_opts.max_retries, "Retries on 429/5xx");
    run->add_option("--auth-env", run_opts.auth_env, "Environment variable holding the API key");
    run->add_flag("--supports-top-k", run_opts.supports_top_k, "Send top_k to the endpoint");
    run->add_option("--scripted", run_opts.scripted,
                    "Scripted backend: perfect_oracle|fixed_label|out_of_space|unparseable|round_robin");
    run->add_option("--scripted-label", run_opts.scripted_label, "Label for fixed_label");
    run->add_option("--scripted-cycle", run_opts.scripted_cycle, "Labels for round_robin");
    run->add_option("--temperature", run_opts.temperature, "Override temperature");
    run->add_option("--top-p", run_opts.top_p, "Override top_p");
    run->add_option("--top-k", run_opts.top_k, "Override top_k");
    run->add_flag("--no-seed", run_opts.no_seed, "Do not send a provider seed");
    run->add_flag("--full-space", run_opts.full_space, "Average F1 over the full label space");
    run->add_flag("--failures-as-class", run_opts.failures_as_class, "Count failures as an extra class");

    std::string sweep_config, report_dir;
    auto* sweep = app.add_subcommand("sweep", "Run every cell of a YAML sweep and write reports");
    sweep->add_option("--config", sweep_config, "Sweep file")->required();
    sweep->add_option("--report-dir", report_dir, "Where to write the tables (default: sweep output_dir)");

    std::vector<std::string> validate_datasets;
    std::string validate_data, validate_data_dir;
    auto* validate = app.add_subcommand("validate", "Check split sizes, label spaces and class counts");
    validate->add_option("--dataset", validate_datasets, "Datasets (default: all)");
    validate->add_option("--data", validate_data, "Normalized dataset directory")->required();
    validate->add_option("--data-dir", validate_data_dir, "Registry, definitions and templates");

    RunOptions render_opts;
    std::string render_id;
    auto* render = app.add_subcommand("render", "Print the prompts of one example");
    add_common(render, render_opts);
    render->add_option("--id", render_id, "Example id (default: first of the split)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(run_opts);
        if (*sweep) return cmd_sweep(sweep_config, report_dir);
        if (*validate) return cmd_validate(validate_datasets, validate_data, validate_data_dir);
        if (*render) return cmd_render(render_opts, render_id);
    } catch (const RunAborted& e) {
        std::cerr << "aborted: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
