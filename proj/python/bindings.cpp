// Python bindings for the harness core.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fallacy/error.hpp"
#include "fallacy/report.hpp"
#include "fallacy/runner.hpp"

namespace py = pybind11;
using namespace fallacy;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& obj) {
    return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

std::filesystem::path data_dir_or_default(const std::optional<std::filesystem::path>& p) {
    return p ? *p : default_data_dir();
}

corpus::LabelSpace space_for(const std::string& dataset, const std::optional<std::filesystem::path>& data_dir) {
    return corpus::DatasetRegistry::load(data_dir_or_default(data_dir)).label_space(corpus::parse_dataset(dataset));
}

json outcome_json(const parsing::ParsedOutcome& o) {
    return {{"kind", std::string(parsing::to_string(o.kind))},
            {"label", o.label},
            {"extracted_field", o.extracted_field ? json(*o.extracted_field) : json(nullptr)},
            {"multi_label", o.multi_label},
            {"is_failure", o.is_failure()}};
}

json spec_json(const corpus::DatasetSpec& spec) {
    json sizes = json::object();
    for (const auto& [split, n] : spec.split_sizes) sizes[std::string(corpus::to_string(split))] = n;
    return {{"dataset", std::string(corpus::to_string(spec.dataset))},
            {"label_space", spec.label_space.to_json()},
            {"discourse_type", spec.discourse_type_phrase},
            {"segment", spec.segment_phrase},
            {"argument", spec.argument_phrase},
            {"classify_split", std::string(corpus::to_string(spec.classify_split))},
            {"split_sizes", sizes},
            {"preprocessing_notes", spec.preprocessing_notes}};
}

template <typename T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

/// Run configuration from a flat dict using the command-line option names.
runner::RunConfig config_from(const json& j) {
    static const std::set<std::string> known = {
        "dataset", "scheme", "shots", "definitions", "data", "out", "data_dir", "model", "endpoint", "replay",
        "record", "scripted", "scripted_label", "scripted_cycle", "repeats", "seed", "subsample", "split",
        "system_message", "parse_mode", "temperature", "top_p", "top_k", "send_seed", "averaging", "failure_mode",
        "max_in_flight", "max_retries", "auth_env", "supports_top_k", "abort_fraction"};
    for (const auto& [k, _] : j.items())
        if (!known.count(k)) throw ConfigError("unknown run option: " + k);
    for (const char* required : {"dataset", "scheme", "data", "out"})
        if (!j.contains(required)) throw ConfigError(std::string("missing run option: ") + required);

    runner::RunConfig c;
    c.dataset = corpus::parse_dataset(j.at("dataset").get<std::string>());
    c.scheme.value = schemes::parse_scheme(j.at("scheme").get<std::string>());
    take(j, "shots", c.scheme.fewshot_k);
    if (j.contains("definitions")) c.definitions = runner::parse_definitions_style(j["definitions"].get<std::string>());
    c.data_source = j.at("data").get<std::string>();
    c.output_dir = j.at("out").get<std::string>();
    if (j.contains("data_dir")) c.data_dir = j["data_dir"].get<std::string>();
    take(j, "repeats", c.repeats);
    take(j, "seed", c.seed);
    if (j.contains("subsample") && !j["subsample"].is_null()) c.subsample = j["subsample"].get<std::size_t>();
    if (j.contains("split")) c.split_override = corpus::parse_split(j["split"].get<std::string>());
    if (j.contains("system_message")) c.system_message = j["system_message"].get<std::string>();
    if (j.contains("parse_mode")) c.parse_mode = parsing::parse_mode(j["parse_mode"].get<std::string>());
    take(j, "send_seed", c.send_seed);
    take(j, "abort_fraction", c.abort_fraction);
    if (j.contains("averaging")) c.metric_options.averaging = metrics::parse_averaging(j["averaging"].get<std::string>());
    if (j.contains("failure_mode"))
        c.metric_options.failure_mode = metrics::parse_failure_mode(j["failure_mode"].get<std::string>());

    auto& b = c.backend;
    if (j.contains("scripted")) {
        b = backend::scripted_backend(backend::parse_scripted_behavior(j["scripted"].get<std::string>()),
                                      j.value("scripted_label", std::string{}),
                                      j.value("scripted_cycle", std::vector<std::string>{}));
    } else if (j.contains("replay")) {
        b.kind = backend::BackendKind::replay;
        b.record_path = j["replay"].get<std::string>();
    } else if (j.contains("endpoint")) {
        b.kind = backend::BackendKind::http;
        b.endpoint_url = j["endpoint"].get<std::string>();
    } else {
        throw ConfigError("choose a backend: endpoint, replay or scripted");
    }
    take(j, "model", b.model_name);
    if (j.contains("record")) b.record_output = j["record"].get<std::string>();
    take(j, "max_in_flight", b.max_in_flight);
    take(j, "max_retries", b.retry_policy.max_retries);
    take(j, "auth_env", b.auth_env_var);
    take(j, "supports_top_k", b.supports_top_k);

    c.params = backend::default_params(b.model_name);
    take(j, "temperature", c.params.temperature);
    take(j, "top_p", c.params.top_p);
    take(j, "top_k", c.params.top_k);
    return c;
}

json run_json(const runner::RunResult& r) {
    json repeats = json::array();
    for (const auto& rep : r.repeats) repeats.push_back(rep.to_json());
    return {{"aggregate", r.aggregate.to_json()},
            {"repeats", repeats},
            {"transport_failed", r.transport_failed},
            {"resumed", r.resumed},
            {"episodes", r.episodes.size()},
            {"manifest", r.manifest}};
}

std::vector<std::string> render_rounds(const std::string& dataset, const std::string& scheme,
                                       const std::filesystem::path& data, const std::string& example_id, int shots,
                                       const std::string& definitions, std::int64_t seed,
                                       const std::optional<std::filesystem::path>& data_dir_opt) {
    const auto data_dir = data_dir_or_default(data_dir_opt);
    const auto registry = corpus::DatasetRegistry::load(data_dir);
    const auto [spec, examples] = corpus::load_dataset(registry, corpus::parse_dataset(dataset), data);
    const corpus::FallacyExample* target = nullptr;
    std::vector<corpus::FallacyExample> pool;
    for (const auto& ex : examples) {
        if (ex.split != spec.classify_split) pool.push_back(ex);
        if (!target && ex.split == spec.classify_split && (example_id.empty() || ex.id == example_id)) target = &ex;
    }
    if (!target) throw ConfigError("no matching example: " + example_id);
    const auto style = runner::parse_definitions_style(definitions);
    std::optional<std::string> defs;
    if (style != runner::DefinitionsStyle::none)
        defs = knowledge::render_definition_block(knowledge::get_definitions(
            knowledge::DefinitionRegistry::load(data_dir), spec.label_space,
            style == runner::DefinitionsStyle::formal ? knowledge::DefinitionStyle::formal
                                                      : knowledge::DefinitionStyle::informal));
    const auto demos = runner::sample_fewshot(pool, spec.label_space, shots, seed + 1, target->id);
    const auto plan = schemes::plan_scheme(schemes::TemplateStore::load(data_dir),
                                           {schemes::parse_scheme(scheme), shots}, spec, *target, defs,
                                           schemes::build_fewshot_block(demos, spec.label_space));
    std::vector<std::string> out;
    schemes::Transcript t;
    for (int r = 1; r <= static_cast<int>(plan.rounds.size()); ++r) {
        out.push_back(schemes::render_round(plan, r, t));
        t.add_user(out.back());
        t.add_assistant("<reply " + std::to_string(r) + ">");
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Zero-shot fallacy classification harness";

    auto base = py::register_exception<Error>(m, "FallacyError", PyExc_RuntimeError);
    py::register_exception<IngestionError>(m, "IngestionError", base);
    py::register_exception<SchemaError>(m, "SchemaError", base);
    py::register_exception<ConfigError>(m, "ConfigError", base);
    py::register_exception<TemplateError>(m, "TemplateError", base);
    py::register_exception<TransportError>(m, "TransportError", base);
    py::register_exception<CacheMissError>(m, "CacheMissError", base);
    py::register_exception<RunAborted>(m, "RunAborted", base);
    py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);

    m.attr("__version__") = std::string(kToolVersion);

    m.def("default_data_dir", [] { return default_data_dir(); });
    m.def("datasets", [] {
        std::vector<std::string> out;
        for (auto d : corpus::kAllDatasets) out.emplace_back(corpus::to_string(d));
        return out;
    });
    m.def("schemes", [] {
        std::vector<std::string> out;
        for (auto s : schemes::kAllSchemes) out.emplace_back(schemes::to_string(s));
        return out;
    });
    m.def("round_count", [](const std::string& scheme) { return schemes::round_count(schemes::parse_scheme(scheme)); },
          py::arg("scheme"));

    m.def("label_space",
          [](const std::string& dataset, std::optional<std::filesystem::path> data_dir) {
              return to_py(space_for(dataset, data_dir).to_json());
          },
          py::arg("dataset"), py::arg("data_dir") = py::none());

    m.def("load_dataset",
          [](const std::string& dataset, const std::filesystem::path& source,
             std::optional<std::filesystem::path> data_dir) {
              const auto registry = corpus::DatasetRegistry::load(data_dir_or_default(data_dir));
              const auto [spec, examples] = corpus::load_dataset(registry, corpus::parse_dataset(dataset), source);
              json ex = json::array();
              for (const auto& e : examples) ex.push_back(e.to_json());
              return py::make_tuple(to_py(spec_json(spec)), to_py(ex));
          },
          py::arg("dataset"), py::arg("source"), py::arg("data_dir") = py::none(),
          "Normalized records with preprocessing applied: (spec, examples).");

    m.def("render_prompts", &render_rounds, py::arg("dataset"), py::arg("scheme"), py::arg("data"),
          py::arg("example_id") = "", py::arg("shots") = 0, py::arg("definitions") = "none", py::arg("seed") = 0,
          py::arg("data_dir") = py::none(),
          "User messages of every round, with placeholder replies between rounds.");

    m.def("parse_reply",
          [](const std::string& reply, const std::string& dataset, const std::string& mode,
             std::optional<std::filesystem::path> data_dir) {
              return to_py(outcome_json(parsing::parse_reply(reply, space_for(dataset, data_dir), parsing::parse_mode(mode))));
          },
          py::arg("reply"), py::arg("dataset"), py::arg("mode") = "lenient", py::arg("data_dir") = py::none());

    m.def("normalize_label",
          [](const std::string& raw, const std::string& dataset, std::optional<std::filesystem::path> data_dir) {
              return parsing::normalize_label(raw, space_for(dataset, data_dir));
          },
          py::arg("raw"), py::arg("dataset"), py::arg("data_dir") = py::none());

    m.def("evaluate",
          [](const std::vector<std::pair<std::string, std::optional<std::string>>>& pairs, const std::string& dataset,
             const std::string& averaging, const std::string& failure_mode,
             std::optional<std::filesystem::path> data_dir) {
              std::vector<metrics::EvalPair> eval;
              for (const auto& [gold, pred] : pairs) eval.push_back(metrics::EvalPair::make(gold, pred));
              const metrics::MetricOptions options{metrics::parse_averaging(averaging),
                                                   metrics::parse_failure_mode(failure_mode)};
              return to_py(metrics::evaluate(eval, space_for(dataset, data_dir), options).to_json());
          },
          py::arg("pairs"), py::arg("dataset"), py::arg("averaging") = "observed",
          py::arg("failure_mode") = "non_class", py::arg("data_dir") = py::none(),
          "Scores (gold, predicted) pairs; a predicted value of None is a failure.");

    m.def("rank_schemes",
          [](const py::list& cells) {
              metrics::ScoreGrid grid;
              for (const auto& c : cells) {
                  const json j = from_py(c);
                  grid[{j.at("model").get<std::string>(), j.at("dataset").get<std::string>()}]
                      [j.at("scheme").get<std::string>()] = {j.at("macro_f1").get<double>(),
                                                            j.value("failure_rate", 0.0)};
              }
              json out = json::object();
              for (const auto& [scheme, e] : metrics::rank_schemes(grid).entries)
                  out[scheme] = {{"mean_rank", e.mean_rank},
                                 {"mean_failure_rate", e.mean_failure_rate},
                                 {"n_cells", e.n_cells}};
              return to_py(out);
          },
          py::arg("cells"), "Mean rank per scheme from dicts with model, dataset, scheme, macro_f1, failure_rate.");

    m.def("request_digest",
          [](const py::list& messages, const py::dict& params, const std::string& model) {
              schemes::Transcript t;
              for (const auto& msg : from_py(messages)) {
                  const auto role = msg.at("role").get<std::string>();
                  auto content = msg.at("content").get<std::string>();
                  if (role == "system") t.add_system(std::move(content));
                  else if (role == "user") t.add_user(std::move(content));
                  else t.add_assistant(std::move(content));
              }
              json p = backend::default_params(model).to_json();
              const json overrides = from_py(params);
              for (const auto& [k, v] : overrides.items()) p[k] = v;
              return backend::request_digest(t, backend::GenerationParams::from_json(p), model);
          },
          py::arg("messages"), py::arg("params"), py::arg("model"));

    m.def("run_experiment",
          [](const py::dict& options) {
              const auto config = config_from(from_py(options));
              runner::RunResult result;
              {
                  py::gil_scoped_release release;
                  result = runner::run_experiment(config);
              }
              return to_py(run_json(result));
          },
          py::arg("options"), "Runs one cell. Options use the command-line names (dataset, scheme, data, out, ...).");

    m.def("run_sweep",
          [](const std::filesystem::path& config_path, std::optional<std::filesystem::path> report_dir) {
              const auto plan = runner::load_sweep_config(config_path);
              runner::SweepResult result;
              {
                  py::gil_scoped_release release;
                  result = runner::sweep(plan.configs);
                  const auto data_dir = plan.configs.empty() || plan.configs.front().data_dir.empty()
                                            ? default_data_dir()
                                            : plan.configs.front().data_dir;
                  report::write_sweep_reports(report_dir.value_or(plan.output_dir), result,
                                              corpus::DatasetRegistry::load(data_dir));
              }
              json cells = json::array();
              for (const auto& c : report::cells_from_sweep(result))
                  cells.push_back({{"model", c.model},
                                   {"dataset", c.dataset},
                                   {"scheme", c.scheme},
                                   {"macro_f1", c.macro_f1},
                                   {"accuracy", c.accuracy},
                                   {"failure_rate", c.failure_rate},
                                   {"n", c.n},
                                   {"report_digest", c.report_digest}});
              return to_py(cells);
          },
          py::arg("config"), py::arg("report_dir") = py::none());
}
