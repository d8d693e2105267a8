#include <yaml-cpp/yaml.h>

#include "fallacy/error.hpp"
#include "fallacy/runner.hpp"

namespace fallacy::runner {

namespace {

/// Scalar or sequence of scalars as a list.
std::vector<std::string> as_list(const YAML::Node& n) {
    std::vector<std::string> out;
    if (!n) return out;
    if (n.IsSequence())
        for (const auto& e : n) out.push_back(e.as<std::string>());
    else
        out.push_back(n.as<std::string>());
    return out;
}

/// Cell-level value if present, else the top-level one.
YAML::Node pick(const YAML::Node& cell, const YAML::Node& top, const char* key) {
    if (cell[key]) return cell[key];
    return top[key];
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

void apply_backend(const YAML::Node& n, const std::filesystem::path& base, backend::BackendConfig& b) {
    if (!n) return;
    if (!n.IsMap()) throw ConfigError("sweep: 'backend' must be a mapping");
    if (n["kind"]) b.kind = backend::parse_backend_kind(n["kind"].as<std::string>());
    if (n["model"]) b.model_name = n["model"].as<std::string>();
    if (n["endpoint"]) b.endpoint_url = n["endpoint"].as<std::string>();
    if (n["auth_env"]) b.auth_env_var = n["auth_env"].as<std::string>();
    if (n["max_in_flight"]) b.max_in_flight = n["max_in_flight"].as<int>();
    if (n["max_retries"]) b.retry_policy.max_retries = n["max_retries"].as<int>();
    if (n["supports_top_k"]) b.supports_top_k = n["supports_top_k"].as<bool>();
    if (n["replay"]) b.record_path = resolve(base, n["replay"].as<std::string>());
    if (n["record"]) b.record_output = resolve(base, n["record"].as<std::string>());
    if (n["behavior"]) b.scripted.behavior = backend::parse_scripted_behavior(n["behavior"].as<std::string>());
    if (n["label"]) b.scripted.fixed_label = n["label"].as<std::string>();
    if (n["cycle"]) b.scripted.cycle = as_list(n["cycle"]);
}

}  // namespace

SweepPlan load_sweep_config(const std::filesystem::path& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::BadFile&) {
        throw ConfigError("cannot read sweep config: " + path.string());
    } catch (const YAML::Exception& e) {
        throw ConfigError("malformed sweep config " + path.string() + ": " + e.what());
    }
    const auto base = path.parent_path();
    if (!root["cells"] || !root["cells"].IsSequence()) throw ConfigError("sweep config needs a 'cells' list");
    if (!root["output_dir"]) throw ConfigError("sweep config needs 'output_dir'");
    const auto out_root = resolve(base, root["output_dir"].as<std::string>());

    std::vector<RunConfig> configs;
    try {
        for (const auto& cell : root["cells"]) {
            const auto datasets = as_list(pick(cell, root, "datasets"));
            const auto scheme_names = as_list(pick(cell, root, "schemes"));
            if (datasets.empty() || scheme_names.empty())
                throw ConfigError("every sweep cell needs 'datasets' and 'schemes'");
            backend::BackendConfig b;
            apply_backend(root["backend"], base, b);
            apply_backend(cell["backend"], base, b);
            std::vector<std::string> models = as_list(pick(cell, root, "models"));
            if (models.empty()) models.push_back(b.model_name);

            for (const auto& model : models)
                for (const auto& ds : datasets)
                    for (const auto& sc : scheme_names) {
                        RunConfig c;
                        c.dataset = corpus::parse_dataset(ds);
                        c.scheme.value = schemes::parse_scheme(sc);
                        if (auto n = pick(cell, root, "shots")) c.scheme.fewshot_k = n.as<int>();
                        if (auto n = pick(cell, root, "definitions"))
                            c.definitions = parse_definitions_style(n.as<std::string>());
                        else if (c.scheme.value == schemes::Scheme::wd)
                            c.definitions = DefinitionsStyle::informal;
                        if (c.scheme.value != schemes::Scheme::wd) c.definitions = DefinitionsStyle::none;
                        c.backend = b;
                        c.backend.model_name = model;
                        c.params = backend::default_params(model);
                        if (auto n = pick(cell, root, "temperature")) c.params.temperature = n.as<double>();
                        if (auto n = pick(cell, root, "top_p")) c.params.top_p = n.as<double>();
                        if (auto n = pick(cell, root, "top_k")) c.params.top_k = n.as<int>();
                        if (auto n = pick(cell, root, "repeats")) c.repeats = n.as<int>();
                        if (auto n = pick(cell, root, "seed")) c.seed = n.as<std::int64_t>();
                        if (auto n = pick(cell, root, "subsample")) c.subsample = n.as<std::size_t>();
                        if (auto n = pick(cell, root, "parse_mode")) c.parse_mode = parsing::parse_mode(n.as<std::string>());
                        if (auto n = pick(cell, root, "system_message")) c.system_message = n.as<std::string>();
                        if (auto n = pick(cell, root, "data")) c.data_source = resolve(base, n.as<std::string>());
                        if (auto n = pick(cell, root, "data_dir")) c.data_dir = resolve(base, n.as<std::string>());
                        if (auto n = pick(cell, root, "averaging"))
                            c.metric_options.averaging = metrics::parse_averaging(n.as<std::string>());
                        if (auto n = pick(cell, root, "failure_mode"))
                            c.metric_options.failure_mode = metrics::parse_failure_mode(n.as<std::string>());
                        std::string safe_model = model;
                        for (char& ch : safe_model)
                            if (ch == '/' || ch == ':' || ch == ' ') ch = '_';
                        c.output_dir = out_root / safe_model / std::string(corpus::to_string(c.dataset)) /
                                       c.cell_scheme_key();
                        configs.push_back(std::move(c));
                    }
        }
    } catch (const YAML::Exception& e) {
        throw ConfigError("bad value in sweep config " + path.string() + ": " + e.what());
    }
    return {out_root, std::move(configs)};
}

}  // namespace fallacy::runner
