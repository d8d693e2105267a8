#include "fallacy/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "fallacy/error.hpp"

namespace fallacy::runner {

std::string_view to_string(DefinitionsStyle d) {
    switch (d) {
        case DefinitionsStyle::none: return "none";
        case DefinitionsStyle::informal: return "informal";
        case DefinitionsStyle::formal: return "formal";
    }
    return "none";
}

DefinitionsStyle parse_definitions_style(std::string_view s) {
    const std::string n = text::to_lower(text::trim(s));
    if (n == "none") return DefinitionsStyle::none;
    if (n == "informal") return DefinitionsStyle::informal;
    if (n == "formal") return DefinitionsStyle::formal;
    throw ConfigError("unknown definitions style: " + std::string(s));
}

// ---------------------------------------------------------------- config

void RunConfig::validate() const {
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (scheme.fewshot_k < 0) throw ConfigError("shots must be >= 0");
    if (output_dir.empty()) throw ConfigError("output directory is required");
    if (data_source.empty()) throw ConfigError("dataset source is required");
    if (max_tokens_intermediate <= 0 || max_tokens_terminal <= 0) throw ConfigError("token limits must be > 0");
    if (!(abort_fraction >= 0.0 && abort_fraction <= 1.0)) throw ConfigError("abort fraction must be in [0, 1]");
    if (subsample && *subsample == 0) throw ConfigError("subsample must be > 0");
    const bool wd = scheme.value == schemes::Scheme::wd;
    if (wd && definitions == DefinitionsStyle::none)
        throw ConfigError("the WD scheme requires --definitions informal or formal");
    if (!wd && definitions != DefinitionsStyle::none)
        throw ConfigError("definitions are only used by the WD scheme");
    if (definitions == DefinitionsStyle::formal && dataset != corpus::DatasetId::mafalda)
        throw ConfigError("formal definitions are only available for mafalda");
    backend.validate();
    backend::GenerationParams p = params;
    p.max_new_tokens = max_tokens_terminal;
    p.validate();
}

std::string RunConfig::cell_scheme_key() const {
    std::string key = scheme.token();
    if (definitions == DefinitionsStyle::formal) key += "+formal";
    if (parse_mode == parsing::ParseMode::strict) key += "+strict";
    return key;
}

json RunConfig::to_json() const {
    json j{{"dataset", std::string(corpus::to_string(dataset))},
           {"scheme", std::string(schemes::to_string(scheme.value))},
           {"shots", scheme.fewshot_k},
           {"definitions", std::string(to_string(definitions))},
           {"backend", backend.to_json()},
           {"params", params.to_json()},
           {"max_tokens_intermediate", max_tokens_intermediate},
           {"max_tokens_terminal", max_tokens_terminal},
           {"send_seed", send_seed},
           {"repeats", repeats},
           {"seed", seed},
           {"subsample", subsample ? json(*subsample) : json(nullptr)},
           {"parse_mode", std::string(parsing::to_string(parse_mode))},
           {"data_source", data_source.string()},
           {"split_override", split_override ? json(std::string(corpus::to_string(*split_override))) : json(nullptr)},
           {"system_message", system_message ? json(*system_message) : json(nullptr)},
           {"averaging", std::string(metrics::to_string(metric_options.averaging))},
           {"failure_mode", std::string(metrics::to_string(metric_options.failure_mode))},
           {"abort_fraction", abort_fraction}};
    return j;
}

// ---------------------------------------------------------------- episodes

json EpisodeRecord::to_json() const {
    json outcome{{"kind", std::string(parsing::to_string(this->outcome.kind))},
                 {"label", this->outcome.label},
                 {"extracted_field",
                  this->outcome.extracted_field ? json(*this->outcome.extracted_field) : json(nullptr)},
                 {"multi_label", this->outcome.multi_label}};
    return json{{"id", example_id},
                {"scheme", scheme},
                {"repeat", repeat},
                {"gold", gold},
                {"transcript", transcript.to_json()},
                {"outcome", outcome},
                {"request_digests", request_digests},
                {"response_ids", response_ids},
                {"fewshot_ids", fewshot_ids},
                {"resume_key", resume_key},
                {"transport_failed", transport_failed},
                {"error", error}};
}

EpisodeRecord EpisodeRecord::from_json(const json& j) {
    EpisodeRecord e;
    e.example_id = j.at("id").get<std::string>();
    e.scheme = j.at("scheme").get<std::string>();
    e.repeat = j.at("repeat").get<int>();
    e.gold = j.at("gold").get<std::string>();
    for (const auto& t : j.at("transcript")) {
        const std::string role = t.at("role").get<std::string>();
        std::string content = t.at("content").get<std::string>();
        if (role == "system") e.transcript.add_system(std::move(content));
        else if (role == "user") e.transcript.add_user(std::move(content));
        else if (role == "assistant") e.transcript.add_assistant(std::move(content));
        else throw SchemaError("unknown role in episode record: " + role);
    }
    const json& o = j.at("outcome");
    e.outcome.kind = parsing::parse_outcome_kind(o.at("kind").get<std::string>());
    e.outcome.label = o.value("label", std::string{});
    if (o.contains("extracted_field") && o["extracted_field"].is_string())
        e.outcome.extracted_field = o["extracted_field"].get<std::string>();
    e.outcome.multi_label = o.value("multi_label", false);
    const auto& turns = e.transcript.turns();
    if (!turns.empty() && turns.back().role == schemes::Role::assistant) e.outcome.raw_reply = turns.back().content;
    e.request_digests = j.value("request_digests", std::vector<std::string>{});
    e.response_ids = j.value("response_ids", std::vector<std::string>{});
    e.fewshot_ids = j.value("fewshot_ids", std::vector<std::string>{});
    e.resume_key = j.value("resume_key", std::string{});
    e.transport_failed = j.value("transport_failed", false);
    e.error = j.value("error", std::string{});
    return e;
}

// ---------------------------------------------------------------- sampling

namespace {

/// Uniform integer in [0, n) by rejection, so the result does not depend on the
/// standard library's distribution implementation.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    while (true) {
        const std::uint64_t r = rng();
        if (r >= threshold) return r % n;
    }
}

/// First `k` positions of a Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> partial_shuffle(std::mt19937_64& rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(bounded(rng, n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace

std::vector<schemes::Demonstration> sample_fewshot(std::span<const corpus::FallacyExample> pool,
                                                   const corpus::LabelSpace& space, int k, std::int64_t seed,
                                                   const std::string& exclude_id) {
    if (k < 0) throw ConfigError("shots must be >= 0");
    if (k == 0) return {};
    std::vector<const corpus::FallacyExample*> sorted;
    for (const auto& ex : pool)
        if (ex.id != exclude_id) sorted.push_back(&ex);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });

    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::vector<schemes::Demonstration> out;
    for (const auto& label : space.labels()) {
        std::vector<const corpus::FallacyExample*> members;
        for (auto* ex : sorted)
            if (ex->dominant_label == label) members.push_back(ex);
        if (members.size() < static_cast<std::size_t>(k))
            throw ConfigError("few-shot pool has " + std::to_string(members.size()) + " examples of '" + label +
                              "', need " + std::to_string(k));
        for (std::size_t i : partial_shuffle(rng, members.size(), static_cast<std::size_t>(k)))
            out.emplace_back(*members[i], label);
    }
    return out;
}

std::vector<corpus::FallacyExample> subsample_examples(std::span<const corpus::FallacyExample> examples, std::size_t n,
                                                       std::int64_t seed) {
    std::vector<corpus::FallacyExample> sorted(examples.begin(), examples.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    if (n >= sorted.size()) return sorted;
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    auto picks = partial_shuffle(rng, sorted.size(), n);
    std::sort(picks.begin(), picks.end());
    std::vector<corpus::FallacyExample> out;
    out.reserve(n);
    for (auto i : picks) out.push_back(sorted[i]);
    return out;
}

// ---------------------------------------------------------------- experiment

namespace {

struct Prepared {
    corpus::DatasetSpec spec;
    std::vector<corpus::FallacyExample> targets;
    std::vector<corpus::FallacyExample> pool;
    schemes::TemplateStore templates;
    std::optional<std::string> definitions;
    corpus::Split split;
};

Prepared prepare(const RunConfig& config) {
    const auto data_dir = config.data_dir.empty() ? default_data_dir() : config.data_dir;
    const auto registry = corpus::DatasetRegistry::load(data_dir);
    auto [spec, examples] = corpus::load_dataset(registry, config.dataset, config.data_source);
    const corpus::Split split = config.split_override.value_or(spec.classify_split);

    Prepared p{spec, {}, {}, schemes::TemplateStore::load(data_dir), std::nullopt, split};
    for (auto& ex : examples) (ex.split == split ? p.targets : p.pool).push_back(std::move(ex));
    if (p.targets.empty())
        throw ConfigError("no examples in split '" + std::string(corpus::to_string(split)) + "' of " +
                          std::string(corpus::to_string(config.dataset)));
    if (config.subsample) p.targets = subsample_examples(p.targets, *config.subsample, config.seed);

    if (config.definitions != DefinitionsStyle::none) {
        const auto defs = knowledge::DefinitionRegistry::load(data_dir);
        const auto style = config.definitions == DefinitionsStyle::formal ? knowledge::DefinitionStyle::formal
                                                                          : knowledge::DefinitionStyle::informal;
        p.definitions = knowledge::render_definition_block(knowledge::get_definitions(defs, p.spec.label_space, style));
    }
    return p;
}

std::map<std::string, EpisodeRecord> read_previous_episodes(const std::filesystem::path& file) {
    std::map<std::string, EpisodeRecord> out;
    std::ifstream in(file);
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
        // A line cut short by an interrupt is simply dropped.
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        try {
            EpisodeRecord e = EpisodeRecord::from_json(j);
            if (!e.transport_failed && !e.resume_key.empty()) out.insert_or_assign(e.resume_key, std::move(e));
        } catch (const std::exception&) {
        }
    }
    return out;
}

void sort_episodes(std::vector<EpisodeRecord>& episodes) {
    std::sort(episodes.begin(), episodes.end(), [](const auto& a, const auto& b) {
        return a.repeat != b.repeat ? a.repeat < b.repeat : a.example_id < b.example_id;
    });
}

std::string jsonl_text(const std::vector<json>& records) {
    std::string out;
    for (const auto& r : records) out += r.dump() + "\n";
    return out;
}

struct Artifacts {
    std::string episodes;
    std::string timings;
};

Artifacts render_episode_files(std::vector<EpisodeRecord>& episodes) {
    sort_episodes(episodes);
    std::vector<json> ep, tm;
    for (const auto& e : episodes) {
        ep.push_back(e.to_json());
        tm.push_back({{"id", e.example_id}, {"repeat", e.repeat}, {"wall_time", e.wall_time}});
    }
    return {jsonl_text(ep), jsonl_text(tm)};
}

}  // namespace

std::unique_ptr<backend::ChatBackend> make_run_backend(const RunConfig& config) {
    backend::BackendConfig bc = config.backend;
    if (bc.kind == backend::BackendKind::scripted && bc.scripted.answer_key.empty()) {
        const Prepared p = prepare(config);
        for (const auto& ex : p.targets) bc.scripted.answer_key.emplace_back(ex.discourse(), ex.dominant_label);
    }
    return backend::make_backend(bc);
}

RunResult run_experiment(const RunConfig& config) {
    config.validate();
    auto b = make_run_backend(config);
    return run_experiment(config, *b);
}

RunResult run_experiment(const RunConfig& config, backend::ChatBackend& chat) {
    config.validate();
    const std::string started_at = utc_timestamp();
    const Prepared prep = prepare(config);
    const auto& space = prep.spec.label_space;
    const std::string scheme_key = config.cell_scheme_key();
    const int rounds = schemes::round_count(config.scheme.value);

    std::filesystem::create_directories(config.output_dir);
    const auto episodes_path = config.output_dir / "episodes.jsonl";
    const auto previous = read_previous_episodes(episodes_path);
    std::ofstream progress(episodes_path, std::ios::app | std::ios::binary);
    if (!progress) throw Error("cannot write " + episodes_path.string());
    std::mutex progress_mu;

    RunResult result;
    std::map<int, std::vector<std::string>> fewshot_ids;
    std::vector<std::pair<int, std::size_t>> transport_counts;

    auto params_for = [&](int round, int repeat) {
        backend::GenerationParams p = config.params;
        p.max_new_tokens = round == rounds ? config.max_tokens_terminal : config.max_tokens_intermediate;
        if (config.send_seed) p.seed = config.seed + repeat;
        return p;
    };

    json manifest{{"tool_version", std::string(kToolVersion)},
                  {"started_at", started_at},
                  {"config", config.to_json()},
                  {"template_checksums", prep.templates.checksums()},
                  {"label_space_checksum", sha256_hex(space.to_json().dump())},
                  {"label_space", space.to_json()},
                  {"split", std::string(corpus::to_string(prep.split))},
                  {"n_examples", prep.targets.size()},
                  {"preprocessing_notes", prep.spec.preprocessing_notes}};
    if (prep.definitions) manifest["definitions_checksum"] = sha256_hex(*prep.definitions);

    auto finish_files = [&](const std::string& status, const json& report) {
        Artifacts files = render_episode_files(result.episodes);
        progress.close();
        write_text(episodes_path, files.episodes);
        write_text(config.output_dir / "timings.jsonl", files.timings);
        manifest["status"] = status;
        manifest["finished_at"] = utc_timestamp();
        manifest["resumed_episodes"] = result.resumed;
        manifest["transport_failed"] = result.transport_failed;
        manifest["fewshot_ids"] = json::object();
        for (const auto& [r, ids] : fewshot_ids) manifest["fewshot_ids"][std::to_string(r)] = ids;
        std::size_t response_ids = 0;
        for (const auto& e : result.episodes)
            for (const auto& id : e.response_ids) response_ids += !id.empty();
        manifest["response_ids_recorded"] = response_ids;
        manifest["artifacts"] = {{"episodes.jsonl", sha256_hex(files.episodes)}};
        if (!report.is_null()) {
            const std::string report_text = report.dump(2) + "\n";
            write_text(config.output_dir / "report.json", report_text);
            manifest["artifacts"]["report.json"] = sha256_hex(report_text);
        }
        write_text(config.output_dir / "manifest.json", manifest.dump(2) + "\n");
    };

    for (int repeat = 1; repeat <= config.repeats; ++repeat) {
        const std::int64_t repeat_seed = config.seed + repeat;
        std::vector<EpisodeRecord> episodes(prep.targets.size());
        std::atomic<std::size_t> next{0};
        std::atomic<bool> stop{false};
        std::exception_ptr fatal;
        std::mutex fatal_mu;
        std::atomic<std::size_t> resumed{0};

        auto run_one = [&](std::size_t i) {
            const auto& ex = prep.targets[i];
            const auto t0 = std::chrono::steady_clock::now();
            EpisodeRecord rec;
            rec.example_id = ex.id;
            rec.scheme = scheme_key;
            rec.repeat = repeat;
            rec.gold = ex.dominant_label;

            const auto demos = sample_fewshot(prep.pool, space, config.scheme.fewshot_k, repeat_seed, ex.id);
            for (const auto& [d, _] : demos) rec.fewshot_ids.push_back(d.id);
            const auto plan = schemes::plan_scheme(prep.templates, config.scheme, prep.spec, ex, prep.definitions,
                                                   schemes::build_fewshot_block(demos, space));
            schemes::Transcript transcript;
            if (config.system_message) transcript.add_system(*config.system_message);
            transcript.add_user(schemes::render_round(plan, 1, transcript));

            const std::string first_digest = backend::request_digest(transcript, params_for(1, repeat), chat.model_name());
            rec.resume_key = sha256_hex(first_digest + "\n" + ex.id + "\n" + std::to_string(repeat));
            if (auto it = previous.find(rec.resume_key); it != previous.end()) {
                episodes[i] = it->second;
                ++resumed;
                return;
            }

            try {
                for (int r = 1; r <= rounds; ++r) {
                    if (r > 1) transcript.add_user(schemes::render_round(plan, r, transcript));
                    const auto params = params_for(r, repeat);
                    rec.request_digests.push_back(backend::request_digest(transcript, params, chat.model_name()));
                    backend::Completion c = backend::complete_chat(chat, transcript, params);
                    rec.response_ids.push_back(c.response_id);
                    transcript.add_assistant(std::move(c.content));
                }
                rec.outcome = parsing::parse_reply(transcript.turns().back().content, space, config.parse_mode);
            } catch (const TransportError& e) {
                rec.transport_failed = true;
                rec.error = e.what();
                log_note("transport failure on " + ex.id + ": " + e.what());
            }
            rec.transcript = std::move(transcript);
            rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            {
                std::lock_guard lock(progress_mu);
                progress << rec.to_json().dump() << '\n';
                progress.flush();
            }
            episodes[i] = std::move(rec);
        };

        auto worker = [&] {
            while (!stop) {
                const std::size_t i = next++;
                if (i >= episodes.size()) return;
                try {
                    run_one(i);
                } catch (...) {
                    std::lock_guard lock(fatal_mu);
                    if (!fatal) fatal = std::current_exception();
                    stop = true;
                }
            }
        };
        const std::size_t n_threads =
            std::min<std::size_t>(static_cast<std::size_t>(config.backend.max_in_flight), episodes.size());
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        if (fatal) {
            progress.close();
            std::rethrow_exception(fatal);
        }

        result.resumed += resumed;
        std::set<std::string> ids;
        std::size_t failed = 0;
        std::vector<metrics::EvalPair> pairs;
        for (auto& e : episodes) {
            for (const auto& id : e.fewshot_ids) ids.insert(id);
            if (e.transport_failed) {
                ++failed;
            } else {
                pairs.push_back({e.gold, e.outcome});
            }
            result.episodes.push_back(std::move(e));
        }
        fewshot_ids[repeat].assign(ids.begin(), ids.end());
        result.transport_failed.push_back(failed);

        if (static_cast<double>(failed) > config.abort_fraction * static_cast<double>(episodes.size()) || pairs.empty()) {
            finish_files("aborted", nullptr);
            throw RunAborted("repeat " + std::to_string(repeat) + ": " + std::to_string(failed) + " of " +
                             std::to_string(episodes.size()) + " episodes failed in transport");
        }

        metrics::MetricsReport report = metrics::evaluate(pairs, space, config.metric_options, config.parse_mode);
        report.scheme = scheme_key;
        report.model = chat.model_name();
        result.repeats.push_back(std::move(report));
    }

    result.aggregate = metrics::aggregate_repeats(result.repeats);
    json report{{"dataset", std::string(corpus::to_string(config.dataset))},
                {"scheme", scheme_key},
                {"model", chat.model_name()},
                {"rounds", rounds},
                {"parse_mode", std::string(parsing::to_string(config.parse_mode))},
                {"averaging", std::string(metrics::to_string(config.metric_options.averaging))},
                {"failure_mode", std::string(metrics::to_string(config.metric_options.failure_mode))},
                {"n_examples", prep.targets.size()},
                {"transport_failed", result.transport_failed},
                {"repeats", json::array()},
                {"aggregate", result.aggregate.to_json()}};
    json digests = json::object();
    for (std::size_t r = 0; r < result.repeats.size(); ++r) {
        const json rj = result.repeats[r].to_json();
        report["repeats"].push_back(rj);
        digests["repeat_" + std::to_string(r + 1)] = sha256_hex(rj.dump());
    }
    digests["aggregate"] = sha256_hex(report["aggregate"].dump());
    manifest["report_digests"] = digests;
    finish_files("complete", report);
    result.manifest = manifest;
    return result;
}

// ---------------------------------------------------------------- sweep

SweepResult sweep(std::span<const RunConfig> configs) {
    std::set<std::tuple<std::string, std::string, std::string>> cells;
    std::set<std::filesystem::path> dirs;
    for (const auto& c : configs) {
        auto key = std::make_tuple(c.backend.model_name, std::string(corpus::to_string(c.dataset)), c.cell_scheme_key());
        if (!cells.insert(key).second)
            throw ConfigError("duplicate sweep cell: " + std::get<0>(key) + " / " + std::get<1>(key) + " / " +
                              std::get<2>(key));
        if (!dirs.insert(c.output_dir.lexically_normal()).second)
            throw ConfigError("two sweep cells share the output directory " + c.output_dir.string());
    }
    SweepResult out;
    for (const auto& c : configs) {
        RunResult r = run_experiment(c);
        CellResult cell;
        cell.model = c.backend.model_name;
        cell.dataset = std::string(corpus::to_string(c.dataset));
        cell.scheme = c.cell_scheme_key();
        cell.rounds = schemes::round_count(c.scheme.value);
        cell.aggregate = r.aggregate;
        cell.report_digest = r.manifest["report_digests"]["aggregate"].get<std::string>();
        cell.output_dir = c.output_dir;
        out.grid[{cell.model, cell.dataset}][cell.scheme] = {r.aggregate.macro_f1, r.aggregate.failure_rate};
        out.cells.push_back(std::move(cell));
    }
    return out;
}

}  // namespace fallacy::runner
