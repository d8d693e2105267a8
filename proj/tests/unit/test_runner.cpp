#include <doctest.h>

#include <algorithm>
#include <mutex>
#include <random>
#include <set>

#include "fallacy/error.hpp"
#include "fallacy/runner.hpp"
#include "fixtures.hpp"

using namespace fallacy;
using namespace fallacy::runner;
using corpus::DatasetId;
using corpus::Split;
namespace fs = std::filesystem;

namespace {

RunConfig scripted_run(DatasetId d, const fs::path& data, const fs::path& out,
                       backend::ScriptedBehavior behavior = backend::ScriptedBehavior::perfect_oracle) {
    RunConfig c;
    c.dataset = d;
    c.scheme = {schemes::Scheme::wod, 0};
    c.backend = backend::scripted_backend(behavior);
    c.params = backend::default_params(c.backend.model_name);
    c.output_dir = out;
    c.data_source = data;
    c.data_dir = fixtures::shipped_data_dir();
    return c;
}

/// 40 logic test items in ten-label rotation plus a dev pool.
fs::path forty_items(const fs::path& root) {
    const std::vector<std::string> cycle = {"Ad Hominem", "Red Herring", "Straw Man", "False Dilemma", "Equivocation"};
    std::vector<std::string> labels;
    for (int i = 0; i < 40; ++i) labels.push_back(cycle[i % cycle.size()]);
    const auto dir = root / "forty";
    fs::create_directories(dir);
    write_jsonl(dir / "logic.jsonl", fixtures::records_from_labels(DatasetId::logic, Split::test, labels));
    return dir;
}

struct Call {
    backend::GenerationParams params;
    std::size_t turns = 0;
    bool has_system = false;
};

/// Forwards to a scripted backend, records every request and fails on marked items.
class Probe final : public backend::ChatBackend {
public:
    explicit Probe(std::unique_ptr<backend::ChatBackend> inner, std::set<std::string> fail_markers = {})
        : inner_(std::move(inner)), fail_markers_(std::move(fail_markers)) {}

    backend::Completion complete(const schemes::Transcript& t, const backend::GenerationParams& p) override {
        {
            std::lock_guard lock(mu_);
            calls_.push_back({p, t.turns().size(), t.turns().front().role == schemes::Role::system});
        }
        for (const auto& m : fail_markers_)
            if (t.turns().back().content.find(m) != std::string::npos) throw TransportError(503, 6, "probe outage");
        return inner_->complete(t, p);
    }
    const std::string& model_name() const override { return inner_->model_name(); }

    std::vector<Call> calls() {
        std::lock_guard lock(mu_);
        return calls_;
    }

private:
    std::unique_ptr<backend::ChatBackend> inner_;
    std::set<std::string> fail_markers_;
    std::mutex mu_;
    std::vector<Call> calls_;
};

std::vector<corpus::FallacyExample> pool_of(const std::vector<std::pair<std::string, int>>& per_label) {
    std::vector<corpus::FallacyExample> pool;
    int n = 0;
    for (const auto& [label, count] : per_label)
        for (int i = 0; i < count; ++i) {
            corpus::FallacyExample ex;
            ex.id = "pool:" + std::to_string(100 + n++);
            ex.dataset = DatasetId::argotario;
            ex.target_segment = "text " + ex.id;
            ex.dominant_label = label;
            ex.gold_labels = {label};
            ex.split = Split::train;
            pool.push_back(ex);
        }
    return pool;
}

}  // namespace

TEST_CASE("few-shot sampling") {
    corpus::LabelSpace space(DatasetId::argotario, {"A", "B"}, {}, true);
    auto pool = pool_of({{"A", 5}, {"B", 3}, {std::string(corpus::kNoFallacy), 4}});
    std::shuffle(pool.begin(), pool.end(), std::mt19937_64(3));

    const auto first = sample_fewshot(pool, space, 2, 42, "");
    REQUIRE(first.size() == 4);
    CHECK(first[0].second == "A");
    CHECK(first[1].second == "A");
    CHECK(first[2].second == "B");
    CHECK(first[3].second == "B");
    CHECK(first[0].first.id != first[1].first.id);

    auto reversed = pool;
    std::reverse(reversed.begin(), reversed.end());
    const auto again = sample_fewshot(reversed, space, 2, 42, "");
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(again[i].first.id == first[i].first.id);

    std::set<std::string> seen;
    for (std::int64_t seed = 0; seed < 40; ++seed)
        for (const auto& d : sample_fewshot(pool, space, 1, seed, "pool:100")) {
            CHECK(d.first.id != "pool:100");
            seen.insert(d.first.id);
        }
    CHECK(seen.size() == 7);  // every A but the excluded one, every B

    CHECK(sample_fewshot(pool, space, 0, 1, "").empty());
    CHECK_THROWS_AS(sample_fewshot(pool, space, 4, 1, ""), ConfigError);
    CHECK_THROWS_AS(sample_fewshot(pool, space, 3, 1, "pool:105"), ConfigError);
    CHECK_THROWS_AS(sample_fewshot(pool, space, -1, 1, ""), ConfigError);
}

TEST_CASE("property: subsample is a seeded, ordered subset") {
    std::mt19937_64 rng(8);
    for (int iter = 0; iter < 100; ++iter) {
        const std::size_t n = 1 + rng() % 30;
        auto examples = pool_of({{"A", static_cast<int>(n)}});
        std::shuffle(examples.begin(), examples.end(), rng);
        const std::size_t k = 1 + rng() % (n + 3);
        const std::int64_t seed = static_cast<std::int64_t>(rng() % 1000);
        const auto picked = subsample_examples(examples, k, seed);
        CHECK(picked.size() == std::min(k, n));
        for (std::size_t i = 1; i < picked.size(); ++i) CHECK(picked[i - 1].id < picked[i].id);
        const auto again = subsample_examples(examples, k, seed);
        for (std::size_t i = 0; i < picked.size(); ++i) CHECK(again[i].id == picked[i].id);
    }
}

TEST_CASE("run config validation") {
    auto c = scripted_run(DatasetId::logic, "data", "out");
    CHECK_NOTHROW(c.validate());
    auto bad = c;
    bad.scheme.value = schemes::Scheme::wd;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.definitions = DefinitionsStyle::formal;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.dataset = DatasetId::mafalda;
    CHECK_NOTHROW(bad.validate());
    bad.parse_mode = parsing::ParseMode::strict;
    CHECK(bad.cell_scheme_key() == "wd+formal+strict");
    bad = c;
    bad.definitions = DefinitionsStyle::informal;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.repeats = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.output_dir.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.abort_fraction = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.subsample = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.params.top_p = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(parse_definitions_style("verbose"), ConfigError);
}

TEST_CASE("scripted multi-round run with demonstrations") {
    const auto root = fixtures::fresh_dir("runner-fewshot");
    fixtures::FixtureOptions opts;
    opts.per_split = 26;
    fixtures::write_dataset(root / "data", fixtures::shipped_registry(), DatasetId::logic, opts);
    auto c = scripted_run(DatasetId::logic, root / "data", root / "out");
    c.scheme = {schemes::Scheme::gfa_w, 1};
    c.system_message = "You are a careful annotator.";
    const auto r = run_experiment(c);

    CHECK(r.aggregate.macro_f1 == 100.0);
    CHECK(r.aggregate.failure_rate == 0.0);
    REQUIRE_FALSE(r.episodes.empty());
    for (const auto& e : r.episodes) {
        CHECK(e.transcript.turns().size() == 7);
        CHECK(e.transcript.turns().front().content == "You are a careful annotator.");
        CHECK(e.transcript.assistant_count() == 3);
        CHECK(e.request_digests.size() == 3);
        CHECK(e.fewshot_ids.size() == 13);
        CHECK(std::find(e.fewshot_ids.begin(), e.fewshot_ids.end(), e.example_id) == e.fewshot_ids.end());
        CHECK(e.scheme == "gfa_w+1shot");
    }

    const auto manifest = json::parse(read_text(root / "out" / "manifest.json"));
    CHECK(manifest.at("status") == "complete");
    CHECK(manifest.at("n_examples") == r.episodes.size());
    CHECK(manifest.at("fewshot_ids").at("1").size() >= 13);
    CHECK(manifest.at("template_checksums").contains("gfa_w/r3.txt"));
    CHECK(manifest.at("label_space_checksum").get<std::string>().size() == 64);
    CHECK(manifest.at("artifacts").at("episodes.jsonl") == sha256_hex(read_text(root / "out" / "episodes.jsonl")));
    CHECK(manifest.at("artifacts").at("report.json") == sha256_hex(read_text(root / "out" / "report.json")));
    CHECK(manifest.at("config").at("system_message") == "You are a careful annotator.");
    CHECK(fs::exists(root / "out" / "timings.jsonl"));
    CHECK(read_text(root / "out" / "episodes.jsonl").find("wall_time") == std::string::npos);

    const auto back = EpisodeRecord::from_json(r.episodes.front().to_json());
    CHECK(back.to_json() == r.episodes.front().to_json());
    fs::remove_all(root);
}

TEST_CASE("round limits and per-repeat seeds") {
    const auto root = fixtures::fresh_dir("runner-params");
    auto c = scripted_run(DatasetId::logic, forty_items(root), root / "out");
    c.scheme = {schemes::Scheme::pc1, 0};
    c.repeats = 2;
    c.seed = 100;
    c.subsample = 5;
    Probe probe(make_run_backend(c));
    const auto r = run_experiment(c, probe);
    CHECK(r.repeats.size() == 2);
    const auto calls = probe.calls();
    REQUIRE(calls.size() == 2 * 5 * 3);
    std::set<std::int64_t> seeds;
    for (const auto& call : calls) {
        const bool terminal = call.turns == 5;
        CHECK(call.params.max_new_tokens == (terminal ? 256 : 1024));
        REQUIRE(call.params.seed);
        seeds.insert(*call.params.seed);
        CHECK_FALSE(call.has_system);
    }
    CHECK(seeds == std::set<std::int64_t>{101, 102});

    auto unseeded = c;
    unseeded.send_seed = false;
    unseeded.repeats = 1;
    unseeded.output_dir = root / "unseeded";
    Probe quiet(make_run_backend(unseeded));
    run_experiment(unseeded, quiet);
    for (const auto& call : quiet.calls()) CHECK_FALSE(call.params.seed);
    fs::remove_all(root);
}

TEST_CASE("transport failures below the threshold, then resume") {
    const auto root = fixtures::fresh_dir("runner-transport");
    const auto c = scripted_run(DatasetId::logic, forty_items(root), root / "out");
    Probe flaky(make_run_backend(c), {"constructed item 1003 "});
    const auto r = run_experiment(c, flaky);
    CHECK(r.transport_failed == std::vector<std::size_t>{1});
    CHECK(r.aggregate.n == 39);
    CHECK(r.aggregate.macro_f1 == 100.0);
    const auto manifest = json::parse(read_text(root / "out" / "manifest.json"));
    CHECK(manifest.at("status") == "complete");
    CHECK(manifest.at("transport_failed") == json::array({1}));

    Probe healthy(make_run_backend(c));
    const auto resumed = run_experiment(c, healthy);
    CHECK(resumed.resumed == 39);
    CHECK(healthy.calls().size() == 1);
    CHECK(resumed.transport_failed == std::vector<std::size_t>{0});
    CHECK(resumed.aggregate.n == 40);
    fs::remove_all(root);
}

TEST_CASE("transport failures above the threshold abort") {
    const auto root = fixtures::fresh_dir("runner-abort");
    const auto c = scripted_run(DatasetId::logic, forty_items(root), root / "out");
    Probe flaky(make_run_backend(c), {"item 1003 ", "item 1017 ", "item 1029 "});
    CHECK_THROWS_AS(run_experiment(c, flaky), RunAborted);
    const auto manifest = json::parse(read_text(root / "out" / "manifest.json"));
    CHECK(manifest.at("status") == "aborted");
    CHECK_FALSE(fs::exists(root / "out" / "report.json"));
    const auto episodes = read_text(root / "out" / "episodes.jsonl");
    CHECK(std::count(episodes.begin(), episodes.end(), '\n') == 40);

    auto lenient = c;
    lenient.output_dir = root / "lenient";
    lenient.abort_fraction = 0.1;
    Probe again(make_run_backend(lenient), {"item 1003 ", "item 1017 ", "item 1029 "});
    CHECK(run_experiment(lenient, again).transport_failed == std::vector<std::size_t>{3});
    fs::remove_all(root);
}

TEST_CASE("repeats aggregate into one cell") {
    const auto root = fixtures::fresh_dir("runner-repeats");
    auto c = scripted_run(DatasetId::logic, forty_items(root), root / "out", backend::ScriptedBehavior::round_robin);
    c.backend.scripted.cycle = {"Ad Hominem", "Red Herring", "Straw Man"};
    c.repeats = 3;
    const auto r = run_experiment(c);
    REQUIRE(r.repeats.size() == 3);
    double sum = 0;
    for (const auto& rep : r.repeats) sum += rep.macro_f1;
    CHECK(r.aggregate.macro_f1 == doctest::Approx(sum / 3));
    CHECK(r.episodes.size() == 120);
    const auto report = json::parse(read_text(root / "out" / "report.json"));
    CHECK(report.at("repeats").size() == 3);
    CHECK(report.at("rounds") == 1);
    fs::remove_all(root);
}

TEST_CASE("sweep rejects duplicate cells") {
    const auto root = fixtures::fresh_dir("runner-sweep");
    const auto data = forty_items(root);
    auto a = scripted_run(DatasetId::logic, data, root / "a");
    auto b = a;
    b.output_dir = root / "b";
    CHECK_THROWS_AS(sweep(std::vector<RunConfig>{a, b}), ConfigError);
    b.scheme = {schemes::Scheme::cot, 0};
    b.output_dir = a.output_dir;
    CHECK_THROWS_AS(sweep(std::vector<RunConfig>{a, b}), ConfigError);
    b.output_dir = root / "b";
    b.subsample = 10;
    a.subsample = 10;
    const auto s = sweep(std::vector<RunConfig>{a, b});
    CHECK(s.cells.size() == 2);
    CHECK(s.grid.at({a.backend.model_name, "logic"}).size() == 2);
    CHECK(s.cells[1].rounds == 2);
    CHECK(s.cells[0].report_digest.size() == 64);
    fs::remove_all(root);
}

TEST_CASE("sweep configuration file") {
    const auto root = fixtures::fresh_dir("runner-yaml");
    write_text(root / "sweep.yaml", R"(output_dir: results
data: corpus
repeats: 2
backend:
  kind: scripted
  behavior: fixed
  label: Straw Man
cells:
  - datasets: [logic, covid]
    schemes: [wod, wd]
  - datasets: mafalda
    schemes: wd
    definitions: formal
    models: [model/a, model b]
    parse_mode: strict
    shots: 1
)");
    const auto plan = load_sweep_config(root / "sweep.yaml");
    CHECK(plan.output_dir == root / "results");
    REQUIRE(plan.configs.size() == 6);
    const auto& first = plan.configs[0];
    CHECK(first.dataset == DatasetId::logic);
    CHECK(first.repeats == 2);
    CHECK(first.data_source == root / "corpus");
    CHECK(first.backend.scripted.fixed_label == "Straw Man");
    CHECK(first.output_dir == root / "results" / "scripted" / "logic" / "wod");
    CHECK(plan.configs[1].definitions == DefinitionsStyle::informal);
    const auto& formal = plan.configs[4];
    CHECK(formal.backend.model_name == "model/a");
    CHECK(formal.cell_scheme_key() == "wd+1shot+formal+strict");
    CHECK(formal.output_dir == root / "results" / "model_a" / "mafalda" / "wd+1shot+formal+strict");
    CHECK(plan.configs[5].output_dir.parent_path().parent_path().filename() == "model_b");

    write_text(root / "broken.yaml", "output_dir: x\ncells: {}\n");
    CHECK_THROWS_AS(load_sweep_config(root / "broken.yaml"), ConfigError);
    write_text(root / "bad_scheme.yaml", "output_dir: x\ncells:\n  - datasets: logic\n    schemes: tot\n");
    CHECK_THROWS_AS(load_sweep_config(root / "bad_scheme.yaml"), ConfigError);
    CHECK_THROWS_AS(load_sweep_config(root / "missing.yaml"), ConfigError);
    fs::remove_all(root);
}
