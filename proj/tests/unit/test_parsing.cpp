#include <doctest.h>

#include <random>
#include <set>

#include "fallacy/error.hpp"
#include "fallacy/parsing.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace fallacy;
using namespace fallacy::parsing;
using corpus::DatasetId;

namespace {

corpus::LabelSpace space_of(DatasetId d) { return fixtures::shipped_registry().label_space(d); }

std::string pick(std::mt19937_64& rng, const std::vector<std::string>& from) { return from[rng() % from.size()]; }

std::string prose(std::mt19937_64& rng) {
    static const std::vector<std::string> words = {"the",  "text", "attacks", "its",   "opponent", "rather", "than",
                                                   "the",  "claim", "so",     "this",  "is",       "weak",   "reasoning",
                                                   "Here", "my",   "view",    "\n",    "overall",  "-",      "sure!"};
    std::string out;
    const int n = static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) out += (i ? " " : "") + pick(rng, words);
    return out;
}

std::string recase(std::mt19937_64& rng, std::string s) {
    switch (rng() % 3) {
        case 0: return text::to_lower(s);
        case 1:
            for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            return s;
        default: return s;
    }
}

struct Rendered {
    std::string text;
    bool quoted = true;  // the regex oracle reads only quoted keys
};

Rendered answer_object(std::mt19937_64& rng, const std::string& label) {
    const std::string key = pick(rng, {"fallacy", "Fallacy", "FALLACY"});
    switch (rng() % 4) {
        case 0: return {"{\"" + key + "\": \"" + label + "\", \"explanation\": \"because\"}"};
        case 1: return {"{'" + key + "': '" + label + "'}"};
        case 2: return {"{\n  \"explanation\": \"first this\",\n  \"" + key + "\": \"" + label + "\",\n}"};
        default: return {"{" + key + ": " + label + "}", false};
    }
}

const std::set<OutcomeKind> kKinds = {OutcomeKind::prediction, OutcomeKind::no_fallacy, OutcomeKind::out_of_space,
                                      OutcomeKind::unparseable};

}  // namespace

TEST_CASE("mode and kind names") {
    CHECK(parse_mode("Strict") == ParseMode::strict);
    CHECK(parse_mode("lenient") == ParseMode::lenient);
    CHECK_THROWS_AS(parse_mode("fuzzy"), ConfigError);
    for (auto k : kKinds) CHECK(parse_outcome_kind(to_string(k)) == k);
    CHECK_THROWS_AS(parse_outcome_kind("other"), SchemaError);
}

TEST_CASE("reply corpus") {
    std::size_t n = 0;
    for (const auto& c : read_jsonl(fixtures::test_cases_dir() / "parser_cases.jsonl")) {
        ++n;
        CAPTURE(c.at("name").get<std::string>());
        const auto space = space_of(corpus::parse_dataset(c.at("dataset").get<std::string>()));
        const auto got =
            parse_reply(c.at("reply").get<std::string>(), space, parse_mode(c.at("mode").get<std::string>()));
        CHECK(to_string(got.kind) == c.at("kind").get<std::string>());
        CHECK(got.label == c.at("label").get<std::string>());
        CHECK(got.multi_label == c.at("multi_label").get<bool>());
    }
    CHECK(n >= 20);
}

TEST_CASE("label normalization") {
    const auto argotario = space_of(DatasetId::argotario);
    const auto logic = space_of(DatasetId::logic);
    CHECK(normalize_label("ad hominem", argotario) == "Ad Hominem");
    CHECK(normalize_label("  \"RED HERRING.\" ", argotario) == "Red Herring");
    CHECK(normalize_label("\xE2\x80\x9CRed   Herring\xE2\x80\x9D", argotario) == "Red Herring");
    CHECK(normalize_label("**Hasty Generalization**", argotario) == "Hasty Generalization");
    CHECK(normalize_label("Personal Attack", argotario) == "Ad Hominem");
    CHECK(normalize_label("Hasty Generalisation", argotario) == "Hasty Generalization");
    CHECK(normalize_label("Post Hoc Fallacy", logic) == "False Causality (Post Hoc Fallacy)");
    CHECK(normalize_label("false causality", logic) == "False Causality (Post Hoc Fallacy)");
    CHECK(normalize_label("Affirming the Consequent", logic) == "Fallacy of Converse (Affirming the Consequent)");
    CHECK(normalize_label("none", logic) == std::string(corpus::kNoFallacy));
    CHECK(normalize_label("No Fallacy", logic) == std::string(corpus::kNoFallacy));
    CHECK_FALSE(normalize_label("Slippery Slope", argotario));
    CHECK_FALSE(normalize_label("", argotario));
    CHECK_FALSE(normalize_label(" \"\" ", argotario));
    CHECK_FALSE(normalize_label("Ad Hominem attack", argotario));
}

TEST_CASE("multi-label fields keep the first known label") {
    const auto argotario = space_of(DatasetId::argotario);
    auto f = normalize_field("Ad Hominem, Red Herring", argotario);
    CHECK(f.label == "Ad Hominem");
    CHECK(f.multi_label);
    f = normalize_field("Straw Man or Appeal to Emotion", argotario);
    CHECK(f.label == "Appeal to Emotion");
    CHECK(f.multi_label);
    f = normalize_field("Red Herring / Hasty Generalization", argotario);
    CHECK(f.label == "Red Herring");
    f = normalize_field("Appeal to Fear or Prejudice", space_of(DatasetId::propaganda));
    CHECK(f.label == "Appeal to Fear or Prejudice");
    CHECK_FALSE(f.multi_label);
    f = normalize_field("Straw Man and Slippery Slope", argotario);
    CHECK_FALSE(f.label);
    CHECK_FALSE(f.multi_label);
}

TEST_CASE("outcome classification") {
    const auto logic = space_of(DatasetId::logic);
    const auto covid = space_of(DatasetId::covid);
    CHECK(classify_outcome(std::nullopt, logic).kind == OutcomeKind::unparseable);
    CHECK(classify_outcome(AnswerObject{"", std::nullopt}, logic).kind == OutcomeKind::unparseable);
    CHECK(classify_outcome(AnswerObject{" \"\" ", std::nullopt}, logic).kind == OutcomeKind::unparseable);

    const auto none = classify_outcome(AnswerObject{"No Fallacy", std::nullopt}, logic);
    CHECK(none.kind == OutcomeKind::no_fallacy);
    CHECK(none.label.empty());
    CHECK(none.is_failure());
    const auto admitted = classify_outcome(AnswerObject{"none", std::nullopt}, covid);
    CHECK(admitted.kind == OutcomeKind::prediction);
    CHECK(admitted.label == corpus::kNoFallacy);

    const auto oos = classify_outcome(AnswerObject{"Appeal to Consequences", std::nullopt}, logic, "raw");
    CHECK(oos.kind == OutcomeKind::out_of_space);
    CHECK(oos.label == "Appeal to Consequences");
    CHECK(oos.raw_reply == "raw");
    CHECK(oos.extracted_field == "Appeal to Consequences");
}

TEST_CASE("strict mode reads only the first well-formed object") {
    const auto space = space_of(DatasetId::argotario);
    CHECK(parse_reply(R"(I think {"fallacy": "Red Herring"} then {"fallacy": "Ad Hominem"})", space, ParseMode::strict)
              .label == "Red Herring");
    CHECK(parse_reply("{'fallacy': 'Red Herring'}", space, ParseMode::strict).kind == OutcomeKind::unparseable);
    CHECK(parse_reply("fallacy: Red Herring", space, ParseMode::strict).kind == OutcomeKind::unparseable);
    CHECK(parse_reply(R"({"Fallacy": "Red Herring"})", space, ParseMode::strict).kind == OutcomeKind::unparseable);
    CHECK(parse_reply(R"({"fallacy": "Red Herring"})", space, ParseMode::strict).kind == OutcomeKind::prediction);
}

TEST_CASE("extraction details") {
    auto obj = extract_answer_object(R"({"fallacy": "X", "explanation": "Y"})");
    REQUIRE(obj);
    CHECK(*obj == AnswerObject{"X", std::string("Y")});
    obj = extract_answer_object(R"({"result": {"fallacy": "Nested"}})");
    REQUIRE(obj);
    CHECK(obj->fallacy == "Nested");
    obj = extract_answer_object(R"({"fallacy": ["A", "B"]})");
    REQUIRE(obj);
    CHECK(obj->fallacy == "A, B");
    const auto line = parse_reply("Analysis first.\n**Answer:** Red Herring\n", space_of(DatasetId::argotario));
    CHECK(line.kind == OutcomeKind::prediction);
    CHECK(line.label == "Red Herring");
    CHECK_FALSE(extract_answer_object("no object { here"));
    CHECK_FALSE(extract_answer_object(R"({"label": "Red Herring"})"));
}

TEST_CASE("property: generated replies recover the embedded label") {
    std::mt19937_64 rng(2024);
    for (int iter = 0; iter < 600; ++iter) {
        const auto d = corpus::kAllDatasets[rng() % corpus::kAllDatasets.size()];
        const auto space = space_of(d);
        const auto classes = space.classes();
        const std::string truth = classes[rng() % classes.size()];
        const bool decoy = rng() % 3 == 0;
        std::string reply = prose(rng);
        if (decoy) reply += " " + answer_object(rng, pick(rng, classes)).text + " " + prose(rng);
        const auto obj = answer_object(rng, recase(rng, truth));
        reply += "\n" + obj.text + "\n" + prose(rng);
        CAPTURE(reply);

        const auto got = parse_reply(reply, space);
        CHECK(got.kind == OutcomeKind::prediction);
        CHECK(got.label == truth);
        if (obj.quoted) {
            const auto field = oracles::regex_fallacy_field(reply);
            REQUIRE(field);
            REQUIRE(got.extracted_field);
            CHECK(*got.extracted_field == *field);
        }
    }
}

TEST_CASE("property: classification is total") {
    std::mt19937_64 rng(99);
    const std::string alphabet = "{}[]\"':,\\ \nabcfFlLy.*#-";
    const std::vector<std::string> seeds = {"{\"fallacy\": ", "fallacy:", "Answer = ", "{'fallacy'", "}", "\"}"};
    for (int iter = 0; iter < 2000; ++iter) {
        const auto space = space_of(corpus::kAllDatasets[rng() % corpus::kAllDatasets.size()]);
        std::string reply;
        const int len = static_cast<int>(rng() % 60);
        for (int i = 0; i < len; ++i) {
            if (rng() % 10 == 0) reply += pick(rng, seeds);
            else reply += alphabet[rng() % alphabet.size()];
        }
        CAPTURE(reply);
        for (auto mode : {ParseMode::lenient, ParseMode::strict}) {
            ParsedOutcome got;
            REQUIRE_NOTHROW(got = parse_reply(reply, space, mode));
            CHECK(kKinds.count(got.kind) == 1);
            CHECK(got.raw_reply == reply);
            switch (got.kind) {
                case OutcomeKind::prediction: {
                    const auto classes = space.classes();
                    CHECK(std::find(classes.begin(), classes.end(), got.label) != classes.end());
                    break;
                }
                case OutcomeKind::out_of_space:
                    REQUIRE(got.extracted_field);
                    CHECK(got.label == *got.extracted_field);
                    break;
                default: CHECK(got.label.empty());
            }
        }
    }
}
