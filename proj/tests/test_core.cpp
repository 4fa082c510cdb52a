#include <doctest.h>

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "bms/error.hpp"
#include "bms/ids.hpp"
#include "bms/json_io.hpp"
#include "bms/prompts.hpp"
#include "bms/text.hpp"
#include "bms/timeutil.hpp"
#include "bms/types.hpp"

#include "test_util.hpp"

using namespace bms;

TEST_CASE("text normalization") {
    CHECK(trim("  x \t\n") == "x");
    CHECK(trim("") == "");
    CHECK(trim(" \t ") == "");
    CHECK(to_lower_ascii("AbC-12Ω") == "abc-12Ω");
    CHECK(collapse_whitespace("a  b\t\nc") == "a b c");
    CHECK(normalize_text("  TNF-alpha   Signaling \n") == "tnf-alpha signaling");
}

TEST_CASE("tokenize splits on non-alphanumerics and lowercases") {
    CHECK(tokenize("TNF-alpha (human) 3D") ==
          std::vector<std::string>{"tnf", "alpha", "human", "3d"});
    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(tokenize("...") == std::vector<std::string>{});
}

TEST_CASE("contains_word respects boundaries") {
    CHECK(contains_word("interleukin 6 receptor", "interleukin"));
    CHECK(contains_word("interleukin 6 receptor", "6"));
    CHECK_FALSE(contains_word("interleukin", "il"));
    CHECK_FALSE(contains_word("acetylation", "lat"));
    CHECK(contains_word("p53", "p53"));
}

TEST_CASE("contains_normalized matches across case and spacing") {
    CHECK(contains_normalized("Protein   Kinase A", "kinase a"));
    CHECK_FALSE(contains_normalized("kinase", "kinase a"));
}

TEST_CASE("split and join round") {
    CHECK(split("a;b;;c", ';') == std::vector<std::string>{"a", "b", "", "c"});
    CHECK(join({"a", "b"}, ", ") == "a, b");
    CHECK(join({}, ",") == "");
}

TEST_CASE("fnv1a64 reference vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
    CHECK(to_hex(fnv1a64("pubmed:12345")) == "2ca941186ba5508b");
}

TEST_CASE("splitmix64 reference stream") {
    std::uint64_t state = 0;
    CHECK(splitmix64(state) == 0xe220a8397b1dcdafULL);
    CHECK(splitmix64(state) == 0x6e789e6aa1b965f4ULL);
    CHECK(splitmix64(state) == 0x06c45d188009454fULL);
    std::uint64_t s42 = 42;
    CHECK(splitmix64(s42) == 0xbdd732262feb6e95ULL);
}

TEST_CASE("u64_to_unit_double stays in [0,1)") {
    auto gen = bms::test::rng(7);
    for (int i = 0; i < 2000; ++i) {
        double d = u64_to_unit_double(gen());
        CHECK(d >= 0.0);
        CHECK(d < 1.0);
    }
    CHECK(u64_to_unit_double(0) == 0.0);
    CHECK(u64_to_unit_double(~0ULL) < 1.0);
}

TEST_CASE("rfc3339 formatting and parsing") {
    CHECK(to_rfc3339(0) == "1970-01-01T00:00:00Z");
    CHECK(to_rfc3339(1755302400) == "2025-08-16T00:00:00Z");
    CHECK(parse_rfc3339("1970-01-01T00:00:00Z") == 0);
    CHECK(parse_rfc3339("1970-01-01T02:00:00+02:00") == 0);
    CHECK(parse_rfc3339("1969-12-31T22:00:00-02:00") == 0);
    CHECK_THROWS_AS(parse_rfc3339("not a date"), Error);

    auto gen = bms::test::rng(11);
    for (int i = 0; i < 500; ++i) {
        Timestamp t = static_cast<Timestamp>(gen() % 4102444800ULL); // through 2100
        CHECK(parse_rfc3339(to_rfc3339(t)) == t);
    }
}

TEST_CASE("normalize_keyword canonicalizes and rejects empties") {
    CHECK(normalize_keyword("  TNF   Alpha ") == "tnf alpha");
    CHECK(normalize_keyword("p53") == "p53");
    CHECK_THROWS_AS(normalize_keyword("   "), Error);
    try {
        normalize_keyword(" \t");
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::invalid_keyword);
    }
}

TEST_CASE("validate_config names the offending field") {
    FilterConfig ok;
    CHECK(validate_config(ok) == ok);

    auto expect_config_error = [](FilterConfig cfg, const std::string& field) {
        try {
            validate_config(cfg);
            FAIL_CHECK("expected config error for ", field);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::config);
            CHECK(std::string(e.what()).find(field) != std::string::npos);
        }
    };
    FilterConfig bad = ok;
    bad.coverage_threshold = 1.5;
    expect_config_error(bad, "coverage_threshold");
    bad = ok;
    bad.coverage_threshold = -0.1;
    expect_config_error(bad, "coverage_threshold");
    bad = ok;
    bad.literature_top_k = 0;
    expect_config_error(bad, "literature_top_k");
    bad = ok;
    bad.per_source_max = 0;
    expect_config_error(bad, "per_source_max");
    bad = ok;
    bad.web_relevance_threshold = 2.0;
    expect_config_error(bad, "web_relevance_threshold");
    bad = ok;
    bad.web_top_k = -1;
    expect_config_error(bad, "web_top_k");
    bad = ok;
    bad.fallback_keyword_count = 0;
    expect_config_error(bad, "fallback_keyword_count");
}

TEST_CASE("protein sequence alphabet") {
    CHECK(is_valid_protein_sequence("ACDEFGHIKLMNPQRSTVWY"));
    CHECK(is_valid_protein_sequence("MKTAYIAKQRQISFVKSHFSRQLEERLGLIEVQAPILSRVGDGTQDNLSGAEKAVQVKVKALPDAQFEVVHSLAKWKRQTLGQHDFSAGEGLYTHMKALRPDEDRLSPLHSVYVDQWDWERVMGDGERQFSTLKSTVEAIWAGIKATEAAVSEEFGLAPFLPDQIHFVHSQELLSRYPDLDAKGRERAIAKDLGAVFLVGIGGKLSDGHRHDVRAPDYDDWSTPSELGHAGLNGDILVWNPVLEDAFELSSMGIRVDADTLKHQLALTGDEDRLELEWHQALLRGEMPQTIGGGIGQSRLTMLLLQLPHIGQVQAGVWPAAVRESVPSLL"));
    CHECK(is_valid_protein_sequence("MBJOUXZ")); // extended letters allowed
    CHECK_FALSE(is_valid_protein_sequence("MKT AYI"));
    CHECK_FALSE(is_valid_protein_sequence("MKT1"));
    CHECK_FALSE(is_valid_protein_sequence(""));
}

TEST_CASE("pdb payload gate checks the first record") {
    CHECK(is_valid_pdb_payload("HEADER    OXIDOREDUCTASE\nATOM      1  N   MET A   1\n"));
    CHECK(is_valid_pdb_payload("ATOM      1  N   MET A   1  11.104\n"));
    CHECK(is_valid_pdb_payload("MODEL        1\nATOM ...\n"));
    CHECK(is_valid_pdb_payload("\n  \nHEADER    X\n")); // leading blank lines skipped
    CHECK_FALSE(is_valid_pdb_payload("<!DOCTYPE html><html>not found</html>"));
    CHECK_FALSE(is_valid_pdb_payload(""));
    CHECK_FALSE(is_valid_pdb_payload("REMARK only remarks\n"));
    CHECK_FALSE(is_valid_pdb_payload("HEADERX bad token\n"));
}

TEST_CASE("identifier builders are deterministic and prefixed") {
    auto q1 = make_query_id("What does BRCA1 do?");
    auto q2 = make_query_id("  what  does brca1 do?  ");
    CHECK(q1 == q2); // normalization feeds the hash
    CHECK(q1.rfind("q-", 0) == 0);
    CHECK(make_subquery_id(q1, 3) == q1 + "-s3");

    Document d;
    d.source = LiteratureSource::pmc;
    d.external_id = "PMC77";
    CHECK(d.id() == "doc:pmc:PMC77");

    WebResult w;
    w.engine = SearchEngine::brave;
    w.url = "https://example.org/a";
    CHECK(w.id() == "web:brave:" + to_hex(fnv1a64("https://example.org/a")));

    ProteinRecord p;
    p.uniprot_id = "Q6TES9";
    CHECK(p.id() == "prot:Q6TES9");
    StructureFile f;
    f.uniprot_id = "Q6TES9";
    CHECK(f.id() == "struct:Q6TES9");
}

TEST_CASE("enum string maps cover every member") {
    CHECK(literature_source_from_string("pubmed") == LiteratureSource::pubmed);
    CHECK(literature_source_from_string("pmc") == LiteratureSource::pmc);
    CHECK(literature_source_from_string("sciencedirect") == LiteratureSource::sciencedirect);
    CHECK(std::string(to_string(ToolKind::protein_annotation)) == "protein-annotation");
    CHECK(tool_kind_from_string("protein-structure") == ToolKind::protein_structure);
    CHECK(search_engine_from_string("duckduckgo") == SearchEngine::duckduckgo);
    CHECK(std::string(to_string(DimensionKind::keyword)) == "keyword-dimension");
    CHECK_THROWS_AS(tool_kind_from_string("sparql"), Error);
}

TEST_CASE("json round trips preserve optionals and maps") {
    Document d;
    d.source = LiteratureSource::sciencedirect;
    d.external_id = "S1";
    d.title = "A title";
    d.abstract_text = "An abstract.";
    d.url = "https://doi.org/10.1000/x";
    d.retrieved_at = 1700000000;
    nlohmann::json j = d;
    CHECK_FALSE(j.contains("similarity"));
    CHECK(j.at("abstract").get<std::string>() == "An abstract.");
    CHECK(j.get<Document>() == d);
    d.similarity = 0.25;
    CHECK(nlohmann::json(d).get<Document>() == d);

    McqItem item;
    item.id = "mcq-1";
    item.level = 2;
    item.stem = "Which?";
    item.options = {"one", "two", "three", "four"};
    item.answer_key = 'C';
    item.context_refs = {4, 9};
    CHECK(nlohmann::json(item).get<McqItem>() == item);
    nlohmann::json bad = item;
    bad["answer_key"] = "E";
    CHECK_THROWS_AS(bad.get<McqItem>(), Error);

    BenchmarkRun run;
    run.id = "bench-1";
    run.items = {item};
    run.answers["mcq-1"] = {"C", "", "B"};
    run.per_level_accuracy[2] = LevelStats{0.5, 0.1};
    run.repeats = 3;
    CHECK(nlohmann::json(run).get<BenchmarkRun>() == run);

    ProteinRecord p;
    p.uniprot_id = "P01375";
    p.gene = "TNF";
    p.organism = "Homo sapiens";
    p.function_text = "Cytokine.";
    p.interactions = {"TNFRSF1A", "TNFRSF1B"};
    p.sequence = "MSTESMIRDVELAEEALPKK";
    p.structure_ref = "struct:P01375";
    CHECK(nlohmann::json(p).get<ProteinRecord>() == p);

    SubAnswer a;
    a.id = "ans:q-1-s1";
    a.subquery = "q-1-s1";
    a.text = "Answer.";
    a.evidence = {};
    a.confident = false;
    CHECK(nlohmann::json(a).get<SubAnswer>() == a);
}

TEST_CASE("prompt library loads the shipped templates") {
    auto lib = PromptLibrary::load_dir(bms::test::prompts_dir());
    for (const auto& [name, placeholders] : required_placeholders()) {
        const auto& tmpl = lib.get(name);
        for (const auto& ph : placeholders)
            CHECK(tmpl.body.find("{{" + ph + "}}") != std::string::npos);
    }
    CHECK(lib.get(TemplateName::decompose).body.rfind("@@task decompose", 0) == 0);
}

TEST_CASE("prompt rendering substitutes every occurrence") {
    PromptTemplate tmpl{TemplateName::topic, "x {{a}} y {{a}} z {{b}} {{missing}}"};
    auto out = render_prompt(tmpl, {{"a", "1"}, {"b", "2"}});
    CHECK(out == "x 1 y 1 z 2 {{missing}}");
}

TEST_CASE("prompt library rejects bad directories and bodies") {
    CHECK_THROWS_AS(PromptLibrary::load_dir("/nonexistent/prompts"), Error);

    auto dir = bms::test::scratch_dir("prompts-bad");
    for (const auto& [name, _] : required_placeholders()) {
        std::ofstream out(dir / (std::string(to_string(name)) + ".txt"));
        out << "@@task " << to_string(name) << "\nbody without placeholders\n";
    }
    try {
        PromptLibrary::load_dir(dir);
        FAIL("expected config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
        CHECK(std::string(e.what()).find("{{") != std::string::npos);
    }
}

TEST_CASE("error kinds render stable prefixes") {
    Error e(ErrorKind::source_unavailable, "pubmed timed out");
    CHECK(std::string(e.what()) == "source-unavailable error: pubmed timed out");
    CHECK(std::string(to_string(ErrorKind::transcript_miss)) == "transcript-miss error");
}
