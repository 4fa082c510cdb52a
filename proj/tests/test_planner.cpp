#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include "bms/error.hpp"
#include "bms/planner.hpp"
#include "bms/prompts.hpp"
#include "bms/providers_mock.hpp"
#include "bms/text.hpp"

#include "test_util.hpp"

using namespace bms;

namespace {

// Replies with the same text for every prompt; planner unit tests do not need
// prompt-sensitive behaviour.
class FixedReplyModel final : public LanguageModel {
public:
    explicit FixedReplyModel(std::string reply) : reply_(std::move(reply)) {}
    int calls = 0;

protected:
    std::string do_complete(const std::string&, const GenParams&) override {
        ++calls;
        return reply_;
    }

private:
    std::string reply_;
};

class FlakyModel final : public LanguageModel {
public:
    FlakyModel(int failures_before_success, std::string reply)
        : failures_(failures_before_success), reply_(std::move(reply)) {}
    int calls = 0;

protected:
    std::string do_complete(const std::string&, const GenParams&) override {
        if (calls++ < failures_)
            raise(ErrorKind::provider, "synthetic outage");
        return reply_;
    }

private:
    int failures_;
    std::string reply_;
};

const PromptLibrary& library() {
    static PromptLibrary lib = PromptLibrary::load_dir(bms::test::prompts_dir());
    return lib;
}

std::vector<SemanticDimension> default_dims() {
    return load_dimensions(bms::test::repo_root() / "configs" / "dimensions.json");
}

Lexicons default_lexicons() {
    return Lexicons::load_file(bms::test::repo_root() / "configs" / "lexicons.json");
}

UserQuery make_query(const std::string& text) {
    UserQuery q;
    q.text = text;
    q.id = make_query_id(text);
    q.submitted_at = 1700000000;
    return q;
}

SubQuery make_subquery(const std::string& text, int ordinal = 1) {
    SubQuery sq;
    sq.parent_query = "q-test";
    sq.id = make_subquery_id("q-test", ordinal);
    sq.text = text;
    sq.dimension = SemanticDimension{"mechanism", DimensionKind::decomposition};
    sq.ordinal = ordinal;
    return sq;
}

KeywordSet make_set(const std::string& subquery_id, std::vector<std::string> surfaces) {
    KeywordSet set;
    set.subquery = subquery_id;
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
        Keyword kw;
        kw.surface = surfaces[i];
        kw.salience_rank = static_cast<int>(i) + 1;
        kw.dimension = SemanticDimension{"entity", DimensionKind::keyword};
        set.keywords.push_back(kw);
    }
    return set;
}

} // namespace

TEST_CASE("load_dimensions reads both kinds and rejects duplicates") {
    auto dims = default_dims();
    int decomposition = 0, keyword = 0;
    for (const auto& d : dims) {
        if (d.kind == DimensionKind::decomposition) ++decomposition;
        if (d.kind == DimensionKind::keyword) ++keyword;
    }
    CHECK(decomposition == 4);
    CHECK(keyword == 3);

    auto dir = bms::test::scratch_dir("dims");
    {
        std::ofstream out(dir / "dup.json");
        out << R"({"decomposition": ["mechanism", "Mechanism"]})";
    }
    CHECK_THROWS_AS(load_dimensions(dir / "dup.json"), Error);
    CHECK_THROWS_AS(load_dimensions(dir / "missing.json"), Error);
    {
        std::ofstream out(dir / "empty.json");
        out << R"({"decomposition": []})";
    }
    CHECK_THROWS_AS(load_dimensions(dir / "empty.json"), Error);
}

TEST_CASE("decompose_query parses dimension-tagged lines") {
    auto q = make_query("Effects of cyp17a1 knockout on zebrafish?");
    FixedReplyModel lm("- [mechanism] How does cyp17a1 loss alter steroidogenesis?\n"
                       "- [phenotype] What phenotypes follow cyp17a1 knockout in zebrafish?\n"
                       "- [clinical relevance] Are cyp17a1 variants linked to human disease?\n"
                       "- [molecular context] Which pathways does cyp17a1 participate in?\n");
    auto subs = decompose_query(q, default_dims(), library().get(TemplateName::decompose), lm);
    REQUIRE(subs.size() == 4);
    for (std::size_t i = 0; i < subs.size(); ++i) {
        CHECK(subs[i].ordinal == static_cast<int>(i) + 1);
        CHECK(subs[i].id == make_subquery_id(q.id, subs[i].ordinal));
        CHECK(subs[i].parent_query == q.id);
        CHECK(subs[i].dimension.kind == DimensionKind::decomposition);
    }
    CHECK(subs[0].dimension.name == "mechanism");
    CHECK(subs[1].text == "What phenotypes follow cyp17a1 knockout in zebrafish?");
}

TEST_CASE("decompose_query accepts numbered bullets and skips unknown dimensions") {
    auto q = make_query("query");
    FixedReplyModel lm("1. [mechanism] first\n"
                       "2) [made-up-dimension] skipped\n"
                       "3. [phenotype] second\n"
                       "free text line without a tag\n");
    auto subs = decompose_query(q, default_dims(), library().get(TemplateName::decompose), lm);
    REQUIRE(subs.size() == 2);
    CHECK(subs[0].text == "first");
    CHECK(subs[1].text == "second");
}

TEST_CASE("decompose_query identity decomposition") {
    auto q = make_query("What regulates hepcidin?");
    FixedReplyModel lm("- [mechanism] What regulates hepcidin?");
    auto subs = decompose_query(q, default_dims(), library().get(TemplateName::decompose), lm);
    REQUIRE(subs.size() == 1);
    CHECK(subs[0].text == q.text);
}

TEST_CASE("decompose_query dedupes repeats and honors the cap") {
    auto q = make_query("query");
    std::string reply;
    for (int i = 0; i < 12; ++i)
        reply += "- [mechanism] angle " + std::to_string(i % 10) + "\n";
    FixedReplyModel lm(reply);
    PlannerOptions opts;
    opts.max_subqueries = 6;
    auto subs =
        decompose_query(q, default_dims(), library().get(TemplateName::decompose), lm, opts);
    CHECK(subs.size() == 6);
    std::set<std::string> texts;
    for (const auto& s : subs) texts.insert(s.text);
    CHECK(texts.size() == 6);
}

TEST_CASE("decompose_query errors after exhausting retries on garbage") {
    auto q = make_query("query");
    FixedReplyModel lm("nothing parseable here");
    PlannerOptions opts;
    opts.retry_budget = 2;
    try {
        decompose_query(q, default_dims(), library().get(TemplateName::decompose), lm, opts);
        FAIL("expected planner error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::planner);
    }
    CHECK(lm.calls == 3);
}

TEST_CASE("decompose_query retries over provider outages") {
    auto q = make_query("query");
    FlakyModel lm(2, "- [mechanism] recovered");
    PlannerOptions opts;
    opts.retry_budget = 2;
    auto subs =
        decompose_query(q, default_dims(), library().get(TemplateName::decompose), lm, opts);
    CHECK(subs.size() == 1);
    CHECK(lm.calls == 3);

    FlakyModel dead(3, "- [mechanism] too late");
    try {
        decompose_query(q, default_dims(), library().get(TemplateName::decompose), dead, opts);
        FAIL("expected planner error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::planner);
    }
}

TEST_CASE("extract_keywords ranks, normalizes, and merges") {
    auto sq = make_subquery("cyp17a1 KO alters sex differentiation in zebrafish");
    FixedReplyModel lm("cyp17a1; sex differentiation; zebrafish; gonadal development");
    auto set = extract_keywords(sq, default_dims(), library().get(TemplateName::keywords), lm);
    REQUIRE(set.size() == 4);
    CHECK(set.subquery == sq.id);
    for (int i = 0; i < set.size(); ++i) CHECK(set.keywords[i].salience_rank == i + 1);
    CHECK(set.keywords[0].surface == "cyp17a1");
    CHECK(set.keywords[3].surface == "gonadal development");

    FixedReplyModel dup("A; a; A ");
    auto merged = extract_keywords(sq, default_dims(), library().get(TemplateName::keywords), dup);
    REQUIRE(merged.size() == 1);
    CHECK(merged.keywords[0].surface == "a");
    CHECK(merged.keywords[0].salience_rank == 1);
}

TEST_CASE("extract_keywords reads dimension tags and caps size") {
    auto sq = make_subquery("text");
    FixedReplyModel lm("[entity] TNF; [process] signal transduction; [unknown-tag] alpha; beta");
    PlannerOptions opts;
    opts.max_keywords = 3;
    auto set =
        extract_keywords(sq, default_dims(), library().get(TemplateName::keywords), lm, opts);
    REQUIRE(set.size() == 3);
    CHECK(set.keywords[0].surface == "tnf");
    CHECK(set.keywords[0].dimension.name == "entity");
    CHECK(set.keywords[1].dimension.name == "process");
    CHECK(set.keywords[2].surface == "alpha"); // unknown tag falls back to default dimension
    CHECK(set.keywords[2].dimension.kind == DimensionKind::keyword);
}

TEST_CASE("extract_keywords errors on empty extraction") {
    auto sq = make_subquery("text");
    FixedReplyModel lm("");
    try {
        extract_keywords(sq, default_dims(), library().get(TemplateName::keywords), lm);
        FAIL("expected planner error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::planner);
    }
}

TEST_CASE("build_task_graph emits one node per keyword occurrence") {
    auto sets = std::vector<KeywordSet>{make_set("q-test-s1", {"alpha"})};
    FixedReplyModel lm("EDGES: none");
    auto build = build_task_graph(sets, library().get(TemplateName::graph), lm);
    CHECK(build.graph.nodes.size() == 1);
    CHECK(build.graph.edges.empty());
    CHECK(lm.calls == 0); // single node: no proposal round needed
    CHECK(build.graph.nodes[0].id == "q-test-s1-k1");
    CHECK(build.graph.nodes[0].keyword.surface == "alpha");
}

TEST_CASE("build_task_graph keeps acyclic prefix of proposals") {
    std::vector<KeywordSet> sets{make_set("q-test-s1", {"a", "b", "c"}),
                                 make_set("q-test-s2", {"d", "e", "f"})};
    FixedReplyModel lm("EDGES:\n1 -> 2\n2 -> 3\n3 -> 1\n");
    auto build = build_task_graph(sets, library().get(TemplateName::graph), lm);
    CHECK(build.graph.nodes.size() == 6);
    REQUIRE(build.graph.edges.size() == 2);
    CHECK(build.graph.edges[0] == std::pair<std::string, std::string>{"q-test-s1-k1",
                                                                      "q-test-s1-k2"});
    CHECK(build.graph.edges[1] == std::pair<std::string, std::string>{"q-test-s1-k2",
                                                                      "q-test-s1-k3"});
    REQUIRE(build.dropped_edges.size() == 1);
    CHECK(build.dropped_edges[0] ==
          std::pair<std::string, std::string>{"q-test-s1-k3", "q-test-s1-k1"});
    CHECK_NOTHROW(topo_order(build.graph));

    // re-adding the dropped edge must close a cycle
    auto broken = build.graph;
    broken.edges.push_back(build.dropped_edges[0]);
    CHECK_THROWS_AS(topo_order(broken), Error);
}

TEST_CASE("build_task_graph handles self-loops, duplicates, and junk") {
    std::vector<KeywordSet> sets{make_set("q-test-s1", {"a", "b"})};
    FixedReplyModel lm("EDGES:\n1 -> 1\n1 -> 2\n1 -> 2\n9 -> 1\nnot an edge\n");
    auto build = build_task_graph(sets, library().get(TemplateName::graph), lm);
    CHECK(build.graph.edges.size() == 1); // duplicate merged
    REQUIRE(build.dropped_edges.size() == 1); // the self-loop
    CHECK(build.dropped_edges[0].first == build.dropped_edges[0].second);
    CHECK(build.invalid_proposals == 2); // out-of-range + junk line
}

TEST_CASE("build_task_graph degrades to edgeless on persistent provider failure") {
    std::vector<KeywordSet> sets{make_set("q-test-s1", {"a", "b", "c"}),
                                 make_set("q-test-s2", {"d", "e", "f"})};
    FlakyModel lm(99, "unused");
    auto build = build_task_graph(sets, library().get(TemplateName::graph), lm);
    CHECK(build.graph.nodes.size() == 6);
    CHECK(build.graph.edges.empty());
    CHECK(lm.calls == 3);
}

TEST_CASE("task graph properties over randomized proposals") {
    std::mt19937_64 gen(424242);
    for (int trial = 0; trial < 150; ++trial) {
        int n_sets = 1 + static_cast<int>(gen() % 4);
        std::vector<KeywordSet> sets;
        std::size_t expected_nodes = 0;
        for (int s = 0; s < n_sets; ++s) {
            int e = 1 + static_cast<int>(gen() % 4);
            std::vector<std::string> surfaces;
            for (int k = 0; k < e; ++k)
                surfaces.push_back("kw" + std::to_string(s) + "-" + std::to_string(k));
            expected_nodes += surfaces.size();
            sets.push_back(make_set("q-test-s" + std::to_string(s + 1), surfaces));
        }
        int n_props = static_cast<int>(gen() % 12);
        std::string reply = "EDGES:\n";
        for (int p = 0; p < n_props; ++p) {
            int from = 1 + static_cast<int>(gen() % expected_nodes);
            int to = 1 + static_cast<int>(gen() % expected_nodes);
            reply += std::to_string(from) + " -> " + std::to_string(to) + "\n";
        }
        FixedReplyModel lm(reply);
        auto build = build_task_graph(sets, library().get(TemplateName::graph), lm);
        CHECK(build.graph.nodes.size() == expected_nodes);
        CHECK_NOTHROW(topo_order(build.graph));
        for (const auto& dropped : build.dropped_edges) {
            auto broken = build.graph;
            broken.edges.push_back(dropped);
            CHECK_THROWS_AS(topo_order(broken), Error);
        }
    }
}

TEST_CASE("detect_protein_intent classifies annotation, structure, and none") {
    auto lex = default_lexicons();

    auto annotation = detect_protein_intent(
        make_subquery("cyp17a1 protein interaction partners in zebrafish"), lex);
    CHECK(annotation.kind == ProteinIntentKind::annotation);
    CHECK(annotation.gene == "cyp17a1");
    CHECK(annotation.organism == "zebrafish");

    auto structure =
        detect_protein_intent(make_subquery("What is the 3D structure of cyp17a1?"), lex);
    CHECK(structure.kind == ProteinIntentKind::structure);
    CHECK(structure.gene == "cyp17a1");
    CHECK_FALSE(structure.organism.has_value());

    auto none = detect_protein_intent(make_subquery("prevalence of asthma in adults"), lex);
    CHECK(none.kind == ProteinIntentKind::none);
    CHECK_FALSE(none.gene.has_value());

    // gene without any descriptive or structural term: stays none
    auto bare = detect_protein_intent(make_subquery("cyp17a1 zebrafish"), lex);
    CHECK(bare.kind == ProteinIntentKind::none);

    // structural phrasing wins over co-occurring descriptive terms
    auto both = detect_protein_intent(
        make_subquery("spatial conformation and interaction partners of tp53"), lex);
    CHECK(both.kind == ProteinIntentKind::structure);

    // lexicon genes with no digits still trigger
    auto lexgene = detect_protein_intent(make_subquery("TNF protein function in human"), lex);
    CHECK(lexgene.kind == ProteinIntentKind::annotation);
    CHECK(lexgene.gene == "tnf");
    CHECK(lexgene.organism == "human");
}

TEST_CASE("detect_protein_intent is deterministic") {
    auto lex = default_lexicons();
    auto sq = make_subquery("cyp17a1 protein interaction partners in zebrafish");
    auto first = detect_protein_intent(sq, lex);
    for (int i = 0; i < 10; ++i) CHECK(detect_protein_intent(sq, lex) == first);
}

TEST_CASE("assign_tools duplicates nodes per tool and keeps acyclicity") {
    std::vector<KeywordSet> sets{make_set("q-test-s1", {"a", "b"}),
                                 make_set("q-test-s2", {"c"})};
    FixedReplyModel lm("EDGES:\n1 -> 3\n");
    auto build = build_task_graph(sets, library().get(TemplateName::graph), lm);

    std::map<std::string, ProteinIntent> intents;
    intents["q-test-s1"] = ProteinIntent{ProteinIntentKind::none, {}, {}};
    intents["q-test-s2"] =
        ProteinIntent{ProteinIntentKind::structure, std::string("cyp17a1"), {}};

    auto assigned = assign_tools(build.graph, intents);
    // s1: 2 keywords x {literature, web}; s2: 1 keyword x {literature, protein-structure, web}
    CHECK(assigned.nodes.size() == 7);
    int structure_nodes = 0;
    for (const auto& n : assigned.nodes) {
        if (n.tool == ToolKind::protein_structure) {
            ++structure_nodes;
            CHECK(n.source_subquery == "q-test-s2");
        }
        CHECK(n.id.find(to_string(n.tool)) != std::string::npos);
    }
    CHECK(structure_nodes == 1);
    // edge 1->3 expands across 2 x 3 tool variants
    CHECK(assigned.edges.size() == 6);
    CHECK_NOTHROW(topo_order(assigned));
}

TEST_CASE("assign_tools rejects intents for unknown sub-queries") {
    std::vector<KeywordSet> sets{make_set("q-test-s1", {"a"})};
    FixedReplyModel lm("EDGES: none");
    auto build = build_task_graph(sets, library().get(TemplateName::graph), lm);
    std::map<std::string, ProteinIntent> intents;
    intents["q-test-s9"] = ProteinIntent{};
    try {
        assign_tools(build.graph, intents);
        FAIL("expected planner error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::planner);
    }
}

TEST_CASE("assign_tools on an empty graph is a no-op") {
    TaskGraph empty;
    auto out = assign_tools(empty, {});
    CHECK(out.nodes.empty());
    CHECK(out.edges.empty());
}

TEST_CASE("topo_order rejects cycles and respects listing order") {
    TaskGraph g;
    for (int i = 0; i < 3; ++i) {
        TaskNode n;
        n.id = "n" + std::to_string(i);
        n.source_subquery = "q-test-s1";
        n.keyword.surface = "k";
        g.nodes.push_back(n);
    }
    g.edges = {{"n2", "n0"}};
    auto order = topo_order(g);
    CHECK(order == std::vector<std::string>{"n1", "n2", "n0"});

    g.edges.push_back({"n0", "n2"});
    CHECK_THROWS_AS(topo_order(g), Error);

    TaskGraph bad;
    bad.edges = {{"missing", "also-missing"}};
    CHECK_THROWS_AS(topo_order(bad), Error);
}

TEST_CASE("scripted transcripts make planning byte-reproducible") {
    auto q = make_query("Effects of cyp17a1 knockout on zebrafish?");
    auto run_once = [&] {
        FixedReplyModel decomp("- [mechanism] steroid synthesis impact\n"
                               "- [phenotype] gonad development outcomes\n");
        FixedReplyModel kw("cyp17a1; zebrafish; knockout");
        FixedReplyModel graph("EDGES:\n1 -> 4\n");
        auto subs =
            decompose_query(q, default_dims(), library().get(TemplateName::decompose), decomp);
        std::vector<KeywordSet> sets;
        for (const auto& sq : subs)
            sets.push_back(
                extract_keywords(sq, default_dims(), library().get(TemplateName::keywords), kw));
        auto build = build_task_graph(sets, library().get(TemplateName::graph), graph);
        std::map<std::string, ProteinIntent> intents;
        for (const auto& sq : subs)
            intents[sq.id] = detect_protein_intent(sq, default_lexicons());
        return assign_tools(build.graph, intents);
    };
    CHECK(run_once() == run_once());
}
