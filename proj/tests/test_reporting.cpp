#include "bms/reporting.hpp"

#include "bms/error.hpp"
#include "bms/json_io.hpp"
#include "bms/prompts.hpp"
#include "bms/providers_mock.hpp"
#include "bms/text.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "test_util.hpp"

using namespace bms;

namespace {

// Same reply for every prompt; counts calls.
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

// Fails every call with a provider error.
class AlwaysFailModel final : public LanguageModel {
public:
    int calls = 0;

protected:
    std::string do_complete(const std::string&, const GenParams&) override {
        ++calls;
        raise(ErrorKind::provider, "scripted outage");
    }
};

// Fails n times, then delegates to a fixed reply.
class FlakyModel final : public LanguageModel {
public:
    FlakyModel(int failures, std::string reply) : failures_(failures), reply_(std::move(reply)) {}

protected:
    std::string do_complete(const std::string&, const GenParams&) override {
        if (failures_-- > 0) raise(ErrorKind::source_unavailable, "flaky");
        return reply_;
    }

private:
    int failures_;
    std::string reply_;
};

SubQuery make_sq(const std::string& id, const std::string& text) {
    SubQuery sq;
    sq.id = id;
    sq.parent_query = "q-parent";
    sq.text = text;
    sq.dimension = {"mechanism", DimensionKind::decomposition};
    return sq;
}

Document make_doc(const std::string& ext, const std::string& title, const std::string& text) {
    Document d;
    d.source = LiteratureSource::pubmed;
    d.external_id = ext;
    d.title = title;
    d.abstract_text = text;
    d.url = "https://pubmed.example/" + ext;
    return d;
}

RetrievalBundle doc_bundle(const std::string& subquery, std::vector<Document> docs) {
    RetrievalBundle b;
    b.subquery = subquery;
    b.literature = std::move(docs);
    return b;
}

const PromptLibrary& library() {
    static PromptLibrary lib = PromptLibrary::load_dir(bms::test::prompts_dir());
    return lib;
}

SubAnswer make_answer(const std::string& subquery, const std::string& text,
                      std::vector<std::string> evidence, bool confident = true) {
    SubAnswer ans;
    ans.id = "ans:" + subquery;
    ans.subquery = subquery;
    ans.text = text;
    ans.evidence = std::move(evidence);
    ans.confident = confident;
    return ans;
}

} // namespace

TEST_CASE("sub-answer extraction cites the evidence the provider names") {
    SubQuery sq = make_sq("q-1-s1", "how does cortisol affect immune cells");
    auto bundle = doc_bundle(
        "q-1-s1", {make_doc("100", "Cortisol and lymphocytes",
                            "Cortisol suppresses lymphocyte proliferation."),
                   make_doc("101", "Glucocorticoid signalling",
                            "Glucocorticoid receptors mediate transcriptional change.")});
    ExtractiveLanguageModel lm;
    auto ans = extract_sub_answer(sq, bundle, library().get(TemplateName::sub_answer), lm);

    CHECK(ans.id == "ans:q-1-s1");
    CHECK(ans.subquery == "q-1-s1");
    CHECK(ans.confident);
    REQUIRE(ans.evidence.size() == 2);
    CHECK(ans.evidence[0] == "doc:pubmed:100");
    CHECK(ans.evidence[1] == "doc:pubmed:101");
    CHECK(ans.text.find("Cortisol suppresses lymphocyte proliferation.") != std::string::npos);
    // Both abstracts arrive as separate paragraphs.
    CHECK(ans.text.find("\n\n") != std::string::npos);
}

TEST_CASE("an empty bundle short-circuits to the degraded marker") {
    SubQuery sq = make_sq("q-1-s1", "anything");
    RetrievalBundle bundle;
    bundle.subquery = "q-1-s1";
    ExtractiveLanguageModel lm;
    auto ans = extract_sub_answer(sq, bundle, library().get(TemplateName::sub_answer), lm);

    CHECK_FALSE(ans.confident);
    CHECK(ans.text == kInsufficientEvidenceMarker);
    CHECK(ans.evidence.empty());
    CHECK(lm.calls() == 0);
}

TEST_CASE("unknown evidence ids are stripped, known ones kept") {
    SubQuery sq = make_sq("q-1-s1", "question");
    auto bundle =
        doc_bundle("q-1-s1", {make_doc("7", "Title seven", "Body seven.")});
    FixedReplyModel lm("ANSWER: Body seven is the mechanism.\n"
                       "EVIDENCE: doc:pubmed:7, doc:pubmed:999, web:google:nope\n"
                       "CONFIDENT: yes\n");
    auto ans = extract_sub_answer(sq, bundle, library().get(TemplateName::sub_answer), lm);

    CHECK(ans.confident);
    CHECK(ans.evidence == std::vector<std::string>{"doc:pubmed:7"});
}

TEST_CASE("provider outage after retries yields the marker answer") {
    SubQuery sq = make_sq("q-1-s1", "question");
    auto bundle = doc_bundle("q-1-s1", {make_doc("7", "Title", "Body.")});
    AlwaysFailModel lm;
    ReportOptions options;
    options.retry_budget = 2;
    auto ans = extract_sub_answer(sq, bundle, library().get(TemplateName::sub_answer), lm, options);

    CHECK_FALSE(ans.confident);
    CHECK(ans.text == kInsufficientEvidenceMarker);
    CHECK(lm.calls == 3); // one initial try plus two retries
}

TEST_CASE("a transient outage recovers within the retry budget") {
    SubQuery sq = make_sq("q-1-s1", "question");
    auto bundle = doc_bundle("q-1-s1", {make_doc("7", "Title", "Body.")});
    FlakyModel lm(1, "ANSWER: Recovered.\nEVIDENCE: doc:pubmed:7\nCONFIDENT: yes\n");
    auto ans = extract_sub_answer(sq, bundle, library().get(TemplateName::sub_answer), lm);

    CHECK(ans.confident);
    CHECK(ans.text == "Recovered.");
}

TEST_CASE("a reply that never matches the answer shape degrades after retries") {
    SubQuery sq = make_sq("q-1-s1", "question");
    auto bundle = doc_bundle("q-1-s1", {make_doc("7", "Title", "Body.")});
    FixedReplyModel lm("I cannot answer in the requested format.");
    auto ans = extract_sub_answer(sq, bundle, library().get(TemplateName::sub_answer), lm);

    CHECK_FALSE(ans.confident);
    CHECK(ans.text == kInsufficientEvidenceMarker);
    CHECK(lm.calls == 3);
}

TEST_CASE("a no-confidence reply is preserved as unconfident") {
    SubQuery sq = make_sq("q-1-s1", "question");
    auto bundle = doc_bundle("q-1-s1", {make_doc("7", "Title", "Body.")});
    FixedReplyModel lm("ANSWER: The evidence is tangential.\n"
                       "EVIDENCE: doc:pubmed:7\nCONFIDENT: no\n");
    auto ans = extract_sub_answer(sq, bundle, library().get(TemplateName::sub_answer), lm);

    CHECK_FALSE(ans.confident);
    CHECK(ans.text == "The evidence is tangential.");
    CHECK(ans.evidence == std::vector<std::string>{"doc:pubmed:7"});
}

TEST_CASE("confidence is withdrawn when every cited id is unknown") {
    SubQuery sq = make_sq("q-1-s1", "question");
    auto bundle = doc_bundle("q-1-s1", {make_doc("7", "Title", "Body.")});
    FixedReplyModel lm("ANSWER: Sounds plausible.\nEVIDENCE: doc:pubmed:404\nCONFIDENT: yes\n");
    auto ans = extract_sub_answer(sq, bundle, library().get(TemplateName::sub_answer), lm);

    CHECK_FALSE(ans.confident);
    CHECK(ans.evidence.empty());
    CHECK(ans.text == "Sounds plausible.");
}

TEST_CASE("a single answer produces no links and no provider call") {
    ExtractiveLanguageModel lm;
    auto links = link_sub_answers({make_answer("s1", "text", {})},
                                  library().get(TemplateName::links), lm);
    CHECK(links.empty());
    CHECK(lm.calls() == 0);
}

TEST_CASE("adjacent answers are linked by the extractive model") {
    ExtractiveLanguageModel lm;
    std::vector<SubAnswer> answers = {make_answer("s1", "first", {}),
                                      make_answer("s2", "second", {}),
                                      make_answer("s3", "third", {})};
    auto links = link_sub_answers(answers, library().get(TemplateName::links), lm);

    REQUIRE(links.size() == 2);
    CHECK(links[0] == AnswerLink{"ans:s1", "ans:s2", "builds on"});
    CHECK(links[1] == AnswerLink{"ans:s2", "ans:s3", "builds on"});
}

TEST_CASE("invalid link proposals are dropped") {
    FixedReplyModel lm("LINKS:\n"
                       "1 -> 1 | self\n"
                       "1 -> 9 | out of range\n"
                       "garbage line\n"
                       "2 -> 1 | supports\n"
                       "2 -> 1 | duplicate\n");
    std::vector<SubAnswer> answers = {make_answer("s1", "a", {}), make_answer("s2", "b", {})};
    auto links = link_sub_answers(answers, library().get(TemplateName::links), lm);

    REQUIRE(links.size() == 1);
    CHECK(links[0] == AnswerLink{"ans:s2", "ans:s1", "supports"});
}

TEST_CASE("link extraction degrades to an empty list on outage") {
    AlwaysFailModel lm;
    std::vector<SubAnswer> answers = {make_answer("s1", "a", {}), make_answer("s2", "b", {})};
    auto links = link_sub_answers(answers, library().get(TemplateName::links), lm);
    CHECK(links.empty());
    CHECK(lm.calls == 3);
}

namespace {

struct ReportFixture {
    UserQuery q{"q-1", "how does cortisol shape immunity", 0};
    std::vector<Document> docs = {
        make_doc("100", "Cortisol and lymphocytes", "Cortisol suppresses lymphocytes."),
        make_doc("101", "Rhythms of cortisol", "Cortisol follows a circadian rhythm."),
        make_doc("102", "Cytokine control", "Cytokine release responds to cortisol.")};
    std::vector<RetrievalBundle> bundles;
    std::vector<SubAnswer> answers;
    FixedClock clock{1'755'302'400};

    ReportFixture() {
        bundles.push_back(doc_bundle("s1", {docs[0], docs[1]}));
        bundles.push_back(doc_bundle("s2", {docs[2]}));
        answers.push_back(make_answer("s1", "Cortisol suppresses lymphocytes.",
                                      {"doc:pubmed:100", "doc:pubmed:101"}));
        answers.push_back(make_answer("s2", "Cytokine release responds to cortisol.",
                                      {"doc:pubmed:102", "doc:pubmed:100"}));
    }
};

} // namespace

TEST_CASE("report assembly fills every section and resolves references once") {
    ReportFixture f;
    ExtractiveLanguageModel lm;
    auto report = generate_report(f.q, f.answers, {}, f.bundles,
                                  library().get(TemplateName::report), lm, f.clock);

    CHECK(report.query == "q-1");
    CHECK(report.generated_at == 1'755'302'400);
    REQUIRE_FALSE(report.background.empty());
    CHECK(report.background[0].find("how does cortisol shape immunity") != std::string::npos);
    CHECK_FALSE(report.findings.empty());
    CHECK(report.sub_answers == std::vector<std::string>{"ans:s1", "ans:s2"});

    // doc 100 is cited by both answers but referenced once, at first citation.
    REQUIRE(report.references.size() == 3);
    CHECK(report.references[0].evidence_id == "doc:pubmed:100");
    CHECK(report.references[1].evidence_id == "doc:pubmed:101");
    CHECK(report.references[2].evidence_id == "doc:pubmed:102");
    CHECK(report.references[0].source == "pubmed");
    CHECK(report.references[0].locator == "https://pubmed.example/100");
}

TEST_CASE("provider outage falls back to verbatim sub-answer findings") {
    ReportFixture f;
    AlwaysFailModel lm;
    auto report = generate_report(f.q, f.answers, {}, f.bundles,
                                  library().get(TemplateName::report), lm, f.clock);

    REQUIRE(report.findings.size() == 2);
    CHECK(report.findings[0] == f.answers[0].text);
    CHECK(report.findings[1] == f.answers[1].text);
    REQUIRE_FALSE(report.background.empty());
    CHECK(report.references.size() == 3); // citations survive degradation
    CHECK(report.sub_answers.size() == 2);
}

TEST_CASE("an all-unconfident run still renders explicit sections") {
    ReportFixture f;
    for (auto& ans : f.answers) {
        ans.text = kInsufficientEvidenceMarker;
        ans.evidence.clear();
        ans.confident = false;
    }
    ExtractiveLanguageModel lm;
    auto report = generate_report(f.q, f.answers, {}, f.bundles,
                                  library().get(TemplateName::report), lm, f.clock);

    CHECK_FALSE(report.background.empty());
    CHECK_FALSE(report.findings.empty());
    CHECK(report.references.empty());
    std::string md = render_markdown(report, f.answers);
    CHECK(md.find(kInsufficientEvidenceMarker) != std::string::npos);
    CHECK(md.find("No evidence items were cited.") != std::string::npos);
}

TEST_CASE("two answers for one sub-query are rejected") {
    ReportFixture f;
    f.answers.push_back(f.answers[0]);
    ExtractiveLanguageModel lm;
    CHECK_THROWS_WITH_AS(generate_report(f.q, f.answers, {}, f.bundles,
                                         library().get(TemplateName::report), lm, f.clock),
                         doctest::Contains("two answers"), Error);
}

TEST_CASE("markdown keeps the fixed heading order") {
    ReportFixture f;
    ExtractiveLanguageModel lm;
    auto links = link_sub_answers(f.answers, library().get(TemplateName::links), lm);
    auto report = generate_report(f.q, f.answers, links, f.bundles,
                                  library().get(TemplateName::report), lm, f.clock);
    std::string md = render_markdown(report, f.answers);

    auto h1 = md.find("# Research Report");
    auto bg = md.find("## Background");
    auto kf = md.find("## Key Findings");
    auto sa = md.find("## Sub-Answers");
    auto s1 = md.find("### s1");
    auto s2 = md.find("### s2");
    auto refs = md.find("## References");
    REQUIRE(h1 != std::string::npos);
    CHECK(h1 < bg);
    CHECK(bg < kf);
    CHECK(kf < sa);
    CHECK(sa < s1);
    CHECK(s1 < s2);
    CHECK(s2 < refs);
    CHECK(md.find("- doc:pubmed:100 (pubmed) Cortisol and lymphocytes — "
                  "https://pubmed.example/100") != std::string::npos);
}

TEST_CASE("paragraph splitting strips headers and records owning sections") {
    std::string md = "# Research Report\n\n## Background\n\nFirst paragraph.\n\n"
                     "Second paragraph\nspanning two lines.\n\n## Empty Section\n\n"
                     "## Key Findings\n\nThird paragraph.\n";
    auto paragraphs = split_paragraphs(md);

    REQUIRE(paragraphs.size() == 3);
    CHECK(paragraphs[0].index == 0);
    CHECK(paragraphs[0].section == "Background");
    CHECK(paragraphs[0].text == "First paragraph.");
    CHECK(paragraphs[1].text == "Second paragraph\nspanning two lines.");
    CHECK(paragraphs[2].section == "Key Findings");
    for (const auto& p : paragraphs) {
        CHECK(p.text.find('#') == std::string::npos);
        CHECK(md.find(p.text) != std::string::npos);
    }

    auto again = split_paragraphs(md);
    CHECK(again == paragraphs);
}

TEST_CASE("rendered reports split into orderly cited paragraphs") {
    ReportFixture f;
    ExtractiveLanguageModel lm;
    auto report = generate_report(f.q, f.answers, {}, f.bundles,
                                  library().get(TemplateName::report), lm, f.clock);
    auto paragraphs = split_paragraphs(render_markdown(report, f.answers));

    REQUIRE_FALSE(paragraphs.empty());
    // Order of appearance in the markdown is preserved by the indices.
    for (size_t i = 0; i < paragraphs.size(); ++i)
        CHECK(paragraphs[i].index == static_cast<int>(i));
    bool has_sub_answer_paragraph = false;
    for (const auto& p : paragraphs)
        if (p.section == "s1" && p.text == "Cortisol suppresses lymphocytes.")
            has_sub_answer_paragraph = true;
    CHECK(has_sub_answer_paragraph);
}

TEST_CASE("report files share a basename and rewrite byte-identically") {
    ReportFixture f;
    ExtractiveLanguageModel lm;
    auto links = link_sub_answers(f.answers, library().get(TemplateName::links), lm);
    auto report = generate_report(f.q, f.answers, links, f.bundles,
                                  library().get(TemplateName::report), lm, f.clock);

    auto dir = bms::test::scratch_dir("report-files");
    auto pair = write_report_files(dir, "report", report, f.answers, links);
    CHECK(pair.markdown.filename() == "report.md");
    CHECK(pair.sidecar.filename() == "report.json");

    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    std::string md1 = slurp(pair.markdown);
    std::string js1 = slurp(pair.sidecar);
    CHECK_FALSE(md1.empty());

    auto parsed = nlohmann::json::parse(js1);
    Report round = parsed.at("report").get<Report>();
    CHECK(round == report);
    auto parsed_links = parsed.at("links").get<std::vector<AnswerLink>>();
    CHECK(parsed_links == links);

    write_report_files(dir, "report", report, f.answers, links);
    CHECK(slurp(pair.markdown) == md1);
    CHECK(slurp(pair.sidecar) == js1);
}
