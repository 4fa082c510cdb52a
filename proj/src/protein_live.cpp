#include "bms/providers_live.hpp"

#include <nlohmann/json.hpp>

#include "bms/error.hpp"
#include "bms/text.hpp"

namespace bms {

namespace {

nlohmann::json parse_json(const std::string& body, const std::string& what) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) raise(ErrorKind::parse, what + ": response is not JSON");
    return j;
}

} // namespace

HttpProteinClient::HttpProteinClient(std::shared_ptr<HttpTransport> transport)
    : HttpProteinClient(std::move(transport), Options()) {}

HttpProteinClient::HttpProteinClient(std::shared_ptr<HttpTransport> transport, Options options)
    : transport_(std::move(transport)), options_(std::move(options)) {
    if (!transport_) raise(ErrorKind::precondition, "protein client needs a transport");
    if (options_.requests_per_second > 0)
        limiter_ = std::make_unique<RateLimiter>(options_.requests_per_second, options_.sleeper);
}

HttpResponse HttpProteinClient::get(const std::string& url) {
    if (limiter_) limiter_->acquire();
    HttpRequest req;
    req.url = url;
    return fetch_with_retries(*transport_, req, options_.retry, options_.sleeper);
}

std::string HttpProteinClient::do_lookup(const std::string& gene,
                                         const std::optional<std::string>& organism) {
    std::string q = "gene:" + gene;
    if (organism && !trim(*organism).empty())
        q += " AND organism_name:\"" + *organism + "\"";
    std::string url = "https://rest.uniprot.org/uniprotkb/search?query=" + url_encode(q) +
                      "&format=json&size=1&fields=accession";
    auto res = get(url);
    if (res.status != 200)
        raise(ErrorKind::provider,
              "uniprot search returned status " + std::to_string(res.status));
    auto j = parse_json(res.body, "uniprot search");
    try {
        const auto& results = j.at("results");
        if (results.empty())
            raise(ErrorKind::not_found,
                  "no uniprot entry for gene " + gene +
                      (organism ? " in " + *organism : std::string()));
        return results.at(0).at("primaryAccession").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::parse, std::string("uniprot search: ") + e.what());
    }
}

ProteinRecord HttpProteinClient::do_fetch_entry(const std::string& accession) {
    std::string url = "https://rest.uniprot.org/uniprotkb/" + url_encode(accession) + ".json";
    auto res = get(url);
    if (res.status == 404)
        raise(ErrorKind::not_found, "uniprot entry " + accession + " not found");
    if (res.status != 200)
        raise(ErrorKind::provider,
              "uniprot entry returned status " + std::to_string(res.status));
    auto j = parse_json(res.body, "uniprot entry");

    ProteinRecord rec;
    try {
        rec.uniprot_id = j.value("primaryAccession", accession);
        if (j.contains("genes") && !j.at("genes").empty()) {
            const auto& gene = j.at("genes").at(0);
            if (gene.contains("geneName")) rec.gene = gene.at("geneName").value("value", "");
        }
        if (j.contains("organism")) {
            std::string name = j.at("organism").value("scientificName", "");
            if (!name.empty()) rec.organism = name;
        }
        std::vector<std::string> function_parts;
        for (const auto& comment : j.value("comments", nlohmann::json::array())) {
            const std::string type = comment.value("commentType", "");
            if (type == "FUNCTION") {
                for (const auto& text : comment.value("texts", nlohmann::json::array())) {
                    std::string value = collapse_whitespace(text.value("value", ""));
                    if (!value.empty()) function_parts.push_back(std::move(value));
                }
            } else if (type == "INTERACTION") {
                for (const auto& inter :
                     comment.value("interactions", nlohmann::json::array())) {
                    if (!inter.contains("interactantTwo")) continue;
                    const auto& partner = inter.at("interactantTwo");
                    std::string name = partner.value("geneName", "");
                    if (name.empty()) name = partner.value("uniProtKBAccession", "");
                    if (!name.empty()) rec.interactions.push_back(std::move(name));
                }
            }
        }
        rec.function_text = join(function_parts, " ");
        if (j.contains("sequence")) rec.sequence = j.at("sequence").value("value", "");
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::parse, std::string("uniprot entry: ") + e.what());
    }
    if (!rec.sequence.empty() && !is_valid_protein_sequence(rec.sequence))
        raise(ErrorKind::parse, "uniprot entry " + accession + ": malformed residue sequence");
    return rec;
}

StructureFile HttpProteinClient::do_fetch_structure(const std::string& accession) {
    std::string url =
        "https://alphafold.ebi.ac.uk/files/AF-" + url_encode(accession) + "-F1-model_v4.pdb";
    auto res = get(url);
    if (res.status == 404)
        raise(ErrorKind::not_found, "no alphafold model for " + accession);
    if (res.status != 200)
        raise(ErrorKind::provider,
              "alphafold returned status " + std::to_string(res.status));
    StructureFile sf;
    sf.uniprot_id = accession;
    sf.format = "PDB";
    sf.payload = res.body;
    sf.fetched_from = url;
    return sf;
}

} // namespace bms
