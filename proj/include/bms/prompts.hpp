#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace bms {

// One template per generation stage, loaded from <dir>/<name>.txt.
enum class TemplateName {
    decompose,
    keywords,
    graph,
    sub_answer,
    links,
    report,
    mcq_generate,
    mcq_answer,
    topic,
};

const char* to_string(TemplateName n);
TemplateName template_name_from_string(const std::string& s);

struct PromptTemplate {
    TemplateName name = TemplateName::decompose;
    std::string body; // placeholders written as {{name}}
};

// Placeholders the pipeline stage substitutes; all must exist in the body.
const std::map<TemplateName, std::vector<std::string>>& required_placeholders();

class PromptLibrary {
public:
    static PromptLibrary load_dir(const std::filesystem::path& dir);

    const PromptTemplate& get(TemplateName name) const;

private:
    std::map<TemplateName, PromptTemplate> templates_;
};

// Replaces every {{key}} with vars.at(key). Placeholders without a provided
// value are left verbatim.
std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& vars);

} // namespace bms
