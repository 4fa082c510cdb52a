#include "bms/prompts.hpp"

#include <fstream>
#include <sstream>

#include "bms/error.hpp"

namespace bms {

namespace {

const std::map<TemplateName, std::string>& name_table() {
    static const std::map<TemplateName, std::string> table = {
        {TemplateName::decompose, "decompose"},
        {TemplateName::keywords, "keywords"},
        {TemplateName::graph, "graph"},
        {TemplateName::sub_answer, "sub_answer"},
        {TemplateName::links, "links"},
        {TemplateName::report, "report"},
        {TemplateName::mcq_generate, "mcq_generate"},
        {TemplateName::mcq_answer, "mcq_answer"},
        {TemplateName::topic, "topic"},
    };
    return table;
}

} // namespace

const char* to_string(TemplateName n) {
    return name_table().at(n).c_str();
}

TemplateName template_name_from_string(const std::string& s) {
    for (const auto& [name, text] : name_table()) {
        if (text == s) return name;
    }
    raise(ErrorKind::config, "unknown template name '" + s + "'");
}

const std::map<TemplateName, std::vector<std::string>>& required_placeholders() {
    static const std::map<TemplateName, std::vector<std::string>> table = {
        {TemplateName::decompose, {"dimensions", "query", "max_subqueries"}},
        {TemplateName::keywords, {"dimensions", "subquery", "max_keywords"}},
        {TemplateName::graph, {"nodes"}},
        {TemplateName::sub_answer, {"subquery", "evidence"}},
        {TemplateName::links, {"answers"}},
        {TemplateName::report, {"query", "sub_answers", "links"}},
        {TemplateName::mcq_generate,
         {"level", "level_name", "paragraphs", "index", "attempt"}},
        {TemplateName::mcq_answer,
         {"context", "stem", "option_a", "option_b", "option_c", "option_d"}},
        {TemplateName::topic, {"seed"}},
    };
    return table;
}

PromptLibrary PromptLibrary::load_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        raise(ErrorKind::config, "prompt directory not found: " + dir.string());
    PromptLibrary lib;
    for (const auto& [name, text] : name_table()) {
        auto path = dir / (text + ".txt");
        std::ifstream in(path);
        if (!in)
            raise(ErrorKind::config, "missing prompt template: " + path.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        PromptTemplate tmpl{name, buf.str()};
        for (const auto& ph : required_placeholders().at(name)) {
            if (tmpl.body.find("{{" + ph + "}}") == std::string::npos)
                raise(ErrorKind::config, "template '" + text +
                                             "' lacks placeholder {{" + ph + "}}");
        }
        lib.templates_.emplace(name, std::move(tmpl));
    }
    return lib;
}

const PromptTemplate& PromptLibrary::get(TemplateName name) const {
    auto it = templates_.find(name);
    if (it == templates_.end())
        raise(ErrorKind::config,
              std::string("template not loaded: ") + to_string(name));
    return it->second;
}

std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& vars) {
    std::string out = tmpl.body;
    for (const auto& [key, value] : vars) {
        const std::string token = "{{" + key + "}}";
        std::size_t pos = 0;
        while ((pos = out.find(token, pos)) != std::string::npos) {
            out.replace(pos, token.size(), value);
            pos += value.size();
        }
    }
    return out;
}

} // namespace bms
