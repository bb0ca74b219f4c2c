#include "organct/llm.hpp"

#include <cstdlib>
#include <iostream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "organct/util.hpp"

namespace organct {

using json = nlohmann::json;

PromptTemplates PromptTemplates::load(const std::filesystem::path& assets) {
    PromptTemplates t;
    t.series_system = read_text_file(assets / "prompt_series.txt");
    t.organ_system = read_text_file(assets / "prompt_organ.txt");
    return t;
}

std::string PromptTemplates::organ_user_prompt(const std::string& finding_text,
                                               const std::vector<std::string>& labels) {
    std::string joined;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i) joined += ", ";
        joined += "\"" + labels[i] + "\"";
    }
    return "Finding sentence: " + finding_text + "\n\nAvailable organ labels: [" + joined +
           "]";
}

MockLlmClient::MockLlmClient(const std::filesystem::path& assets) {
    for (auto& line : read_data_lines(assets / "mock_llm_ranges.tsv")) {
        auto t1 = line.find('\t');
        if (t1 == std::string::npos) continue;
        RangeRule r;
        r.keyword = line.substr(0, t1);
        auto t2 = line.find('\t', t1 + 1);
        if (t2 == std::string::npos) {
            r.range = line.substr(t1 + 1);
            r.phase = "Not specified";
        } else {
            r.range = line.substr(t1 + 1, t2 - t1 - 1);
            r.phase = line.substr(t2 + 1);
        }
        range_rules_.push_back(std::move(r));
    }
}

namespace {

// Pulls the ["a", "b", ...] label list out of the organ-extractor user prompt.
std::vector<std::string> parse_prompt_labels(const std::string& user_prompt) {
    std::vector<std::string> labels;
    auto pos = user_prompt.find("Available organ labels:");
    if (pos == std::string::npos) return labels;
    auto lb = user_prompt.find('[', pos);
    auto rb = user_prompt.find(']', pos);
    if (lb == std::string::npos || rb == std::string::npos) return labels;
    std::string inner = user_prompt.substr(lb + 1, rb - lb - 1);
    std::string cur;
    bool in_quote = false;
    for (char c : inner) {
        if (c == '"') {
            if (in_quote && !cur.empty()) labels.push_back(cur);
            cur.clear();
            in_quote = !in_quote;
        } else if (in_quote) {
            cur.push_back(c);
        }
    }
    return labels;
}

std::string finding_from_organ_prompt(const std::string& user_prompt) {
    auto pos = user_prompt.find("Finding sentence:");
    if (pos == std::string::npos) return user_prompt;
    auto end = user_prompt.find("\n\nAvailable organ labels:", pos);
    std::string text = user_prompt.substr(pos + 17, end == std::string::npos
                                                       ? std::string::npos
                                                       : end - pos - 17);
    return trim(text);
}

bool is_lung_label(const std::string& l) { return l.rfind("lung_", 0) == 0; }

}  // namespace

std::string MockLlmClient::query(const std::string& system_prompt,
                                 const std::string& user_prompt) {
    if (system_prompt.find("organ labels") != std::string::npos) {
        const std::vector<std::string> labels = parse_prompt_labels(user_prompt);
        const std::string text = to_lower(finding_from_organ_prompt(user_prompt));
        std::vector<std::string> hits;
        auto add = [&](const std::string& label) {
            for (auto& h : hits)
                if (h == label) return;
            hits.push_back(label);
        };
        // bilateral / group mentions first
        if (text.find("lung") != std::string::npos ||
            text.find("pulmonary") != std::string::npos)
            for (auto& l : labels)
                if (is_lung_label(l)) add(l);
        if (text.find("cardiac") != std::string::npos ||
            text.find("heart") != std::string::npos)
            for (auto& l : labels)
                if (l == "heart") add(l);
        if ((text.find("kidney") != std::string::npos ||
             text.find("renal") != std::string::npos) &&
            text.find("left") == std::string::npos &&
            text.find("right") == std::string::npos)
            for (auto& l : labels)
                if (l == "kidney_left" || l == "kidney_right") add(l);
        // display-name scan ("left kidney", "liver", ...)
        for (auto& l : labels) {
            const std::string disp = to_lower(OrganVocabulary::display_name(l));
            if (text.find(disp) != std::string::npos) add(l);
        }
        json out = json::array();
        if (hits.empty())
            out.push_back("unknown");
        else
            for (auto& h : hits) out.push_back(h);
        return out.dump();
    }

    // imaging range / contrast phase classification
    const std::string text = to_lower(user_prompt);
    std::string range = "Other", phase = "Not specified";
    for (auto& rule : range_rules_)
        if (text.find(to_lower(rule.keyword)) != std::string::npos) {
            range = rule.range;
            phase = rule.phase;
            break;
        }
    if (text.find("portal phase") != std::string::npos)
        phase = "Portal phase or later";
    else if (text.find("early arterial") != std::string::npos)
        phase = "Early arterial phase";
    else if (text.find("arterial phase") != std::string::npos)
        phase = "Late arterial phase";
    else if (text.find("non-contrast") != std::string::npos)
        phase = "Non-contrast";
    json out;
    out["range"] = range;
    out["phase"] = phase;
    return out.dump();
}

HttpLlmClient::HttpLlmClient(std::string endpoint, std::string model)
    : endpoint_(std::move(endpoint)), model_(std::move(model)) {
    if (endpoint_.empty())
        if (const char* e = std::getenv("LLM_ENDPOINT")) endpoint_ = e;
    if (model_.empty())
        if (const char* m = std::getenv("LLM_MODEL")) model_ = m;
    if (endpoint_.empty())
        throw DataError("remote LLM client requires LLM_ENDPOINT");
}

std::string HttpLlmClient::query(const std::string& system_prompt,
                                 const std::string& user_prompt) {
    httplib::Client cli(endpoint_);
    json body;
    body["model"] = model_;
    body["system"] = system_prompt;
    body["prompt"] = user_prompt;
    body["temperature"] = 0.8;
    body["num_ctx"] = 8192;
    auto res = cli.Post("/api/generate", body.dump(), "application/json");
    if (!res || res->status != 200)
        throw LlmTransportError("LLM request failed: " +
                                (res ? std::to_string(res->status) : "no response"));
    try {
        return json::parse(res->body).at("response").get<std::string>();
    } catch (const json::exception& e) {
        throw LlmTransportError(std::string("bad LLM response envelope: ") + e.what());
    }
}

std::optional<std::pair<TargetRange, TargetPhase>> classify_optimal_series(
    const Finding& finding, LlmClient& client, const PromptTemplates& prompts,
    std::string* reason) {
    for (int attempt = 0; attempt < 3; ++attempt) {
        std::string reply;
        try {
            reply = client.query(prompts.series_system, finding.text);
        } catch (const LlmTransportError& e) {
            if (reason) *reason = e.what();
            continue;
        }
        try {
            json j = json::parse(reply);
            bool coerced_r = false, coerced_p = false;
            TargetRange r = parse_range(j.at("range").get<std::string>(), &coerced_r);
            TargetPhase p = parse_phase(j.at("phase").get<std::string>(), &coerced_p);
            if (coerced_r || coerced_p)
                std::cerr << "warning: out-of-set range/phase coerced for finding: "
                          << finding.text << "\n";
            return std::make_pair(r, p);
        } catch (const json::exception& e) {
            if (reason) *reason = std::string("unparseable reply: ") + e.what();
        }
    }
    return std::nullopt;
}

std::vector<std::string> extract_organs(const Finding& finding,
                                        const std::vector<std::string>& available_labels,
                                        LlmClient& client, const PromptTemplates& prompts,
                                        std::string* reason) {
    const std::string user = PromptTemplates::organ_user_prompt(finding.text,
                                                                available_labels);
    for (int attempt = 0; attempt < 3; ++attempt) {
        std::string reply;
        try {
            reply = client.query(prompts.organ_system, user);
        } catch (const LlmTransportError& e) {
            if (reason) *reason = e.what();
            continue;
        }
        try {
            json j = json::parse(reply);
            std::vector<std::string> organs;
            for (auto& item : j) {
                const std::string label = item.get<std::string>();
                if (label == "unknown") return {};
                for (auto& avail : available_labels)
                    if (avail == label) {
                        organs.push_back(label);
                        break;
                    }
            }
            return organs;
        } catch (const json::exception& e) {
            if (reason) *reason = std::string("unparseable reply: ") + e.what();
        }
    }
    return {};
}

}  // namespace organct
