#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "organct/report.hpp"
#include "organct/vocab.hpp"

namespace organct {

struct LlmTransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// query(system, user) -> raw model text. Implementations: remote HTTP client
// and a deterministic lexicon mock (the default everywhere in CI).
class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string query(const std::string& system_prompt,
                              const std::string& user_prompt) = 0;
};

struct PromptTemplates {
    std::string series_system;  // imaging range / contrast phase classification
    std::string organ_system;   // organ label extraction
    static PromptTemplates load(const std::filesystem::path& assets);
    // Builds the organ-extractor user prompt with the finding and label list.
    static std::string organ_user_prompt(const std::string& finding_text,
                                         const std::vector<std::string>& labels);
};

// Pure function of its inputs: keyword lexicon over the shipped rule table plus
// organ-name scanning against the label list embedded in the user prompt.
class MockLlmClient : public LlmClient {
public:
    explicit MockLlmClient(const std::filesystem::path& assets);
    std::string query(const std::string& system_prompt,
                      const std::string& user_prompt) override;

private:
    struct RangeRule {
        std::string keyword;
        std::string range;
        std::string phase;
    };
    std::vector<RangeRule> range_rules_;
};

// POST {endpoint}/api/generate with {"model","system","prompt","temperature","num_ctx"};
// reads {"response": ...}. Endpoint/model from LLM_ENDPOINT / LLM_MODEL unless given.
class HttpLlmClient : public LlmClient {
public:
    HttpLlmClient(std::string endpoint = "", std::string model = "");
    std::string query(const std::string& system_prompt,
                      const std::string& user_prompt) override;

private:
    std::string endpoint_;
    std::string model_;
};

// Step 2: predicts (range, phase) for a finding. Transport failures retried up
// to 3 attempts; unparseable replies after 3 attempts -> nullopt (finding is
// dropped by the caller, with `reason` filled when provided).
std::optional<std::pair<TargetRange, TargetPhase>> classify_optimal_series(
    const Finding& finding, LlmClient& client, const PromptTemplates& prompts,
    std::string* reason = nullptr);

// Step 5: resolves organ labels for a finding. Labels outside available_labels
// are discarded; an empty result or ["unknown"] yields an empty vector.
std::vector<std::string> extract_organs(const Finding& finding,
                                        const std::vector<std::string>& available_labels,
                                        LlmClient& client, const PromptTemplates& prompts,
                                        std::string* reason = nullptr);

}  // namespace organct
