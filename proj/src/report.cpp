#include "organct/report.hpp"

#include "organct/util.hpp"

namespace organct {

std::string to_string(Polarity p) { return p == Polarity::Positive ? "pos" : "neg"; }

std::string to_string(TargetRange r) {
    switch (r) {
        case TargetRange::Head: return "Head";
        case TargetRange::Neck: return "Neck";
        case TargetRange::ChestLung: return "Chest (Lung)";
        case TargetRange::ChestNonLung: return "Chest (Non-lung)";
        case TargetRange::Abdomen: return "Abdomen";
        case TargetRange::Pelvis: return "Pelvis";
        case TargetRange::Other: return "Other";
    }
    return "Other";
}

std::string to_string(TargetPhase p) {
    switch (p) {
        case TargetPhase::NonContrast: return "Non-contrast";
        case TargetPhase::EarlyArterial: return "Early arterial phase";
        case TargetPhase::LateArterial: return "Late arterial phase";
        case TargetPhase::PortalOrLater: return "Portal phase or later";
        case TargetPhase::NotSpecified: return "Not specified";
    }
    return "Not specified";
}

TargetRange parse_range(const std::string& s, bool* coerced) {
    if (coerced) *coerced = false;
    const std::string t = trim(s);
    for (auto r : {TargetRange::Head, TargetRange::Neck, TargetRange::ChestLung,
                   TargetRange::ChestNonLung, TargetRange::Abdomen, TargetRange::Pelvis,
                   TargetRange::Other})
        if (t == to_string(r)) return r;
    if (coerced) *coerced = true;
    return TargetRange::Other;
}

TargetPhase parse_phase(const std::string& s, bool* coerced) {
    if (coerced) *coerced = false;
    const std::string t = trim(s);
    for (auto p : {TargetPhase::NonContrast, TargetPhase::EarlyArterial,
                   TargetPhase::LateArterial, TargetPhase::PortalOrLater,
                   TargetPhase::NotSpecified})
        if (t == to_string(p)) return p;
    if (coerced) *coerced = true;
    return TargetPhase::NotSpecified;
}

ReportLexicons ReportLexicons::load(const std::filesystem::path& assets) {
    ReportLexicons lex;
    lex.filter_patterns = read_data_lines(assets / "filter_patterns.txt");
    lex.negation_patterns = read_data_lines(assets / "negation_patterns.txt");
    return lex;
}

namespace {

bool alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// word-boundary substring match: the match may not extend a word of the
// sentence on either side ("no" must not fire inside "nodule" or "noted")
bool matches_pattern(const std::string& sentence_lower, const std::string& pattern) {
    const bool anchored = !pattern.empty() && pattern[0] == '^';
    const std::string pat = to_lower(anchored ? pattern.substr(1) : pattern);
    if (pat.empty()) return false;
    for (auto pos = sentence_lower.find(pat); pos != std::string::npos;
         pos = sentence_lower.find(pat, pos + 1)) {
        if (anchored && pos != 0) return false;
        const bool left_ok =
            pos == 0 || !alnum(sentence_lower[pos - 1]) || !alnum(pat.front());
        const auto end = pos + pat.size();
        const bool right_ok =
            end == sentence_lower.size() || !alnum(sentence_lower[end]) || !alnum(pat.back());
        if (left_ok && right_ok) return true;
    }
    return false;
}

}  // namespace

std::vector<Finding> split_report(const std::string& report_text,
                                  const ReportLexicons& lex) {
    std::vector<std::string> sentences;
    std::string current;
    for (char c : report_text) {
        current.push_back(c);
        if (c == '.' || c == '!' || c == '?' || c == '\n') {
            std::string s = trim(current);
            if (!s.empty()) sentences.push_back(std::move(s));
            current.clear();
        }
    }
    if (!trim(current).empty()) sentences.push_back(trim(current));

    std::vector<Finding> findings;
    for (auto& sentence : sentences) {
        const std::string lower = to_lower(sentence);
        bool filtered = false;
        for (auto& p : lex.filter_patterns)
            if (matches_pattern(lower, p)) {
                filtered = true;
                break;
            }
        if (filtered) continue;
        Finding f;
        f.text = sentence;
        f.polarity = Polarity::Positive;
        for (auto& p : lex.negation_patterns)
            if (matches_pattern(lower, p)) {
                f.polarity = Polarity::Negative;
                break;
            }
        findings.push_back(std::move(f));
    }
    return findings;
}

}  // namespace organct
