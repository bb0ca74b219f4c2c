#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace organct {

enum class Polarity { Positive, Negative };

enum class TargetRange { Head, Neck, ChestLung, ChestNonLung, Abdomen, Pelvis, Other };
enum class TargetPhase { NonContrast, EarlyArterial, LateArterial, PortalOrLater, NotSpecified };

std::string to_string(Polarity p);
std::string to_string(TargetRange r);
std::string to_string(TargetPhase p);
// Parses the wire-format strings ("Chest (Lung)", "Portal phase or later", ...).
// Unknown values coerce to Other / NotSpecified; `coerced` is set when that happens.
TargetRange parse_range(const std::string& s, bool* coerced = nullptr);
TargetPhase parse_phase(const std::string& s, bool* coerced = nullptr);

struct Finding {
    std::string text;
    Polarity polarity = Polarity::Positive;
    TargetRange target_range = TargetRange::Other;
    TargetPhase target_phase = TargetPhase::NotSpecified;
    std::vector<std::string> organs;  // labels, or {"unknown"}
};

// Rule lexicons for sentence filtering and negation detection, loaded from the
// assets directory.
struct ReportLexicons {
    std::vector<std::string> filter_patterns;
    std::vector<std::string> negation_patterns;
    static ReportLexicons load(const std::filesystem::path& assets);
};

// Splits a report into findings (text + polarity only). Sentences split on
// terminal punctuation and line breaks; non-diagnostic sentences dropped;
// polarity from the negation lexicon, scoped per sentence.
std::vector<Finding> split_report(const std::string& report_text, const ReportLexicons& lex);

}  // namespace organct
