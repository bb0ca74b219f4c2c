#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "organct/llm.hpp"
#include "organct/region_model.hpp"
#include "organct/report.hpp"
#include "organct/series.hpp"
#include "organct/vocab.hpp"

namespace organct {

enum class PairSource { Report, NegativeTemplate };

struct VolumeTextPair {
    std::string case_id;
    std::string series_id;
    std::string organ;
    std::string text;
    Polarity polarity = Polarity::Positive;
    PairSource source = PairSource::Report;
    std::string split;  // train | valid | test
    TargetRange target_range = TargetRange::Other;
    TargetPhase target_phase = TargetPhase::NotSpecified;
};

std::string manifest_line(const VolumeTextPair& p);
VolumeTextPair parse_manifest_line(const std::string& line);
std::vector<VolumeTextPair> read_manifest(const std::filesystem::path& path);

// meta.json per series: series_number, phase (optional), kernel, window_width,
// region (ground truth, informational only — the pipeline classifies regions
// from the mask).
SeriesMeta read_series_meta(const std::filesystem::path& meta_json,
                            const std::string& series_id);

// For each organ present but unmentioned, emit one negative-template pair with
// probability `ratio`; template chosen uniformly. Deterministic under seed.
std::vector<VolumeTextPair> augment_negatives(
    const std::string& case_id, const std::string& series_id,
    const std::vector<std::string>& present_organs,
    const std::set<std::string>& mentioned_organs,
    const std::vector<std::string>& templates, double ratio, std::uint64_t seed);

struct BuildPairsConfig {
    std::filesystem::path corpus_root;
    std::filesystem::path assets;
    double augment_ratio = 0.5;
    bool augment = true;
    std::uint64_t seed = 0;
    // Split assignment: explicit patient lists when non-empty, otherwise a
    // seeded shuffle at these ratios.
    double train_fraction = 0.7;
    double valid_fraction = 0.15;
    std::map<std::string, std::vector<std::string>> split_patients;  // split -> patients
};

struct BuildPairsStats {
    // split -> {report pairs, negative-template pairs}
    std::map<std::string, std::pair<int, int>> counts;
    int cases_processed = 0;
    int cases_skipped = 0;
    int findings_dropped = 0;
    std::string to_json() const;
};

struct BuildPairsResult {
    std::vector<VolumeTextPair> pairs;
    BuildPairsStats stats;
};

// Runs the five pipeline steps plus augmentation over the corpus and enforces
// patient-disjoint splits. Per-case failures are logged and skipped.
BuildPairsResult build_pairs(const BuildPairsConfig& config, LlmClient& client);

void write_manifest(const std::filesystem::path& path,
                    const std::vector<VolumeTextPair>& pairs);

// Throws DataError naming the offending patient when a patient id appears in
// more than one split.
void validate_patient_disjoint(const std::vector<VolumeTextPair>& pairs,
                               const std::map<std::string, std::string>& case_to_patient);

// patients.json at the corpus root (case_id -> patient_id); cases absent from
// the file are their own patient.
std::map<std::string, std::string> read_patient_map(const std::filesystem::path& corpus_root);

}  // namespace organct
