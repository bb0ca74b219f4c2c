#include "organct/pairs.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "organct/crops.hpp"
#include "organct/util.hpp"
#include "organct/vvol.hpp"

namespace organct {

using json = nlohmann::json;

namespace {

Polarity parse_polarity(const std::string& s) {
    if (s == "pos") return Polarity::Positive;
    if (s == "neg") return Polarity::Negative;
    throw DataError("bad polarity: " + s);
}

PairSource parse_source(const std::string& s) {
    if (s == "report") return PairSource::Report;
    if (s == "negative_template") return PairSource::NegativeTemplate;
    throw DataError("bad source: " + s);
}

}  // namespace

std::string manifest_line(const VolumeTextPair& p) {
    json j;
    j["case_id"] = p.case_id;
    j["series_id"] = p.series_id;
    j["organ"] = p.organ;
    j["text"] = p.text;
    j["polarity"] = to_string(p.polarity);
    j["source"] = p.source == PairSource::Report ? "report" : "negative_template";
    j["split"] = p.split;
    j["target_range"] = to_string(p.target_range);
    j["target_phase"] = to_string(p.target_phase);
    return j.dump();
}

VolumeTextPair parse_manifest_line(const std::string& line) {
    json j = json::parse(line);
    VolumeTextPair p;
    p.case_id = j.at("case_id").get<std::string>();
    p.series_id = j.at("series_id").get<std::string>();
    p.organ = j.at("organ").get<std::string>();
    p.text = j.at("text").get<std::string>();
    p.polarity = parse_polarity(j.at("polarity").get<std::string>());
    p.source = parse_source(j.at("source").get<std::string>());
    p.split = j.at("split").get<std::string>();
    p.target_range = parse_range(j.at("target_range").get<std::string>());
    p.target_phase = parse_phase(j.at("target_phase").get<std::string>());
    if (p.organ == "unknown") throw DataError("manifest pair with organ=unknown");
    return p;
}

std::vector<VolumeTextPair> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path.string());
    std::vector<VolumeTextPair> pairs;
    std::string line;
    while (std::getline(in, line))
        if (!trim(line).empty()) pairs.push_back(parse_manifest_line(line));
    return pairs;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<VolumeTextPair>& pairs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write manifest: " + path.string());
    for (auto& p : pairs) out << manifest_line(p) << "\n";
}

SeriesMeta read_series_meta(const std::filesystem::path& meta_json,
                            const std::string& series_id) {
    json j = json::parse(read_text_file(meta_json));
    SeriesMeta m;
    m.series_id = series_id;
    m.series_number = j.at("series_number").get<int>();
    if (j.contains("phase") && !j.at("phase").is_null())
        m.phase = classify_phase(parse_phase(j.at("phase").get<std::string>()));
    else
        m.phase = classify_phase(std::nullopt);
    m.kernel = parse_kernel(j.value("kernel", "Other"));
    m.window_width = j.value("window_width", 0.0);
    if (j.contains("region"))
        for (auto& r : j.at("region")) m.region.insert(r.get<std::string>());
    return m;
}

std::vector<VolumeTextPair> augment_negatives(
    const std::string& case_id, const std::string& series_id,
    const std::vector<std::string>& present_organs,
    const std::set<std::string>& mentioned_organs,
    const std::vector<std::string>& templates, double ratio, std::uint64_t seed) {
    if (templates.empty()) throw DataError("augment_negatives: no templates");
    for (auto& t : templates)
        if (t.find("{organ_name}") == std::string::npos)
            throw DataError("template missing {organ_name} placeholder: " + t);

    std::vector<VolumeTextPair> out;
    for (auto& organ : present_organs) {
        if (mentioned_organs.count(organ)) continue;
        // per-organ stream so the subset is independent of iteration order
        std::uint64_t state = seed ^ fnv1a64(case_id) ^ fnv1a64(organ);
        if (uniform01(state) >= ratio) continue;
        std::string text = templates[splitmix64(state) % templates.size()];
        const auto pos = text.find("{organ_name}");
        text.replace(pos, 12, OrganVocabulary::display_name(organ));
        VolumeTextPair p;
        p.case_id = case_id;
        p.series_id = series_id;
        p.organ = organ;
        p.text = text;
        p.polarity = Polarity::Negative;
        p.source = PairSource::NegativeTemplate;
        out.push_back(std::move(p));
    }
    return out;
}

std::map<std::string, std::string> read_patient_map(
    const std::filesystem::path& corpus_root) {
    std::map<std::string, std::string> m;
    const auto path = corpus_root / "patients.json";
    if (std::filesystem::exists(path)) {
        json j = json::parse(read_text_file(path));
        for (auto& [k, v] : j.items()) m[k] = v.get<std::string>();
    }
    return m;
}

void validate_patient_disjoint(const std::vector<VolumeTextPair>& pairs,
                               const std::map<std::string, std::string>& case_to_patient) {
    std::map<std::string, std::string> patient_split;
    for (auto& p : pairs) {
        auto it = case_to_patient.find(p.case_id);
        const std::string patient = it == case_to_patient.end() ? p.case_id : it->second;
        auto [pos, inserted] = patient_split.emplace(patient, p.split);
        if (!inserted && pos->second != p.split)
            throw DataError("patient " + patient + " appears in splits " + pos->second +
                            " and " + p.split);
    }
}

std::string BuildPairsStats::to_json() const {
    json j;
    for (auto& [split, c] : counts) {
        j["splits"][split]["report_pairs"] = c.first;
        j["splits"][split]["negative_template_pairs"] = c.second;
    }
    j["cases_processed"] = cases_processed;
    j["cases_skipped"] = cases_skipped;
    j["findings_dropped"] = findings_dropped;
    return j.dump(2);
}

namespace {

struct CaseDir {
    std::string case_id;
    std::filesystem::path path;
};

std::vector<CaseDir> list_cases(const std::filesystem::path& root) {
    std::vector<CaseDir> cases;
    for (auto& e : std::filesystem::directory_iterator(root))
        if (e.is_directory()) cases.push_back({e.path().filename().string(), e.path()});
    std::sort(cases.begin(), cases.end(),
              [](const CaseDir& a, const CaseDir& b) { return a.case_id < b.case_id; });
    return cases;
}

// Seeded shuffle of patients into train/valid/test at the configured ratios.
std::map<std::string, std::string> assign_splits(
    const BuildPairsConfig& cfg, const std::vector<CaseDir>& cases,
    const std::map<std::string, std::string>& case_to_patient) {
    std::map<std::string, std::string> patient_split;
    if (!cfg.split_patients.empty()) {
        for (auto& [split, patients] : cfg.split_patients)
            for (auto& p : patients) {
                auto [it, inserted] = patient_split.emplace(p, split);
                if (!inserted && it->second != split)
                    throw DataError("patient " + p + " listed in splits " + it->second +
                                    " and " + split);
            }
        return patient_split;
    }
    std::set<std::string> patient_set;
    for (auto& c : cases) {
        auto it = case_to_patient.find(c.case_id);
        patient_set.insert(it == case_to_patient.end() ? c.case_id : it->second);
    }
    std::vector<std::string> patients(patient_set.begin(), patient_set.end());
    std::uint64_t state = cfg.seed ^ 0x73706c6974ULL;
    for (std::size_t i = patients.size(); i > 1; --i)
        std::swap(patients[i - 1], patients[splitmix64(state) % i]);
    const std::size_t n_train = std::size_t(cfg.train_fraction * patients.size());
    const std::size_t n_valid = std::size_t(cfg.valid_fraction * patients.size());
    for (std::size_t i = 0; i < patients.size(); ++i)
        patient_split[patients[i]] =
            i < n_train ? "train" : (i < n_train + n_valid ? "valid" : "test");
    return patient_split;
}

}  // namespace

BuildPairsResult build_pairs(const BuildPairsConfig& config, LlmClient& client) {
    const auto assets = config.assets;
    const auto vocab = OrganVocabulary::load(assets);
    const auto lexicons = ReportLexicons::load(assets);
    const auto prompts = PromptTemplates::load(assets);
    const auto templates = read_data_lines(assets / "negative_templates.txt");
    const auto region_model = RegionModel::train_synthetic(vocab, config.seed);

    const auto cases = list_cases(config.corpus_root);
    const auto case_to_patient = read_patient_map(config.corpus_root);
    const auto patient_split = assign_splits(config, cases, case_to_patient);
    auto split_of = [&](const std::string& case_id) -> std::string {
        auto pit = case_to_patient.find(case_id);
        const std::string patient = pit == case_to_patient.end() ? case_id : pit->second;
        auto sit = patient_split.find(patient);
        if (sit == patient_split.end())
            throw DataError("no split assignment for patient " + patient);
        return sit->second;
    };

    BuildPairsResult result;
    for (auto& c : cases) {
        try {
            const std::string split = split_of(c.case_id);
            const std::string report = read_text_file(c.path / "report.txt");
            auto findings = split_report(report, lexicons);

            // load series metadata and masks; region comes from the classifier
            struct SeriesData {
                SeriesMeta meta;
                SegMask mask;
            };
            std::vector<SeriesData> series;
            const auto series_root = c.path / "series";
            std::vector<std::filesystem::path> sdirs;
            for (auto& e : std::filesystem::directory_iterator(series_root))
                if (e.is_directory()) sdirs.push_back(e.path());
            std::sort(sdirs.begin(), sdirs.end());
            for (auto& sdir : sdirs) {
                SeriesData sd{read_series_meta(sdir / "meta.json", sdir.filename().string()),
                              load_mask(sdir / "mask.vvol")};
                sd.meta.region =
                    region_model.classify(region_features(sd.mask, vocab));
                series.push_back(std::move(sd));
            }
            std::vector<SeriesMeta> metas;
            for (auto& s : series) metas.push_back(s.meta);

            std::vector<VolumeTextPair> case_pairs;
            std::map<std::string, std::set<std::string>> mentioned_by_series;
            std::string first_matched_series;
            for (auto& finding : findings) {
                std::string reason;
                auto target = classify_optimal_series(finding, client, prompts, &reason);
                if (!target) {
                    std::cerr << "dropping finding in " << c.case_id << ": " << reason
                              << "\n";
                    ++result.stats.findings_dropped;
                    continue;
                }
                finding.target_range = target->first;
                finding.target_phase = target->second;
                auto sid = match_series(finding.target_range, finding.target_phase, metas);
                if (!sid) {
                    ++result.stats.findings_dropped;
                    continue;
                }
                auto* sd = &series.front();
                for (auto& s : series)
                    if (s.meta.series_id == *sid) sd = &s;
                auto organs =
                    extract_organs(finding, sd->mask.present_organs(), client, prompts,
                                   &reason);
                if (organs.empty()) {
                    ++result.stats.findings_dropped;
                    continue;
                }
                if (first_matched_series.empty()) first_matched_series = *sid;
                for (auto& organ : organs) {
                    VolumeTextPair p;
                    p.case_id = c.case_id;
                    p.series_id = *sid;
                    p.organ = organ;
                    p.text = finding.text;
                    p.polarity = finding.polarity;
                    p.source = PairSource::Report;
                    p.split = split;
                    p.target_range = finding.target_range;
                    p.target_phase = finding.target_phase;
                    case_pairs.push_back(std::move(p));
                    mentioned_by_series[*sid].insert(organ);
                }
            }

            if (config.augment && !series.empty()) {
                // augment against the first matched series, or the first series
                // when nothing matched
                const std::string aug_sid =
                    first_matched_series.empty() ? series.front().meta.series_id
                                                 : first_matched_series;
                const SeriesData* sd = &series.front();
                for (auto& s : series)
                    if (s.meta.series_id == aug_sid) sd = &s;
                std::set<std::string> mentioned;
                for (auto& [sid2, organs] : mentioned_by_series)
                    mentioned.insert(organs.begin(), organs.end());
                auto neg = augment_negatives(c.case_id, aug_sid, sd->mask.present_organs(),
                                             mentioned, templates, config.augment_ratio,
                                             config.seed);
                for (auto& p : neg) {
                    p.split = split;
                    case_pairs.push_back(std::move(p));
                }
            }

            for (auto& p : case_pairs) {
                auto& c2 = result.stats.counts[p.split];
                (p.source == PairSource::Report ? c2.first : c2.second) += 1;
                result.pairs.push_back(std::move(p));
            }
            ++result.stats.cases_processed;
        } catch (const std::exception& e) {
            std::cerr << "skipping case " << c.case_id << ": " << e.what() << "\n";
            ++result.stats.cases_skipped;
        }
    }

    validate_patient_disjoint(result.pairs, case_to_patient);
    return result;
}

}  // namespace organct
