#include "organct/synthetic.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "organct/util.hpp"
#include "organct/vocab.hpp"
#include "organct/vvol.hpp"

namespace organct {

using json = nlohmann::json;

namespace {

struct OrganSpec {
    std::string name;
    int baseline_hu;
};

// Eight organs laid out as a 4x2 tile grid in the axial plane; crops center
// on the organ, so each organ sees the volume at a distinct translation.
const std::vector<OrganSpec>& organ_specs() {
    static const std::vector<OrganSpec> specs = {
        {"heart", 45},        {"aorta", 50},        {"liver", 60},    {"spleen", 55},
        {"kidney_left", 40},  {"kidney_right", 40}, {"pancreas", 45}, {"stomach", 30},
    };
    return specs;
}

struct Box {
    int x0, x1, y0, y1, z0, z1;  // inclusive
};

std::string lesion_sentence(const std::string& lesion, const std::string& organ) {
    const std::string disp = OrganVocabulary::display_name(organ);
    if (lesion == "mass") return "A mass is present in the " + disp + ".";
    if (lesion == "cyst") return "A cyst is present in the " + disp + ".";
    if (lesion == "calcification") return "Calcification is present in the " + disp + ".";
    return "Hemorrhage is present in the " + disp + ".";
}

}  // namespace

const std::vector<std::string>& synthetic_lesions() {
    static const std::vector<std::string> lesions = {"mass", "cyst", "calcification",
                                                     "hemorrhage"};
    return lesions;
}

void gen_synthetic(const SyntheticConfig& cfg) {
    std::filesystem::create_directories(cfg.out_root);
    const auto& specs = organ_specs();
    json patients = json::object();
    json truth = json::object();

    for (int ci = 0; ci < cfg.cases; ++ci) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "case_%03d", ci);
        const std::string case_id = buf;
        std::uint64_t state = cfg.seed ^ fnv1a64(case_id);

        // every seventh case (offset 3) reuses the previous patient so the
        // patient-disjoint split logic has something to chew on
        std::string patient = "P" + std::to_string(ci);
        if (ci % 7 == 3 && ci > 0) {
            std::snprintf(buf, sizeof buf, "case_%03d", ci - 1);
            patient = patients.at(std::string(buf)).get<std::string>();
        }
        patients[case_id] = patient;

        Volume vol;
        vol.dims = {cfg.dim_xy, cfg.dim_xy, cfg.dim_z};
        vol.spacing = {1.5, 1.5, 5.0};
        vol.voxels.assign(vol.dims.count(), -1000);
        SegMask mask;
        mask.dims = vol.dims;
        mask.spacing = vol.spacing;
        mask.labels.assign(vol.dims.count(), 0);

        // organ boxes with mild per-case jitter
        std::vector<Box> boxes;
        for (std::size_t oi = 0; oi < specs.size(); ++oi) {
            const int tx = int(oi) % 4, ty = int(oi) / 4;
            Box b;
            b.x0 = tx * 16 + 2 + int(splitmix64(state) % 2);
            b.x1 = b.x0 + 10 + int(splitmix64(state) % 2);
            b.y0 = ty * 32 + 4 + int(splitmix64(state) % 3);
            b.y1 = b.y0 + 20 + int(splitmix64(state) % 3);
            b.z0 = 4 + int(splitmix64(state) % 3);
            b.z1 = std::min(cfg.dim_z - 2, b.z0 + 15 + int(splitmix64(state) % 4));
            boxes.push_back(b);
            mask.label_table[std::uint16_t(oi + 1)] = specs[oi].name;
        }

        // disease assignment
        std::vector<std::string> lesion_of(specs.size(), "none");
        for (std::size_t oi = 0; oi < specs.size(); ++oi)
            if (uniform01(state) < cfg.disease_prob)
                lesion_of[oi] =
                    synthetic_lesions()[splitmix64(state) % synthetic_lesions().size()];

        // paint organs
        for (std::size_t oi = 0; oi < specs.size(); ++oi) {
            const Box& b = boxes[oi];
            const std::string& lesion = lesion_of[oi];
            for (int z = b.z0; z <= b.z1; ++z)
                for (int y = b.y0; y <= b.y1; ++y)
                    for (int x = b.x0; x <= b.x1; ++x) {
                        double hu = specs[oi].baseline_hu +
                                    (uniform01(state) - 0.5) * 16.0;
                        if (lesion == "mass") hu += 130;
                        else if (lesion == "cyst") hu -= 150;
                        else if (lesion == "calcification") hu += 450;
                        else if (lesion == "hemorrhage")
                            // coarse checkerboard; cell size beats the
                            // downstream pooling so the texture survives
                            hu += 90 + (((x / 16 + y / 16 + z / 8) % 2) ? 90 : -90);
                        vol.at(x, y, z) = std::int16_t(std::lround(hu));
                        mask.at(x, y, z) = std::uint16_t(oi + 1);
                    }
        }

        // report text
        std::vector<std::string> sentences;
        if (ci % 4 == 0) sentences.push_back("Comparison with prior imaging was made.");
        bool phase_hint_used = false;
        json organ_truth = json::object();
        for (std::size_t oi = 0; oi < specs.size(); ++oi) {
            organ_truth[specs[oi].name] = lesion_of[oi];
            if (lesion_of[oi] != "none") {
                std::string s = lesion_sentence(lesion_of[oi], specs[oi].name);
                if (ci % 6 == 0 && !phase_hint_used) {
                    s.insert(s.size() - 1, " on the portal phase");
                    phase_hint_used = true;
                }
                sentences.push_back(std::move(s));
            } else if (uniform01(state) < cfg.neg_sentence_prob) {
                sentences.push_back("No abnormality is observed in the " +
                                    OrganVocabulary::display_name(specs[oi].name) + ".");
            }
        }
        truth[case_id] = organ_truth;

        const auto case_dir = cfg.out_root / case_id;
        std::filesystem::create_directories(case_dir);
        std::string report;
        for (auto& s : sentences) report += s + "\n";
        write_text_file(case_dir / "report.txt", report);

        // one portal-phase soft-tissue series; every fifth case also gets a
        // non-contrast sibling to exercise series selection
        struct SeriesOut {
            std::string id;
            int number;
            const char* phase;  // nullptr = absent from metadata
            const char* kernel;
            double window_width;
        };
        std::vector<SeriesOut> series = {
            {"s1", 2, "Portal phase or later", "SoftTissue", 400.0}};
        if (ci % 5 == 0) series.push_back({"s0", 1, nullptr, "Other", 1500.0});
        for (auto& so : series) {
            const auto sdir = case_dir / "series" / so.id;
            std::filesystem::create_directories(sdir);
            write_volume(sdir / "volume.vvol", vol, cfg.gzip);
            write_mask(sdir / "mask.vvol", mask, cfg.gzip);
            json meta;
            meta["series_number"] = so.number;
            if (so.phase) meta["phase"] = so.phase; else meta["phase"] = nullptr;
            meta["kernel"] = so.kernel;
            meta["window_width"] = so.window_width;
            meta["region"] = json::array({"chest", "abdomen"});
            write_text_file(sdir / "meta.json", meta.dump(2));
        }
    }

    write_text_file(cfg.out_root / "patients.json", patients.dump(2));
    write_text_file(cfg.out_root / "truth.json", truth.dump(2));
}

}  // namespace organct
