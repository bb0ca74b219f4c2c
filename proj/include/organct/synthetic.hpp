#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace organct {

struct SyntheticConfig {
    std::filesystem::path out_root;
    int cases = 200;
    std::uint64_t seed = 11;
    int dim_xy = 64;
    int dim_z = 28;
    double disease_prob = 0.35;       // per organ
    double neg_sentence_prob = 0.5;   // healthy organ gets a negation sentence
    bool gzip = false;
};

// Names of the synthetic lesion signatures, index-aligned with the intensity
// transforms applied by the generator.
const std::vector<std::string>& synthetic_lesions();

// Emits a corpus of small CT cases: per case a findings report, one or two
// series (volume + organ mask + metadata), plus patients.json (some patients
// own two cases) and truth.json (case -> organ -> lesion name or "none") at
// the root.
void gen_synthetic(const SyntheticConfig& cfg);

}  // namespace organct
