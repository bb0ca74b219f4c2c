#include "organct/series.hpp"

#include <algorithm>

namespace organct {

std::string to_string(Kernel k) {
    switch (k) {
        case Kernel::Lung: return "Lung";
        case Kernel::SoftTissue: return "SoftTissue";
        case Kernel::Other: return "Other";
    }
    return "Other";
}

Kernel parse_kernel(const std::string& s) {
    if (s == "Lung") return Kernel::Lung;
    if (s == "SoftTissue") return Kernel::SoftTissue;
    return Kernel::Other;
}

TargetPhase classify_phase(const std::optional<TargetPhase>& meta_phase) {
    return meta_phase.value_or(TargetPhase::NonContrast);
}

namespace {

// Chest (Lung) and Chest (Non-lung) both map to anatomical region "chest";
// Other matches any series.
bool region_matches(const std::set<std::string>& series_region, TargetRange target) {
    switch (target) {
        case TargetRange::Head: return series_region.count("head") != 0;
        case TargetRange::Neck: return series_region.count("neck") != 0;
        case TargetRange::ChestLung:
        case TargetRange::ChestNonLung: return series_region.count("chest") != 0;
        case TargetRange::Abdomen: return series_region.count("abdomen") != 0;
        case TargetRange::Pelvis: return series_region.count("pelvis") != 0;
        case TargetRange::Other: return true;
    }
    return false;
}

// Lower is better; NotSpecified series rank last.
int phase_rank(TargetPhase p) {
    switch (p) {
        case TargetPhase::PortalOrLater: return 0;
        case TargetPhase::LateArterial: return 1;
        case TargetPhase::NonContrast: return 2;
        case TargetPhase::EarlyArterial: return 3;
        case TargetPhase::NotSpecified: return 4;
    }
    return 4;
}

}  // namespace

std::optional<std::string> match_series(TargetRange target_range, TargetPhase target_phase,
                                        const std::vector<SeriesMeta>& candidates) {
    // (1) region filter
    std::vector<const SeriesMeta*> pool;
    for (auto& s : candidates)
        if (region_matches(s.region, target_range)) pool.push_back(&s);
    if (pool.empty()) return std::nullopt;

    // (2) reconstruction style filter, kept only when non-empty
    std::vector<const SeriesMeta*> tmp;
    if (target_range == TargetRange::ChestLung) {
        for (auto* s : pool)
            if (s->kernel == Kernel::Lung || s->window_width >= 1000.0) tmp.push_back(s);
    } else {
        for (auto* s : pool)
            if (s->kernel == Kernel::SoftTissue) tmp.push_back(s);
    }
    if (!tmp.empty()) pool = std::move(tmp);

    // (3) phase prioritization; an exact-match filter that would empty the pool
    // leaves it unchanged
    if (target_phase != TargetPhase::NotSpecified) {
        std::vector<const SeriesMeta*> exact;
        for (auto* s : pool)
            if (s->phase == target_phase) exact.push_back(s);
        if (!exact.empty()) pool = std::move(exact);
    } else {
        int best = 5;
        for (auto* s : pool) best = std::min(best, phase_rank(s->phase));
        std::vector<const SeriesMeta*> top;
        for (auto* s : pool)
            if (phase_rank(s->phase) == best) top.push_back(s);
        pool = std::move(top);
    }

    // (4) deterministic tie-break
    const SeriesMeta* pick = pool.front();
    for (auto* s : pool)
        if (s->series_number < pick->series_number) pick = s;
    return pick->series_id;
}

}  // namespace organct
