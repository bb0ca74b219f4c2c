#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "organct/report.hpp"

namespace organct {

enum class Kernel { Lung, SoftTissue, Other };

std::string to_string(Kernel k);
Kernel parse_kernel(const std::string& s);

struct SeriesMeta {
    std::string series_id;
    int series_number = 0;
    std::set<std::string> region;  // subset of {head, neck, chest, abdomen, pelvis}
    TargetPhase phase = TargetPhase::NonContrast;
    Kernel kernel = Kernel::Other;
    double window_width = 0.0;  // acquisition WW, HU
};

// Step 3 phase classification: metadata passthrough, absent -> Non-contrast.
TargetPhase classify_phase(const std::optional<TargetPhase>& meta_phase);

// Representative-series selection: region filter, reconstruction filter (with
// non-empty guard), phase prioritization (Portal > LateArterial > NonContrast >
// EarlyArterial when unspecified), then argmin series_number.
// Absent iff the region filter leaves nothing.
std::optional<std::string> match_series(TargetRange target_range, TargetPhase target_phase,
                                        const std::vector<SeriesMeta>& candidates);

}  // namespace organct
