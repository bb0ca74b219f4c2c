#include "organct/crops.hpp"

#include <algorithm>
#include <cmath>

namespace organct {

double window_value(double hu, const WindowSpec& w) {
    return std::clamp((hu - w.level) / w.width + 0.5, 0.0, 1.0);
}

std::optional<BBox> organ_bbox(const SegMask& mask, const std::string& organ) {
    const std::uint16_t id = mask.id_of(organ);
    if (id == 0) throw DataError("unknown label name: " + organ);
    BBox b{mask.dims.nx, -1, mask.dims.ny, -1, mask.dims.nz, -1};
    std::size_t idx = 0;
    for (int z = 0; z < mask.dims.nz; ++z)
        for (int y = 0; y < mask.dims.ny; ++y)
            for (int x = 0; x < mask.dims.nx; ++x, ++idx)
                if (mask.labels[idx] == id) {
                    b.x0 = std::min(b.x0, x);
                    b.x1 = std::max(b.x1, x);
                    b.y0 = std::min(b.y0, y);
                    b.y1 = std::max(b.y1, y);
                    b.z0 = std::min(b.z0, z);
                    b.z1 = std::max(b.z1, z);
                }
    if (b.x1 < 0) return std::nullopt;
    return b;
}

namespace {

// Per-axis plan for the axial plane: either an integer window (expansion with
// padding outside the volume) or a continuous downscale of the bbox extent.
struct AxisPlan {
    bool resample;
    int start;      // integer mode: source index of crop index 0
    double scale;   // resample mode: source units per crop voxel
    double origin;  // resample mode: continuous source coord of crop index 0 center
    int lo, hi;     // bbox bounds, for clamping in resample mode
};

AxisPlan plan_axis(int b0, int b1, int target) {
    AxisPlan p{};
    const int extent = b1 - b0 + 1;
    p.lo = b0;
    p.hi = b1;
    if (extent <= target) {
        p.resample = false;
        p.start = b0 - (target - extent) / 2;
    } else {
        p.resample = true;
        p.scale = double(extent) / target;
        p.origin = b0 + 0.5 * p.scale - 0.5;
    }
    return p;
}

// Sample one axial plane value at crop coords (i, j) on slice z.
double sample_plane(const Volume& v, const AxisPlan& px, const AxisPlan& py, int i, int j,
                    int z) {
    auto fetch = [&](int x, int y) -> double {
        if (x < 0 || x >= v.dims.nx || y < 0 || y >= v.dims.ny) return double(kPadHU);
        return double(v.at(x, y, z));
    };
    if (!px.resample && !py.resample) return fetch(px.start + i, py.start + j);

    auto coord = [](const AxisPlan& p, int k) {
        return std::clamp(p.origin + p.scale * k, double(p.lo), double(p.hi));
    };
    if (px.resample && py.resample) {
        const double fx = coord(px, i), fy = coord(py, j);
        const int x0 = int(std::floor(fx)), y0 = int(std::floor(fy));
        const int x1 = std::min(x0 + 1, px.hi), y1 = std::min(y0 + 1, py.hi);
        const double tx = fx - x0, ty = fy - y0;
        return (1 - tx) * (1 - ty) * fetch(x0, y0) + tx * (1 - ty) * fetch(x1, y0) +
               (1 - tx) * ty * fetch(x0, y1) + tx * ty * fetch(x1, y1);
    }
    if (px.resample) {
        const int y = py.start + j;
        if (y < 0 || y >= v.dims.ny) return double(kPadHU);
        const double fx = coord(px, i);
        const int x0 = int(std::floor(fx)), x1 = std::min(x0 + 1, px.hi);
        const double tx = fx - x0;
        return (1 - tx) * fetch(x0, y) + tx * fetch(x1, y);
    }
    const int x = px.start + i;
    if (x < 0 || x >= v.dims.nx) return double(kPadHU);
    const double fy = coord(py, j);
    const int y0 = int(std::floor(fy)), y1 = std::min(y0 + 1, py.hi);
    const double ty = fy - y0;
    return (1 - ty) * fetch(x, y0) + ty * fetch(x, y1);
}

}  // namespace

std::vector<OrganCrop> extract_organ_crops(const Volume& volume, const SegMask& mask,
                                           const std::string& organ, CropMode mode,
                                           std::uint64_t seed) {
    if (volume.dims != mask.dims)
        throw DataError("volume/mask dims mismatch for organ " + organ);
    auto box = organ_bbox(mask, organ);
    if (!box) throw DataError("organ absent from mask: " + organ);
    const BBox b = *box;
    const AxisPlan px = plan_axis(b.x0, b.x1, kCropXY);
    const AxisPlan py = plan_axis(b.y0, b.y1, kCropXY);
    const int ez = b.ez();

    // z-window starts, in source slice coordinates; -1 entries pad with air.
    std::vector<int> starts;
    if (ez <= kCropZ) {
        starts.push_back(b.z0 - (kCropZ - ez) / 2);
    } else if (mode == CropMode::Train) {
        std::uint64_t state = seed ^ fnv1a64(organ);
        const int span = ez - kCropZ;
        starts.push_back(b.z0 + int(splitmix64(state) % std::uint64_t(span + 1)));
    } else {
        const int count = (ez - kCropZ + kCropZ - 1) / kCropZ + 1;
        for (int w = 0; w < count; ++w)
            starts.push_back(w + 1 == count ? b.z1 - kCropZ + 1 : b.z0 + w * kCropZ);
    }

    std::vector<OrganCrop> crops;
    for (std::size_t w = 0; w < starts.size(); ++w) {
        OrganCrop c;
        c.organ = organ;
        c.source_bbox = b;
        c.z_window_index = int(w);
        c.z_window_count = int(starts.size());
        c.values.assign(std::size_t(kCropXY) * kCropXY * kCropZ, double(kPadHU));
        for (int k = 0; k < kCropZ; ++k) {
            const int z = starts[w] + k;
            // slices outside the organ's own z-extent are padding
            if (z < b.z0 || z > b.z1) continue;
            double* plane = c.values.data() + std::size_t(k) * kCropXY * kCropXY;
            for (int j = 0; j < kCropXY; ++j)
                for (int i = 0; i < kCropXY; ++i)
                    plane[std::size_t(j) * kCropXY + i] = sample_plane(volume, px, py, i, j, z);
        }
        crops.push_back(std::move(c));
    }
    return crops;
}

ChannelizedCrop apply_windowing(const OrganCrop& crop) {
    ChannelizedCrop out;
    out.values.resize(crop.values.size() * 3);
    for (std::size_t i = 0; i < crop.values.size(); ++i) {
        const double hu = crop.values[i];
        out.values[i * 3 + 0] = window_value(hu, kLungWindow);
        out.values[i * 3 + 1] = window_value(hu, kSoftWindow);
        out.values[i * 3 + 2] = window_value(hu, kBoneWindow);
    }
    return out;
}

std::vector<double> region_features(const SegMask& mask, const OrganVocabulary& vocab) {
    std::vector<double> features(vocab.size(), 0.0);
    std::vector<std::size_t> counts(65536, 0);
    for (auto l : mask.labels) ++counts[l];
    const double vv = mask.spacing.voxel_volume();
    double total = 0.0;
    for (auto& [id, name] : mask.label_table)
        if (id != 0 && vocab.contains(name)) total += double(counts[id]) * vv;
    if (total <= 0.0) return features;
    for (auto& [id, name] : mask.label_table)
        if (id != 0 && vocab.contains(name))
            features[vocab.index_of(name)] = double(counts[id]) * vv / total;
    return features;
}

}  // namespace organct
