#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "organct/vocab.hpp"
#include "organct/vvol.hpp"

namespace organct {

// Crop geometry used throughout: axial 192x192, 32 slices, 3 window channels.
constexpr int kCropXY = 192;
constexpr int kCropZ = 32;
constexpr int kCropChannels = 3;
constexpr std::int16_t kPadHU = -1024;  // air

struct WindowSpec {
    double level;
    double width;
};

// Fixed channel order: (lung, soft tissue, bone).
inline constexpr WindowSpec kLungWindow{-600.0, 1500.0};
inline constexpr WindowSpec kSoftWindow{40.0, 400.0};
inline constexpr WindowSpec kBoneWindow{300.0, 1500.0};

// clamp((hu - level)/width + 0.5, 0, 1); window center maps to 0.5.
double window_value(double hu, const WindowSpec& w);

// Inclusive voxel box.
struct BBox {
    int x0, x1, y0, y1, z0, z1;
    int ex() const { return x1 - x0 + 1; }
    int ey() const { return y1 - y0 + 1; }
    int ez() const { return z1 - z0 + 1; }
    bool operator==(const BBox&) const = default;
};

std::optional<BBox> organ_bbox(const SegMask& mask, const std::string& organ);

// Fixed-size HU grid around one organ, pre-windowing. values are x-fastest.
struct OrganCrop {
    std::string organ;
    BBox source_bbox;
    int z_window_index = 0;
    int z_window_count = 1;
    std::vector<double> values;  // kCropXY * kCropXY * kCropZ

    double at(int x, int y, int z) const {
        return values[std::size_t(z) * kCropXY * kCropXY + std::size_t(y) * kCropXY + x];
    }
};

// 192x192x32x3 normalized intensities, channel-fastest last: index order
// ((z*Y + y)*X + x)*3 + c.
struct ChannelizedCrop {
    std::vector<double> values;
    double at(int x, int y, int z, int c) const {
        return values[(std::size_t(z) * kCropXY * kCropXY + std::size_t(y) * kCropXY + x) * 3 + c];
    }
};

enum class CropMode { Train, Infer };

// Train mode: one crop, z-window start uniform within the organ extent (seeded).
// Infer mode: non-overlapping stride-32 windows, last window right-aligned.
std::vector<OrganCrop> extract_organ_crops(const Volume& volume, const SegMask& mask,
                                           const std::string& organ, CropMode mode,
                                           std::uint64_t seed = 0);

ChannelizedCrop apply_windowing(const OrganCrop& crop);

// Per-organ foreground volume fractions over the canonical vocabulary order.
// Sums to 1 whenever the mask has any foreground voxel.
std::vector<double> region_features(const SegMask& mask, const OrganVocabulary& vocab);

}  // namespace organct
