#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "organct/util.hpp"

namespace organct {

struct Dims {
    int nx = 0, ny = 0, nz = 0;
    std::size_t count() const {
        return std::size_t(nx) * std::size_t(ny) * std::size_t(nz);
    }
    bool operator==(const Dims&) const = default;
};

struct Spacing {
    double sx = 1.0, sy = 1.0, sz = 1.0;
    double voxel_volume() const { return sx * sy * sz; }
    bool operator==(const Spacing&) const = default;
};

// Hounsfield-unit voxel grid, x-fastest then y then z.
struct Volume {
    Dims dims;
    Spacing spacing;
    std::vector<std::int16_t> voxels;

    std::int16_t at(int x, int y, int z) const {
        return voxels[std::size_t(z) * dims.nx * dims.ny + std::size_t(y) * dims.nx + x];
    }
    std::int16_t& at(int x, int y, int z) {
        return voxels[std::size_t(z) * dims.nx * dims.ny + std::size_t(y) * dims.nx + x];
    }
};

// Organ label map aligned with its Volume; id 0 is background.
struct SegMask {
    Dims dims;
    Spacing spacing;
    std::vector<std::uint16_t> labels;
    std::map<std::uint16_t, std::string> label_table;

    std::uint16_t at(int x, int y, int z) const {
        return labels[std::size_t(z) * dims.nx * dims.ny + std::size_t(y) * dims.nx + x];
    }
    std::uint16_t& at(int x, int y, int z) {
        return labels[std::size_t(z) * dims.nx * dims.ny + std::size_t(y) * dims.nx + x];
    }
    // Label id for an organ name, or 0 if not in the table.
    std::uint16_t id_of(const std::string& organ) const;
    // Organ names with at least one voxel.
    std::vector<std::string> present_organs() const;
};

// Format errors carry the byte offset where parsing failed.
struct VvolFormatError : DataError {
    std::size_t offset;
    VvolFormatError(const std::string& what, std::size_t off)
        : DataError(what + " (at byte offset " + std::to_string(off) + ")"), offset(off) {}
};

Volume load_volume(const std::filesystem::path& path);
SegMask load_mask(const std::filesystem::path& path);
void write_volume(const std::filesystem::path& path, const Volume& v, bool gzipped = false);
void write_mask(const std::filesystem::path& path, const SegMask& m, bool gzipped = false);

}  // namespace organct
