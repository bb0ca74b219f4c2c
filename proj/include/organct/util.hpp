#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace organct {

// Error category used for CLI exit-code mapping: usage=1, data=2, numeric=3.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Assets directory resolution: explicit path > ORGANCT_ASSETS env > compiled default.
std::filesystem::path assets_dir(const std::string& override_path = "");

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

// Line-oriented data file: strips CR, skips blank lines and '#' comments.
std::vector<std::string> read_data_lines(const std::filesystem::path& path);

// FNV-1a 64-bit, used for text token hashing and input content hashes.
std::uint64_t fnv1a64(std::string_view s);
std::uint64_t hash_file(const std::filesystem::path& path);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
bool starts_with_ci(std::string_view text, std::string_view prefix);
bool contains_ci(std::string_view text, std::string_view needle);

// Deterministic counter-based rng helpers (splitmix64); used where a stream
// must be reproducible independent of call interleaving.
std::uint64_t splitmix64(std::uint64_t& state);
double uniform01(std::uint64_t& state);

}  // namespace organct
