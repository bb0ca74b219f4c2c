#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "organct/nn/tape.hpp"

namespace organct::nn {

// Named parameter tensors in a fixed (sorted-name) order. The order defines
// the optimizer-state layout and the checkpoint blob layout.
class ParamStore {
public:
    Mat& add(const std::string& name, Mat value);
    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
    Mat& at(const std::string& name);
    const Mat& at(const std::string& name) const;
    const std::map<std::string, Mat>& tensors() const { return tensors_; }
    std::map<std::string, Mat>& tensors() { return tensors_; }

    std::size_t scalar_count() const;

    // Random init helpers; deterministic under the store-owned rng state.
    void seed(std::uint64_t s) { rng_state_ = s; }
    Mat gaussian(int rows, int cols, double stddev);

private:
    std::map<std::string, Mat> tensors_;
    std::uint64_t rng_state_ = 0x5eed;
};

using GradMap = std::map<std::string, Mat>;

double global_grad_norm(const GradMap& grads);

// Checkpoint container: "OCKP1" magic, u32 JSON length, JSON metadata with a
// tensor manifest (name/rows/cols/offset), then a little-endian f64 blob.
void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const std::string& meta_json);
// Loads tensors into `params` (replacing its contents); returns the metadata.
std::string load_checkpoint(const std::filesystem::path& path, ParamStore& params);

}  // namespace organct::nn
