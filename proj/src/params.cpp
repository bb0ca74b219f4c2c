#include "organct/nn/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "organct/util.hpp"

namespace organct::nn {

using json = nlohmann::json;

Mat& ParamStore::add(const std::string& name, Mat value) {
    auto [it, inserted] = tensors_.emplace(name, std::move(value));
    if (!inserted) throw organct::DataError("duplicate parameter: " + name);
    return it->second;
}

Mat& ParamStore::at(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw organct::DataError("missing parameter: " + name);
    return it->second;
}

const Mat& ParamStore::at(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw organct::DataError("missing parameter: " + name);
    return it->second;
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (auto& [name, m] : tensors_) n += std::size_t(m.size());
    return n;
}

Mat ParamStore::gaussian(int rows, int cols, double stddev) {
    // Box-Muller over the splitmix64 stream; fixed traversal order.
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            double u1 = organct::uniform01(rng_state_);
            double u2 = organct::uniform01(rng_state_);
            if (u1 < 1e-300) u1 = 1e-300;
            m(r, c) = stddev * std::sqrt(-2.0 * std::log(u1)) *
                      std::cos(2.0 * M_PI * u2);
        }
    return m;
}

double global_grad_norm(const GradMap& grads) {
    double sq = 0;
    for (auto& [name, g] : grads) sq += g.squaredNorm();
    return std::sqrt(sq);
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const std::string& meta_json) {
    json manifest = json::array();
    std::size_t offset = 0;
    for (auto& [name, m] : params.tensors()) {
        manifest.push_back({{"name", name},
                            {"rows", m.rows()},
                            {"cols", m.cols()},
                            {"offset", offset}});
        offset += std::size_t(m.size());
    }
    json header;
    header["meta"] = json::parse(meta_json.empty() ? "{}" : meta_json);
    header["tensors"] = manifest;
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw organct::DataError("cannot write checkpoint: " + path.string());
    out.write("OCKP1", 5);
    const std::uint32_t hlen = std::uint32_t(hs.size());
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(hs.data(), std::streamsize(hs.size()));
    for (auto& [name, m] : params.tensors())
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                const double v = m(r, c);
                out.write(reinterpret_cast<const char*>(&v), 8);
            }
}

std::string load_checkpoint(const std::filesystem::path& path, ParamStore& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw organct::DataError("cannot open checkpoint: " + path.string());
    char magic[5];
    in.read(magic, 5);
    if (in.gcount() != 5 || std::memcmp(magic, "OCKP1", 5) != 0)
        throw organct::DataError("bad checkpoint magic in " + path.string());
    std::uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 4);
    std::string hs(hlen, '\0');
    in.read(hs.data(), hlen);
    json header = json::parse(hs);

    params.tensors().clear();
    for (auto& t : header.at("tensors")) {
        const int rows = t.at("rows").get<int>(), cols = t.at("cols").get<int>();
        Mat m(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                double v;
                in.read(reinterpret_cast<char*>(&v), 8);
                m(r, c) = v;
            }
        if (!in) throw organct::DataError("truncated checkpoint blob in " + path.string());
        params.add(t.at("name").get<std::string>(), std::move(m));
    }
    return header.at("meta").dump();
}

}  // namespace organct::nn
