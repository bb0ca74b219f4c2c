#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace organct {

// Canonical organ label list, fixed order; shipped as a versioned data file.
// The order determines the region_features vector layout.
class OrganVocabulary {
public:
    static OrganVocabulary load(const std::filesystem::path& assets);

    const std::vector<std::string>& labels() const { return labels_; }
    std::size_t size() const { return labels_.size(); }
    bool contains(const std::string& label) const { return index_.count(label) != 0; }
    // Index in canonical order; throws on unknown label.
    std::size_t index_of(const std::string& label) const;
    // "kidney_left" -> "left kidney"; used for templates and report text.
    static std::string display_name(const std::string& label);

    // region name -> member organ labels (for the region classifier's
    // synthetic training data and the synthetic corpus generator).
    const std::map<std::string, std::vector<std::string>>& region_organs() const {
        return regions_;
    }
    static const std::vector<std::string>& region_names();  // fixed order

private:
    std::vector<std::string> labels_;
    std::map<std::string, std::size_t> index_;
    std::map<std::string, std::vector<std::string>> regions_;
};

}  // namespace organct
