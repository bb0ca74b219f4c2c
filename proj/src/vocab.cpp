#include "organct/vocab.hpp"

#include <stdexcept>

#include "organct/util.hpp"

namespace organct {

OrganVocabulary OrganVocabulary::load(const std::filesystem::path& assets) {
    OrganVocabulary v;
    v.labels_ = read_data_lines(assets / "organ_vocabulary.txt");
    for (std::size_t i = 0; i < v.labels_.size(); ++i) v.index_[v.labels_[i]] = i;
    for (auto& line : read_data_lines(assets / "region_organs.tsv")) {
        auto tab = line.find('\t');
        if (tab == std::string::npos) continue;
        v.regions_[line.substr(0, tab)].push_back(line.substr(tab + 1));
    }
    return v;
}

std::size_t OrganVocabulary::index_of(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw DataError("unknown organ label: " + label);
    return it->second;
}

std::string OrganVocabulary::display_name(const std::string& label) {
    // "kidney_left" -> "left kidney", "lung_upper_lobe_right" -> "right upper lobe of lung"
    std::string s = label;
    auto ends_with = [&](const std::string& suf) {
        return s.size() > suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
    };
    std::string side;
    if (ends_with("_left")) {
        side = "left";
        s = s.substr(0, s.size() - 5);
    } else if (ends_with("_right")) {
        side = "right";
        s = s.substr(0, s.size() - 6);
    }
    for (auto& c : s)
        if (c == '_') c = ' ';
    return side.empty() ? s : side + " " + s;
}

const std::vector<std::string>& OrganVocabulary::region_names() {
    static const std::vector<std::string> names = {"head", "neck", "chest", "abdomen",
                                                   "pelvis"};
    return names;
}

}  // namespace organct
