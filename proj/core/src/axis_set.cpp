#include "fieldstore/axis_set.h"

namespace fieldstore {

void AxisSet::insert(const Identifier& element) {
    for (const auto& [k, v] : element.entries()) axes_[k].insert(v);
}

void AxisSet::merge(const AxisSet& other) {
    for (const auto& [dim, values] : other.axes_) axes_[dim].insert(values.begin(), values.end());
}

std::vector<std::string> AxisSet::values(std::string_view dim) const {
    auto it = axes_.find(dim);
    if (it == axes_.end()) return {};
    return {it->second.begin(), it->second.end()};
}

bool AxisSet::may_contain(const Identifier& element) const {
    for (const auto& [k, v] : element.entries()) {
        auto it = axes_.find(k);
        if (it == axes_.end() || !it->second.contains(v)) return false;
    }
    return true;
}

}  // namespace fieldstore
