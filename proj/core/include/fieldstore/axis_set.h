#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fieldstore/schema.h"

namespace fieldstore {

/// Per element dimension, the set of values indexed under one (dataset, collocation) pair.
class AxisSet {
public:
    void insert(const Identifier& element);
    void insert(const std::string& dim, std::string value) { axes_[dim].insert(std::move(value)); }
    void merge(const AxisSet& other);

    /// Sorted values for `dim`; empty if the dim was never indexed.
    std::vector<std::string> values(std::string_view dim) const;
    /// True if every dimension of `element` has its value recorded. Used to
    /// skip indexes that cannot hold the element.
    bool may_contain(const Identifier& element) const;

    const std::map<std::string, std::set<std::string>, std::less<>>& dims() const noexcept { return axes_; }
    bool empty() const noexcept { return axes_.empty(); }

    friend bool operator==(const AxisSet&, const AxisSet&) = default;

private:
    std::map<std::string, std::set<std::string>, std::less<>> axes_;
};

}  // namespace fieldstore
