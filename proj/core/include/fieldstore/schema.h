#pragma once

#include <filesystem>
#include <functional>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fieldstore {

/// Characters that may not appear in keywords or values. They delimit the
/// canonical `k=v,k=v` encoding and double as path separators on disk.
inline constexpr std::string_view kReservedChars = "=,/\n";

bool is_valid_token(std::string_view token) noexcept;

/// Ordered keyword -> value metadata naming one field (or a part of one).
/// Keywords are unique. Entry order is preserved; equality ignores order.
class Identifier {
public:
    using Entry = std::pair<std::string, std::string>;

    Identifier() = default;
    Identifier(std::initializer_list<Entry> entries);

    /// Parses `k=v,k=v`. Whitespace around tokens is ignored.
    static Identifier parse(std::string_view text);

    /// Inserts or replaces.
    void set(std::string keyword, std::string value);
    bool contains(std::string_view keyword) const noexcept;
    std::optional<std::string_view> find(std::string_view keyword) const noexcept;
    const std::string& at(std::string_view keyword) const;

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    /// `k=v,k=v` in entry order. For schema-ordered parts this is the canonical key.
    std::string str() const;

    friend bool operator==(const Identifier& a, const Identifier& b);

private:
    std::vector<Entry> entries_;
};

/// A span of identifiers: each keyword maps to a value list or a wildcard.
/// Keywords absent from the partial identifier match anything.
class ValueSet {
public:
    static ValueSet any() { return ValueSet(); }
    explicit ValueSet(std::vector<std::string> values);
    explicit ValueSet(std::string value) : ValueSet(std::vector<std::string>{std::move(value)}) {}

    bool is_wildcard() const noexcept { return wildcard_; }
    bool is_single() const noexcept { return !wildcard_ && values_.size() == 1; }
    const std::vector<std::string>& values() const noexcept { return values_; }
    bool matches(std::string_view value) const;

    friend bool operator==(const ValueSet&, const ValueSet&) = default;

private:
    ValueSet() = default;

    bool wildcard_ = true;
    std::vector<std::string> values_;
};

class PartialIdentifier {
public:
    PartialIdentifier() = default;
    explicit PartialIdentifier(const Identifier& id);

    /// Parses `k=v1/v2,k=*`.
    static PartialIdentifier parse(std::string_view text);

    PartialIdentifier& set(std::string keyword, ValueSet values);
    PartialIdentifier& set(std::string keyword, std::string value) {
        return set(std::move(keyword), ValueSet(std::move(value)));
    }
    const ValueSet* find(std::string_view keyword) const noexcept;
    const std::vector<std::pair<std::string, ValueSet>>& entries() const noexcept { return entries_; }

    /// True when every constrained keyword is present in `id` with an accepted value.
    bool matches(const Identifier& id) const;
    /// Like `matches`, but keywords not present in `part` are ignored. Used to
    /// screen dataset/collocation sub-keys.
    bool matches_part(const Identifier& part) const;

private:
    std::vector<std::pair<std::string, ValueSet>> entries_;
};

enum class KeyLevel { kDataset, kCollocation, kElement };

/// Identifier partitioned per schema. Each part carries its dimensions in schema order.
struct SplitKey {
    Identifier dataset;
    Identifier collocation;
    Identifier element;

    friend bool operator==(const SplitKey&, const SplitKey&) = default;
};

class Schema {
public:
    Schema(std::vector<std::string> dataset_dims, std::vector<std::string> collocation_dims,
           std::vector<std::string> element_dims);

    static Schema parse(std::string_view text);
    static Schema load(const std::filesystem::path& path);

    /// Text form accepted by `parse`.
    std::string to_text() const;

    const std::vector<std::string>& dataset_dims() const noexcept { return dataset_; }
    const std::vector<std::string>& collocation_dims() const noexcept { return collocation_; }
    const std::vector<std::string>& element_dims() const noexcept { return element_; }
    const std::vector<std::string>& dims(KeyLevel level) const noexcept;
    std::optional<KeyLevel> level_of(std::string_view keyword) const noexcept;

    SplitKey split(const Identifier& id) const;
    /// Reassembles a split key into one identifier in schema order.
    Identifier join(const SplitKey& key) const;
    /// Restricts `id` to the dims of `level`, in schema order. Throws on missing dims.
    Identifier project(const Identifier& id, KeyLevel level) const;
    /// Canonical string of a full identifier (all dims, schema order).
    std::string canonical(const Identifier& id) const;

    friend bool operator==(const Schema&, const Schema&) = default;

private:
    std::vector<std::string> dataset_;
    std::vector<std::string> collocation_;
    std::vector<std::string> element_;
};

/// Values indexed for one element dimension under a (dataset, collocation) pair.
using AxisProvider =
    std::function<std::vector<std::string>(const Identifier& dataset, const Identifier& collocation,
                                           const std::string& dim)>;

/// Expands element-dimension value lists and wildcards into concrete identifiers.
/// Dataset and collocation dims must be fixed to one value each. Wildcards (and
/// element dims absent from `partial`) take the sorted axis values.
std::vector<Identifier> expand_request(const Schema& schema, const PartialIdentifier& partial,
                                       const AxisProvider& axes);

}  // namespace fieldstore
