#include "fieldstore/schema.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "fieldstore/error.h"

namespace fieldstore {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

void require_token(std::string_view token, std::string_view what) {
    if (!is_valid_token(token)) {
        throw InvalidArgument("invalid " + std::string(what) + " '" + std::string(token) + "'");
    }
}

}  // namespace

bool is_valid_token(std::string_view token) noexcept {
    return !token.empty() && token.find_first_of(kReservedChars) == std::string_view::npos;
}

// ---------------------------------------------------------------- Identifier

Identifier::Identifier(std::initializer_list<Entry> entries) {
    for (const auto& [k, v] : entries) {
        if (contains(k)) throw InvalidArgument("duplicate keyword '" + k + "'");
        set(k, v);
    }
}

Identifier Identifier::parse(std::string_view text) {
    Identifier id;
    if (trim(text).empty()) return id;
    for (auto item : split_on(text, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw InvalidArgument("expected k=v, got '" + std::string(item) + "'");
        }
        std::string key(trim(item.substr(0, eq)));
        if (id.contains(key)) throw InvalidArgument("duplicate keyword '" + key + "'");
        id.set(std::move(key), std::string(trim(item.substr(eq + 1))));
    }
    return id;
}

void Identifier::set(std::string keyword, std::string value) {
    require_token(keyword, "keyword");
    require_token(value, "value for '" + keyword + "'");
    for (auto& [k, v] : entries_) {
        if (k == keyword) {
            v = std::move(value);
            return;
        }
    }
    entries_.emplace_back(std::move(keyword), std::move(value));
}

bool Identifier::contains(std::string_view keyword) const noexcept {
    return find(keyword).has_value();
}

std::optional<std::string_view> Identifier::find(std::string_view keyword) const noexcept {
    for (const auto& [k, v] : entries_) {
        if (k == keyword) return v;
    }
    return std::nullopt;
}

const std::string& Identifier::at(std::string_view keyword) const {
    for (const auto& [k, v] : entries_) {
        if (k == keyword) return v;
    }
    throw InvalidArgument("identifier has no keyword '" + std::string(keyword) + "'");
}

std::string Identifier::str() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
        if (!out.empty()) out += ',';
        out += k;
        out += '=';
        out += v;
    }
    return out;
}

bool operator==(const Identifier& a, const Identifier& b) {
    if (a.size() != b.size()) return false;
    return std::all_of(a.entries_.begin(), a.entries_.end(), [&](const auto& e) {
        auto v = b.find(e.first);
        return v && *v == e.second;
    });
}

// ---------------------------------------------------------------- ValueSet

ValueSet::ValueSet(std::vector<std::string> values) : wildcard_(false), values_(std::move(values)) {
    if (values_.empty()) throw InvalidArgument("value list must not be empty");
    for (const auto& v : values_) require_token(v, "value");
}

bool ValueSet::matches(std::string_view value) const {
    return wildcard_ || std::find(values_.begin(), values_.end(), value) != values_.end();
}

// ---------------------------------------------------------------- PartialIdentifier

PartialIdentifier::PartialIdentifier(const Identifier& id) {
    for (const auto& [k, v] : id.entries()) set(k, ValueSet(v));
}

PartialIdentifier PartialIdentifier::parse(std::string_view text) {
    PartialIdentifier partial;
    if (trim(text).empty()) return partial;
    for (auto item : split_on(text, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw InvalidArgument("expected k=v, got '" + std::string(item) + "'");
        }
        std::string key(trim(item.substr(0, eq)));
        const auto rhs = trim(item.substr(eq + 1));
        if (rhs == "*") {
            partial.set(std::move(key), ValueSet::any());
            continue;
        }
        std::vector<std::string> values;
        for (auto v : split_on(rhs, '/')) values.emplace_back(trim(v));
        partial.set(std::move(key), ValueSet(std::move(values)));
    }
    return partial;
}

PartialIdentifier& PartialIdentifier::set(std::string keyword, ValueSet values) {
    require_token(keyword, "keyword");
    for (auto& [k, vs] : entries_) {
        if (k == keyword) {
            vs = std::move(values);
            return *this;
        }
    }
    entries_.emplace_back(std::move(keyword), std::move(values));
    return *this;
}

const ValueSet* PartialIdentifier::find(std::string_view keyword) const noexcept {
    for (const auto& [k, vs] : entries_) {
        if (k == keyword) return &vs;
    }
    return nullptr;
}

bool PartialIdentifier::matches(const Identifier& id) const {
    return std::all_of(entries_.begin(), entries_.end(), [&](const auto& e) {
        auto v = id.find(e.first);
        return v && e.second.matches(*v);
    });
}

bool PartialIdentifier::matches_part(const Identifier& part) const {
    return std::all_of(entries_.begin(), entries_.end(), [&](const auto& e) {
        auto v = part.find(e.first);
        return !v || e.second.matches(*v);
    });
}

// ---------------------------------------------------------------- Schema

Schema::Schema(std::vector<std::string> dataset_dims, std::vector<std::string> collocation_dims,
               std::vector<std::string> element_dims)
    : dataset_(std::move(dataset_dims)),
      collocation_(std::move(collocation_dims)),
      element_(std::move(element_dims)) {
    std::set<std::string> seen;
    for (const auto* dims : {&dataset_, &collocation_, &element_}) {
        if (dims->empty()) throw SchemaError("empty section");
        for (const auto& d : *dims) {
            if (!is_valid_token(d)) throw SchemaError("invalid keyword '" + d + "'");
            if (!seen.insert(d).second) throw SchemaError("duplicate keyword '" + d + "'");
        }
    }
}

Schema Schema::parse(std::string_view text) {
    constexpr std::string_view kSections[] = {"dataset", "collocation", "element"};
    std::optional<std::vector<std::string>> sections[3];
    std::set<std::string> seen;

    int lineno = 0;
    for (auto raw : split_on(text, '\n')) {
        ++lineno;
        auto line = raw;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const auto colon = line.find(':');
        if (colon == std::string_view::npos) throw SchemaError("expected '<section>: <keywords>'", lineno);
        const auto name = trim(line.substr(0, colon));
        const auto it = std::find(std::begin(kSections), std::end(kSections), name);
        if (it == std::end(kSections)) throw SchemaError("unknown section '" + std::string(name) + "'", lineno);
        auto& section = sections[it - std::begin(kSections)];
        if (section) throw SchemaError("section '" + std::string(name) + "' given twice", lineno);

        section.emplace();
        const auto body = trim(line.substr(colon + 1));
        if (body.empty()) throw SchemaError("empty section '" + std::string(name) + "'", lineno);
        for (auto kw : split_on(body, ',')) {
            std::string keyword(trim(kw));
            if (!is_valid_token(keyword)) {
                throw SchemaError("invalid keyword '" + keyword + "'", lineno);
            }
            if (!seen.insert(keyword).second) throw SchemaError("duplicate keyword '" + keyword + "'", lineno);
            section->push_back(std::move(keyword));
        }
    }
    for (std::size_t i = 0; i < 3; ++i) {
        if (!sections[i]) throw SchemaError("missing section '" + std::string(kSections[i]) + "'");
    }
    return Schema(std::move(*sections[0]), std::move(*sections[1]), std::move(*sections[2]));
}

Schema Schema::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open schema file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string Schema::to_text() const {
    auto join = [](const std::vector<std::string>& dims) {
        std::string out;
        for (const auto& d : dims) {
            if (!out.empty()) out += ',';
            out += d;
        }
        return out;
    };
    return "dataset: " + join(dataset_) + "\ncollocation: " + join(collocation_) + "\nelement: " + join(element_) +
           "\n";
}

const std::vector<std::string>& Schema::dims(KeyLevel level) const noexcept {
    switch (level) {
        case KeyLevel::kDataset: return dataset_;
        case KeyLevel::kCollocation: return collocation_;
        case KeyLevel::kElement: break;
    }
    return element_;
}

std::optional<KeyLevel> Schema::level_of(std::string_view keyword) const noexcept {
    for (auto level : {KeyLevel::kDataset, KeyLevel::kCollocation, KeyLevel::kElement}) {
        const auto& d = dims(level);
        if (std::find(d.begin(), d.end(), keyword) != d.end()) return level;
    }
    return std::nullopt;
}

Identifier Schema::project(const Identifier& id, KeyLevel level) const {
    Identifier part;
    for (const auto& dim : dims(level)) {
        auto v = id.find(dim);
        if (!v) throw InvalidArgument("identifier is missing dimension '" + dim + "'");
        part.set(dim, std::string(*v));
    }
    return part;
}

SplitKey Schema::split(const Identifier& id) const {
    for (const auto& [k, v] : id.entries()) {
        if (!level_of(k)) throw InvalidArgument("keyword '" + k + "' is not declared in the schema");
    }
    return SplitKey{project(id, KeyLevel::kDataset), project(id, KeyLevel::kCollocation),
                    project(id, KeyLevel::kElement)};
}

Identifier Schema::join(const SplitKey& key) const {
    Identifier id;
    for (auto level : {KeyLevel::kDataset, KeyLevel::kCollocation, KeyLevel::kElement}) {
        const Identifier& part = level == KeyLevel::kDataset       ? key.dataset
                                 : level == KeyLevel::kCollocation ? key.collocation
                                                                   : key.element;
        for (const auto& dim : dims(level)) id.set(dim, part.at(dim));
    }
    return id;
}

std::string Schema::canonical(const Identifier& id) const {
    return join(split(id)).str();
}

// ---------------------------------------------------------------- expansion

std::vector<Identifier> expand_request(const Schema& schema, const PartialIdentifier& partial,
                                       const AxisProvider& axes) {
    for (const auto& [k, vs] : partial.entries()) {
        if (!schema.level_of(k)) throw InvalidArgument("keyword '" + k + "' is not declared in the schema");
    }

    Identifier dataset;
    Identifier collocation;
    for (auto level : {KeyLevel::kDataset, KeyLevel::kCollocation}) {
        for (const auto& dim : schema.dims(level)) {
            const auto* vs = partial.find(dim);
            if (!vs || !vs->is_single()) {
                throw InvalidArgument("request must fix a single value for dimension '" + dim + "'");
            }
            (level == KeyLevel::kDataset ? dataset : collocation).set(dim, vs->values().front());
        }
    }

    std::vector<std::vector<std::string>> choices;
    for (const auto& dim : schema.element_dims()) {
        const auto* vs = partial.find(dim);
        if (vs && !vs->is_wildcard()) {
            choices.push_back(vs->values());
            continue;
        }
        auto values = axes(dataset, collocation, dim);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        if (values.empty()) return {};
        choices.push_back(std::move(values));
    }

    std::vector<Identifier> out;
    std::vector<std::size_t> cursor(choices.size(), 0);
    while (true) {
        Identifier id = dataset;
        for (const auto& [k, v] : collocation.entries()) id.set(k, v);
        for (std::size_t i = 0; i < choices.size(); ++i) id.set(schema.element_dims()[i], choices[i][cursor[i]]);
        out.push_back(std::move(id));

        // Odometer increment, last dimension fastest.
        std::size_t i = choices.size();
        while (i > 0) {
            --i;
            if (++cursor[i] < choices[i].size()) break;
            cursor[i] = 0;
            if (i == 0) return out;
        }
        if (choices.empty()) return out;
    }
}

}  // namespace fieldstore
