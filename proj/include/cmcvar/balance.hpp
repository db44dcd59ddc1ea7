// Balanced sampling over the age x gender x region grid and construction of
// the two contrast datasets (chat vs. standard, regional vs. standard).
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "cmcvar/common.hpp"
#include "cmcvar/corpus.hpp"
#include "cmcvar/rng.hpp"

namespace cmcvar {

struct CellKey {
  int age = 0;
  Gender gender = Gender::Female;
  Region region = Region::Brabant;

  auto operator<=>(const CellKey&) const = default;

  std::string label() const {
    return std::to_string(age) + "/" + std::string(to_string(gender)) + "/" +
           std::string(to_string(region));
  }
};

/// The balancing grid. Defaults: ages 13-49, both genders, all four regions.
struct BalanceGrid {
  int age_min = 13;
  int age_max = 49;
  std::vector<Gender> genders{kAllGenders.begin(), kAllGenders.end()};
  std::vector<Region> regions{kAllRegions.begin(), kAllRegions.end()};

  void validate() const {
    if (age_min > age_max) throw ConfigError("balance grid: age_min > age_max");
    if (genders.empty() || regions.empty()) throw ConfigError("balance grid: no genders or regions");
  }

  bool contains(const AuthorMeta& a) const {
    return a.age >= age_min && a.age <= age_max &&
           std::find(genders.begin(), genders.end(), a.gender) != genders.end() &&
           std::find(regions.begin(), regions.end(), a.region) != regions.end();
  }

  std::vector<CellKey> cells() const {
    std::vector<CellKey> out;
    for (int age = age_min; age <= age_max; ++age)
      for (Gender g : genders)
        for (Region r : regions) out.push_back({age, g, r});
    std::sort(out.begin(), out.end());
    return out;
  }
};

inline CellKey cell_of(const AuthorMeta& a) { return {a.age, a.gender, a.region}; }

namespace detail {

inline std::map<CellKey, std::vector<const Post*>> group_by_cell(const std::vector<Post>& posts,
                                                                 const BalanceGrid& grid) {
  std::map<CellKey, std::vector<const Post*>> cells;
  for (const CellKey& k : grid.cells()) cells[k];
  std::unordered_set<std::string> seen;
  for (const Post& p : posts) {
    if (!seen.insert(p.author.author_id).second)
      throw DataError("balancing expects one post per author; '" + p.author.author_id +
                      "' appears twice");
    if (grid.contains(p.author)) cells[cell_of(p.author)].push_back(&p);
  }
  for (auto& [k, v] : cells)
    std::sort(v.begin(), v.end(),
              [](const Post* a, const Post* b) { return a->author.author_id < b->author.author_id; });
  return cells;
}

}  // namespace detail

struct MinCell {
  std::size_t size = 0;
  CellKey cell;
};

/// Smallest distinct-author count over the grid, and the first cell attaining it.
inline MinCell min_cell_size(const std::vector<Post>& posts, const BalanceGrid& grid = {}) {
  grid.validate();
  const auto cells = detail::group_by_cell(posts, grid);
  MinCell best{SIZE_MAX, {}};
  for (const auto& [k, v] : cells) {
    if (v.empty()) throw DataError("balance grid cell " + k.label() + " has no authors");
    if (v.size() < best.size) best = {v.size(), k};
  }
  return best;
}

/// Exactly `n_per_cell` authors per cell, sampled uniformly without
/// replacement with a per-cell stream derived from `seed`. Output is sorted
/// by author_id.
inline std::vector<Post> balanced_sample(const std::vector<Post>& posts, std::size_t n_per_cell,
                                         std::uint64_t seed, const BalanceGrid& grid = {}) {
  grid.validate();
  const auto cells = detail::group_by_cell(posts, grid);
  std::vector<Post> out;
  for (const auto& [k, members] : cells) {
    if (members.size() < n_per_cell)
      throw DataError("balance grid cell " + k.label() + " has " + std::to_string(members.size()) +
                      " authors, fewer than the " + std::to_string(n_per_cell) + " required");
    Rng rng(derive_seed(seed, "balance:" + k.label()));
    for (std::size_t idx : rng.sample_indices(members.size(), n_per_cell)) out.push_back(*members[idx]);
  }
  std::sort(out.begin(), out.end(),
            [](const Post& a, const Post& b) { return a.author.author_id < b.author.author_id; });
  return out;
}

struct BalanceReportRow {
  CellKey cell;
  std::size_t available = 0;
  std::size_t sampled = 0;
};

inline std::vector<BalanceReportRow> balance_report(const std::vector<Post>& available,
                                                    const std::vector<Post>& sampled,
                                                    const BalanceGrid& grid = {}) {
  const auto avail = detail::group_by_cell(available, grid);
  const auto samp = detail::group_by_cell(sampled, grid);
  std::vector<BalanceReportRow> rows;
  for (const auto& [k, v] : avail) rows.push_back({k, v.size(), samp.at(k).size()});
  return rows;
}

inline void write_balance_report(const std::vector<BalanceReportRow>& rows, std::ostream& out) {
  out << "age\tgender\tregion\tavailable\tsampled\n";
  for (const auto& r : rows)
    out << r.cell.age << '\t' << to_string(r.cell.gender) << '\t' << to_string(r.cell.region) << '\t'
        << r.available << '\t' << r.sampled << '\n';
}

struct ContrastSpec {
  Category positive = Category::Chat;

  void validate() const {
    if (positive == Category::Standard)
      throw ConfigError("contrast positive category must be chat or regional");
  }
};

/// Standard tokens (response 0) plus tokens of the positive category
/// (response 1); the other non-standard category is dropped entirely.
struct ContrastDataset {
  Category positive = Category::Chat;
  std::vector<TokenRecord> records;
  std::vector<int> response;
  std::size_t n_standard = 0;
  std::size_t n_positive = 0;
  std::size_t n_authors = 0;
};

inline ContrastDataset build_contrast(const std::vector<TokenRecord>& records, const ContrastSpec& spec) {
  spec.validate();
  ContrastDataset d;
  d.positive = spec.positive;
  std::unordered_set<std::string> authors;
  for (const TokenRecord& r : records) {
    if (r.category == Category::Standard) {
      ++d.n_standard;
      d.response.push_back(0);
    } else if (r.category == spec.positive) {
      ++d.n_positive;
      d.response.push_back(1);
    } else {
      continue;
    }
    d.records.push_back(r);
    authors.insert(r.author_id);
  }
  d.n_authors = authors.size();
  if (d.n_standard == 0 || d.n_positive == 0)
    throw DataError(std::string("contrast '") + std::string(contrast_name(spec.positive)) +
                    "' is degenerate: both response values are required");
  return d;
}

}  // namespace cmcvar
