#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "varlab/diffusion.hpp"

namespace varlab {

// One presentable stimulus. Boundary stimuli carry the target pair they were
// generated for; sentinels carry their unambiguous truth label.
struct CatalogEntry {
  std::string stimulus_id;
  Embedding embedding;
  bool is_sentinel = false;
  std::optional<int> sentinel_truth;
  std::optional<TargetPair> pair;
  std::string source_id;  // candidate id for boundary stimuli
};

Json to_json(const CatalogEntry& e);
CatalogEntry catalog_entry_from_json(const Json& j);

struct Catalog {
  std::vector<CatalogEntry> entries;

  void add(CatalogEntry entry);
  const CatalogEntry& at(const std::string& stimulus_id) const;  // kNotFound
  const CatalogEntry* find(const std::string& stimulus_id) const;

  std::vector<const CatalogEntry*> boundary() const;
  std::vector<const CatalogEntry*> sentinels() const;

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Opaque, content-free ids so that clients cannot tell sentinels from
// boundary stimuli by name.
std::string opaque_stimulus_id(std::uint64_t seed, std::size_t ordinal);

// Accepted candidates plus sentinels, shuffled under opaque ids.
Catalog build_catalog(const std::vector<StimulusRecord>& accepted,
                      const std::vector<SentinelStimulus>& sentinels, std::uint64_t seed);

void write_catalog(const std::filesystem::path& path, const Catalog& catalog);
Catalog read_catalog(const std::filesystem::path& path);

}  // namespace varlab
