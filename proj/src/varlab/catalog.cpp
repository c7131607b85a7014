#include "varlab/catalog.hpp"

#include <algorithm>
#include <numeric>

#include "varlab/error.hpp"

namespace varlab {

Json to_json(const CatalogEntry& e) {
  Json j{{"stimulus_id", e.stimulus_id},
         {"embedding", to_json(e.embedding)},
         {"is_sentinel", e.is_sentinel},
         {"sentinel_truth", e.sentinel_truth ? Json(*e.sentinel_truth) : Json(nullptr)},
         {"pair", e.pair ? Json{e.pair->e1, e.pair->e2} : Json(nullptr)},
         {"source_id", e.source_id}};
  return j;
}

CatalogEntry catalog_entry_from_json(const Json& j) {
  CatalogEntry e;
  try {
    e.stimulus_id = j.at("stimulus_id").get<std::string>();
    e.embedding = vector_from_json(j.at("embedding"));
    e.is_sentinel = j.at("is_sentinel").get<bool>();
    if (j.contains("sentinel_truth") && !j["sentinel_truth"].is_null())
      e.sentinel_truth = j["sentinel_truth"].get<int>();
    if (j.contains("pair") && !j["pair"].is_null()) {
      const auto p = j["pair"].get<std::array<int, 2>>();
      e.pair = TargetPair(p[0], p[1]);
    }
    e.source_id = j.value("source_id", std::string());
  } catch (const Json::exception& ex) {
    fail(ErrorCode::kValidation, std::string("malformed catalog entry: ") + ex.what());
  }
  require(e.is_sentinel == e.sentinel_truth.has_value(), ErrorCode::kValidation,
          "catalog entry " + e.stimulus_id + ": sentinel_truth must be present iff is_sentinel");
  return e;
}

void Catalog::add(CatalogEntry entry) {
  require(!index_.contains(entry.stimulus_id), ErrorCode::kValidation,
          "duplicate stimulus id " + entry.stimulus_id);
  index_.emplace(entry.stimulus_id, entries.size());
  entries.push_back(std::move(entry));
}

const CatalogEntry* Catalog::find(const std::string& stimulus_id) const {
  const auto it = index_.find(stimulus_id);
  return it == index_.end() ? nullptr : &entries[it->second];
}

const CatalogEntry& Catalog::at(const std::string& stimulus_id) const {
  const CatalogEntry* e = find(stimulus_id);
  if (!e) fail(ErrorCode::kNotFound, "unknown stimulus " + stimulus_id);
  return *e;
}

std::vector<const CatalogEntry*> Catalog::boundary() const {
  std::vector<const CatalogEntry*> out;
  for (const auto& e : entries)
    if (!e.is_sentinel) out.push_back(&e);
  return out;
}

std::vector<const CatalogEntry*> Catalog::sentinels() const {
  std::vector<const CatalogEntry*> out;
  for (const auto& e : entries)
    if (e.is_sentinel) out.push_back(&e);
  return out;
}

std::string opaque_stimulus_id(std::uint64_t seed, std::size_t ordinal) {
  return "s" + hex64(mix_seed(seed, ordinal)).substr(0, 12);
}

Catalog build_catalog(const std::vector<StimulusRecord>& accepted,
                      const std::vector<SentinelStimulus>& sentinels, std::uint64_t seed) {
  std::vector<CatalogEntry> all;
  for (const auto& r : accepted) {
    CatalogEntry e;
    e.embedding = r.embedding;
    e.pair = r.pair;
    e.source_id = r.stimulus_id;
    all.push_back(std::move(e));
  }
  for (std::size_t i = 0; i < sentinels.size(); ++i) {
    CatalogEntry e;
    e.embedding = sentinels[i].embedding;
    e.is_sentinel = true;
    e.sentinel_truth = sentinels[i].truth;
    e.source_id = "sentinel-" + std::to_string(i);
    all.push_back(std::move(e));
  }
  Rng rng(mix_seed(seed, 7));
  std::shuffle(all.begin(), all.end(), rng);
  Catalog catalog;
  for (std::size_t i = 0; i < all.size(); ++i) {
    all[i].stimulus_id = opaque_stimulus_id(seed, i);
    catalog.add(std::move(all[i]));
  }
  return catalog;
}

void write_catalog(const std::filesystem::path& path, const Catalog& catalog) {
  std::vector<Json> rows;
  for (const auto& e : catalog.entries) rows.push_back(to_json(e));
  write_jsonl(path, rows);
}

Catalog read_catalog(const std::filesystem::path& path) {
  Catalog c;
  for (const auto& row : read_jsonl(path)) c.add(catalog_entry_from_json(row));
  return c;
}

}  // namespace varlab
