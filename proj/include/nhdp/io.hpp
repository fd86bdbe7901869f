#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nhdp/crf_state.hpp"
#include "nhdp/dataset.hpp"
#include "nhdp/sampler.hpp"

namespace nhdp {

// 17 significant digits, enough for the printed value to parse back to the
// identical double, so reruns diff clean.
std::string format_double(double v);

// FNV-1a 64-bit hash, used for the manifest's config fingerprint.
std::uint64_t fnv1a64(const std::string& bytes);

// CSV with header unit_id, parent_id and either a density column or both
// count and area (density is then count / area). Throws DataError on missing
// columns, duplicate unit ids, empty parent cells, or non-positive areas.
TwoLevelDataset ingest_table(const std::string& path);

// Writes unit_id, parent_id, density rows (the ingest_table input format).
void write_table_csv(const std::string& path, const TwoLevelDataset& data);

// Per-unit rows unit_id, group_id, gamma_h, gamma_l. gamma_l repeats its
// group's label on every member row.
void write_partition_csv(const std::string& path, const TwoLevelDataset& data,
                         const PartitionPair& pair);
PartitionPair read_partition_csv(const std::string& path);

// iteration, chain, sigma2, alpha0, alpha1, alpha2, log_posterior per draw.
// The labelings travel separately (write_labels_csv), so reading back leaves
// each draw's pair empty.
void write_draws_csv(const std::string& path, const std::vector<Draw>& draws);
std::vector<Draw> read_draws_csv(const std::string& path);

// Headerless integer matrix, one row per draw.
void write_labels_csv(const std::string& path,
                      const std::vector<std::vector<int>>& rows);
std::vector<std::vector<int>> read_labels_csv(const std::string& path);

// Choropleth-ready rows unit_id, cluster, cluster_mean.
void write_cluster_means_csv(const std::string& path,
                             const std::vector<std::string>& unit_ids,
                             const std::vector<int>& labels,
                             const std::vector<double>& cluster_means);

// One value per line under a single header cell.
void write_values_csv(const std::string& path, const std::string& name,
                      const std::vector<double>& values);
std::vector<double> read_values_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace nhdp
