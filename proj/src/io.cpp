#include "nhdp/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "csv.hpp"
#include "nhdp/errors.hpp"

namespace nhdp {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

TwoLevelDataset ingest_table(const std::string& path) {
  CsvTable table = read_csv(path);
  int unit_col = table.col("unit_id");
  int parent_col = table.col("parent_id");
  if (unit_col < 0 || parent_col < 0)
    throw DataError(path + ": need unit_id and parent_id columns");
  int density_col = table.col("density");
  int count_col = table.col("count");
  int area_col = table.col("area");
  if (density_col >= 0 && (count_col >= 0 || area_col >= 0))
    throw DataError(path + ": give either density or count+area, not both");
  if (density_col < 0 && (count_col < 0 || area_col < 0))
    throw DataError(path + ": need a density column or count and area columns");

  TwoLevelDataset data;
  std::unordered_set<std::string> seen_units;
  std::unordered_map<std::string, int> group_index;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    std::string ctx = path + " row " + std::to_string(r + 2);
    const std::string& unit_id = row[unit_col];
    if (unit_id.empty()) throw DataError(ctx + ": empty unit_id");
    if (!seen_units.insert(unit_id).second)
      throw DataError(path + ": duplicate unit_id '" + unit_id + "'");
    const std::string& parent_id = row[parent_col];
    if (parent_id.empty())
      throw DataError(ctx + ": unit '" + unit_id + "' has no parent_id");

    double density;
    if (density_col >= 0) {
      density = parse_double_cell(row[density_col], ctx);
    } else {
      double count = parse_double_cell(row[count_col], ctx);
      double area = parse_double_cell(row[area_col], ctx);
      if (!(area > 0.0))
        throw DataError(ctx + ": unit '" + unit_id + "' has non-positive area");
      density = count / area;
    }

    auto it = group_index.find(parent_id);
    int g;
    if (it == group_index.end()) {
      g = static_cast<int>(group_index.size());
      group_index.emplace(parent_id, g);
      data.group_ids.push_back(parent_id);
    } else {
      g = it->second;
    }
    data.y.push_back(density);
    data.group_of.push_back(g);
    data.unit_ids.push_back(unit_id);
  }
  data.n_groups = static_cast<int>(group_index.size());
  data.check();
  return data;
}

namespace {

std::string unit_name(const TwoLevelDataset& data, int i) {
  if (static_cast<int>(data.unit_ids.size()) == data.n_units()) return data.unit_ids[i];
  return "u" + std::to_string(i);
}

std::string group_name(const TwoLevelDataset& data, int g) {
  if (static_cast<int>(data.group_ids.size()) == data.n_groups) return data.group_ids[g];
  return "g" + std::to_string(g);
}

void open_out(std::ofstream& out, const std::string& path) {
  out.open(path);
  if (!out) throw std::runtime_error("cannot write " + path);
}

}  // namespace

void write_table_csv(const std::string& path, const TwoLevelDataset& data) {
  std::ofstream out;
  open_out(out, path);
  out << "unit_id,parent_id,density\n";
  for (int i = 0; i < data.n_units(); ++i) {
    out << unit_name(data, i) << ',' << group_name(data, data.group_of[i]) << ','
        << format_double(data.y[i]) << '\n';
  }
}

void write_partition_csv(const std::string& path, const TwoLevelDataset& data,
                         const PartitionPair& pair) {
  if (static_cast<int>(pair.gamma_h.size()) != data.n_units() ||
      static_cast<int>(pair.gamma_l.size()) != data.n_groups)
    throw std::invalid_argument("write_partition_csv: partition does not fit dataset");
  std::ofstream out;
  open_out(out, path);
  out << "unit_id,group_id,gamma_h,gamma_l\n";
  for (int i = 0; i < data.n_units(); ++i) {
    int g = data.group_of[i];
    out << unit_name(data, i) << ',' << group_name(data, g) << ',' << pair.gamma_h[i]
        << ',' << pair.gamma_l[g] << '\n';
  }
}

PartitionPair read_partition_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  int group_col = table.col("group_id");
  int h_col = table.col("gamma_h");
  int l_col = table.col("gamma_l");
  if (group_col < 0 || h_col < 0 || l_col < 0)
    throw DataError(path + ": need group_id, gamma_h and gamma_l columns");
  PartitionPair pair;
  std::unordered_map<std::string, int> group_label;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    std::string ctx = path + " row " + std::to_string(r + 2);
    pair.gamma_h.push_back(static_cast<int>(parse_long_cell(row[h_col], ctx)));
    int gl = static_cast<int>(parse_long_cell(row[l_col], ctx));
    auto it = group_label.find(row[group_col]);
    if (it == group_label.end()) {
      group_label.emplace(row[group_col], gl);
      pair.gamma_l.push_back(gl);
    } else if (it->second != gl) {
      throw DataError(ctx + ": group '" + row[group_col] +
                      "' has inconsistent gamma_l");
    }
  }
  return pair;
}

void write_draws_csv(const std::string& path, const std::vector<Draw>& draws) {
  std::ofstream out;
  open_out(out, path);
  out << "iteration,chain,sigma2,alpha0,alpha1,alpha2,log_posterior\n";
  for (const auto& d : draws) {
    out << d.iteration << ',' << d.chain << ',' << format_double(d.sigma2) << ','
        << format_double(d.alpha0) << ',' << format_double(d.alpha1) << ','
        << format_double(d.alpha2) << ',' << format_double(d.log_posterior) << '\n';
  }
}

std::vector<Draw> read_draws_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  const char* names[] = {"iteration", "chain",  "sigma2",       "alpha0",
                         "alpha1",    "alpha2", "log_posterior"};
  int cols[7];
  for (int c = 0; c < 7; ++c) {
    cols[c] = table.col(names[c]);
    if (cols[c] < 0) throw DataError(path + ": missing column " + names[c]);
  }
  std::vector<Draw> draws;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    std::string ctx = path + " row " + std::to_string(r + 2);
    Draw d;
    d.iteration = parse_long_cell(row[cols[0]], ctx);
    d.chain = static_cast<int>(parse_long_cell(row[cols[1]], ctx));
    d.sigma2 = parse_double_cell(row[cols[2]], ctx);
    d.alpha0 = parse_double_cell(row[cols[3]], ctx);
    d.alpha1 = parse_double_cell(row[cols[4]], ctx);
    d.alpha2 = parse_double_cell(row[cols[5]], ctx);
    d.log_posterior = parse_double_cell(row[cols[6]], ctx);
    draws.push_back(std::move(d));
  }
  return draws;
}

void write_labels_csv(const std::string& path,
                      const std::vector<std::vector<int>>& rows) {
  std::ofstream out;
  open_out(out, path);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
}

std::vector<std::vector<int>> read_labels_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::vector<int>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<int> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      row.push_back(static_cast<int>(
          parse_long_cell(cell, path + " line " + std::to_string(lineno))));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_cluster_means_csv(const std::string& path,
                             const std::vector<std::string>& unit_ids,
                             const std::vector<int>& labels,
                             const std::vector<double>& cluster_means) {
  if (unit_ids.size() != labels.size())
    throw std::invalid_argument("write_cluster_means_csv: size mismatch");
  std::ofstream out;
  open_out(out, path);
  out << "unit_id,cluster,cluster_mean\n";
  for (std::size_t i = 0; i < unit_ids.size(); ++i) {
    out << unit_ids[i] << ',' << labels[i] << ','
        << format_double(cluster_means[labels[i]]) << '\n';
  }
}

void write_values_csv(const std::string& path, const std::string& name,
                      const std::vector<double>& values) {
  std::ofstream out;
  open_out(out, path);
  out << name << '\n';
  for (double v : values) out << format_double(v) << '\n';
}

std::vector<double> read_values_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  if (table.header.size() != 1)
    throw DataError(path + ": expected a single column");
  std::vector<double> values;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    values.push_back(parse_double_cell(
        table.rows[r][0], path + " row " + std::to_string(r + 2)));
  }
  return values;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out;
  open_out(out, path);
  out << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace nhdp
