#include "nhdp/geo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "csv.hpp"
#include "json.hpp"
#include "nhdp/errors.hpp"

namespace nhdp {

namespace {

constexpr double kEarthRadiusKm = 6371.0088;
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
// Collinearity slack for the on-edge test, in degrees^2 cross-product units.
constexpr double kEdgeEps = 1e-12;

std::string property_as_string(const nlohmann::json& props, const char* key) {
  if (!props.contains(key))
    throw DataError(std::string("feature missing property ") + key);
  const auto& v = props.at(key);
  if (v.is_string()) return v.get<std::string>();
  return v.dump();  // numeric ids are fine, keep their literal form
}

Ring parse_ring(const nlohmann::json& jring, const std::string& where) {
  if (!jring.is_array() || jring.size() < 4)
    throw DataError(where + ": ring needs at least 4 vertices");
  Ring ring;
  ring.reserve(jring.size());
  for (const auto& jv : jring) {
    if (!jv.is_array() || jv.size() < 2)
      throw DataError(where + ": vertex is not a [lon, lat] pair");
    ring.push_back({jv[0].get<double>(), jv[1].get<double>()});
  }
  if (ring.front() != ring.back())
    throw DataError(where + ": unclosed ring");
  return ring;
}

std::vector<Ring> parse_polygon(const nlohmann::json& jpoly, const std::string& where) {
  if (!jpoly.is_array() || jpoly.empty())
    throw DataError(where + ": polygon has no rings");
  std::vector<Ring> rings;
  for (const auto& jring : jpoly) rings.push_back(parse_ring(jring, where));
  return rings;
}

bool on_segment(double px, double py, double x1, double y1, double x2, double y2) {
  double cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1);
  if (std::abs(cross) > kEdgeEps) return false;
  return px >= std::min(x1, x2) - kEdgeEps && px <= std::max(x1, x2) + kEdgeEps &&
         py >= std::min(y1, y2) - kEdgeEps && py <= std::max(y1, y2) + kEdgeEps;
}

}  // namespace

std::vector<GeoUnit> load_geojson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  if (j.value("type", "") != "FeatureCollection" || !j.contains("features"))
    throw DataError(path + ": expected a GeoJSON FeatureCollection");

  std::vector<GeoUnit> units;
  for (const auto& feature : j.at("features")) {
    GeoUnit unit;
    if (!feature.contains("properties") || !feature.contains("geometry"))
      throw DataError(path + ": feature missing properties or geometry");
    unit.unit_id = property_as_string(feature.at("properties"), "unit_id");
    unit.parent_id = property_as_string(feature.at("properties"), "parent_id");
    const auto& geom = feature.at("geometry");
    std::string gtype = geom.value("type", "");
    std::string where = path + ": unit " + unit.unit_id;
    if (gtype == "Polygon") {
      unit.polygons.push_back(parse_polygon(geom.at("coordinates"), where));
    } else if (gtype == "MultiPolygon") {
      for (const auto& jpoly : geom.at("coordinates"))
        unit.polygons.push_back(parse_polygon(jpoly, where));
    } else {
      throw DataError(where + ": unsupported geometry type '" + gtype + "'");
    }
    units.push_back(std::move(unit));
  }
  return units;
}

bool point_in_unit(const GeoUnit& unit, double lon, double lat) {
  // Even-odd parity over every ring at once: shells toggle the point in,
  // holes toggle it back out, disjoint parts cannot overlap.
  bool inside = false;
  for (const auto& part : unit.polygons) {
    for (const auto& ring : part) {
      for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        double x1 = ring[i][0], y1 = ring[i][1];
        double x2 = ring[i + 1][0], y2 = ring[i + 1][1];
        if (on_segment(lon, lat, x1, y1, x2, y2)) return true;
        if ((y1 > lat) != (y2 > lat)) {
          double xint = x1 + (lat - y1) * (x2 - x1) / (y2 - y1);
          if (lon < xint) inside = !inside;
        }
      }
    }
  }
  return inside;
}

double unit_area_km2(const GeoUnit& unit) {
  double total = 0.0;
  for (const auto& part : unit.polygons) {
    // Local sinusoidal projection anchored at the shell's first vertex keeps
    // the planar shoelace an equal-area computation.
    double lon0 = part.front().front()[0];
    double part_area = 0.0;
    for (const auto& ring : part) {
      double signed_area = 0.0;
      for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        double x1 = kEarthRadiusKm * (ring[i][0] - lon0) * kDegToRad *
                    std::cos(ring[i][1] * kDegToRad);
        double y1 = kEarthRadiusKm * ring[i][1] * kDegToRad;
        double x2 = kEarthRadiusKm * (ring[i + 1][0] - lon0) * kDegToRad *
                    std::cos(ring[i + 1][1] * kDegToRad);
        double y2 = kEarthRadiusKm * ring[i + 1][1] * kDegToRad;
        signed_area += x1 * y2 - x2 * y1;
      }
      // Holes wind opposite the shell in well-formed input, so they subtract.
      part_area += 0.5 * signed_area;
    }
    total += std::abs(part_area);
  }
  return total;
}

AggregateResult aggregate_points(const std::string& points_path,
                                 const std::string& polygons_path) {
  std::vector<GeoUnit> units = load_geojson(polygons_path);
  if (units.empty()) throw DataError(polygons_path + ": no features");
  CsvTable table = read_csv(points_path);
  int lon_col = table.col("lon");
  int lat_col = table.col("lat");
  if (lon_col < 0 || lat_col < 0)
    throw DataError(points_path + ": need lon and lat columns");
  int year_col = table.col("year");

  AggregateResult result;
  std::vector<long> tally(units.size(), 0);
  long min_year = std::numeric_limits<long>::max();
  long max_year = std::numeric_limits<long>::min();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    std::string ctx = points_path + " row " + std::to_string(r + 2);
    double lon = parse_double_cell(row[lon_col], ctx);
    double lat = parse_double_cell(row[lat_col], ctx);
    if (year_col >= 0) {
      long year = parse_long_cell(row[year_col], ctx);
      min_year = std::min(min_year, year);
      max_year = std::max(max_year, year);
    }
    bool matched = false;
    for (std::size_t u = 0; u < units.size(); ++u) {
      if (point_in_unit(units[u], lon, lat)) {
        ++tally[u];  // boundary points land on the first feature in file order
        matched = true;
        break;
      }
    }
    if (!matched) ++result.unmatched;
  }
  if (year_col >= 0 && !table.rows.empty())
    result.n_years = static_cast<int>(max_year - min_year + 1);

  for (std::size_t u = 0; u < units.size(); ++u) {
    ArealRecord rec;
    rec.unit_id = units[u].unit_id;
    rec.parent_id = units[u].parent_id;
    rec.count = static_cast<double>(tally[u]) / result.n_years;
    rec.area = unit_area_km2(units[u]);
    if (rec.area <= 0.0)
      throw DataError("unit " + rec.unit_id + ": non-positive area");
    rec.density = rec.count / rec.area;
    result.records.push_back(std::move(rec));
  }
  return result;
}

}  // namespace nhdp
