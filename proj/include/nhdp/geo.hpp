#pragma once

#include <array>
#include <string>
#include <vector>

namespace nhdp {

// Closed ring of (lon, lat) vertices, last vertex repeating the first.
using Ring = std::vector<std::array<double, 2>>;

struct GeoUnit {
  std::string unit_id;
  std::string parent_id;
  // One entry per polygon part; within a part the first ring is the shell
  // and any further rings are holes (GeoJSON layout).
  std::vector<std::vector<Ring>> polygons;
};

// Reads a GeoJSON FeatureCollection of Polygon / MultiPolygon features whose
// properties carry unit_id and parent_id. Throws DataError on malformed input
// (bad JSON, unsupported geometry, unclosed rings, rings under 4 vertices).
std::vector<GeoUnit> load_geojson(const std::string& path);

// Even-odd ray casting over all rings of the unit. Points exactly on a ring
// edge count as inside.
bool point_in_unit(const GeoUnit& unit, double lon, double lat);

// Area in km^2: each vertex is projected to a local equal-area (sinusoidal)
// plane and each part's rings contribute a signed shoelace sum, so holes
// subtract from their shell.
double unit_area_km2(const GeoUnit& unit);

struct ArealRecord {
  std::string unit_id;
  std::string parent_id;
  double count = 0.0;    // points per year, averaged over the observed span
  double area = 0.0;     // km^2
  double density = 0.0;  // count / area
};

struct AggregateResult {
  std::vector<ArealRecord> records;  // one per polygon feature, file order
  long unmatched = 0;                // points inside no polygon
  int n_years = 1;                   // inclusive year span of the points file
};

// Counts points (CSV with lon, lat and an optional year column) into the
// polygons. A point on a shared boundary goes to the first matching feature
// in file order. Yearly counts average over the full min..max year span, so
// years in which a unit saw nothing still dilute its average.
AggregateResult aggregate_points(const std::string& points_path,
                                 const std::string& polygons_path);

}  // namespace nhdp
