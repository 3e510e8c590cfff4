#include "fossa/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fossa {

void SurfaceMesh::validate() const {
  const int n = node_count();
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& tri = triangles[t];
    for (int k = 0; k < 3; ++k) {
      if (tri[k] < 0 || tri[k] >= n)
        throw ConfigError("SurfaceMesh: triangle " + std::to_string(t) +
                          " references node " + std::to_string(tri[k]) +
                          " outside [0, " + std::to_string(n) + ")");
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw ConfigError("SurfaceMesh: degenerate triangle at index " + std::to_string(t));
  }
  for (const auto& p : nodes) {
    if (!p.allFinite()) throw ConfigError("SurfaceMesh: non-finite node coordinate");
  }
}

void WeightedGraph::validate() const {
  const int n = node_count();
  for (int i = 0; i < n; ++i) {
    for (const auto& edge : adjacency[i]) {
      if (edge.to < 0 || edge.to >= n)
        throw ConfigError("WeightedGraph: edge endpoint out of range at node " + std::to_string(i));
      if (!(edge.length > 0.0))
        throw ConfigError("WeightedGraph: nonpositive edge length at node " + std::to_string(i));
      const auto& back = adjacency[edge.to];
      const bool mirrored = std::any_of(back.begin(), back.end(), [&](const GraphEdge& e) {
        return e.to == i && e.length == edge.length;
      });
      if (!mirrored)
        throw ConfigError("WeightedGraph: asymmetric edge " + std::to_string(i) + "-" +
                          std::to_string(edge.to));
    }
  }
}

void TransferMatrix::validate() const {
  if (entries.rows() < 1 || entries.cols() < 1)
    throw ConfigError("TransferMatrix: empty matrix");
  if (!entries.allFinite()) throw ConfigError("TransferMatrix: non-finite entries");
}

WeightedGraph build_edge_graph(const SurfaceMesh& mesh) {
  mesh.validate();
  const int n = mesh.node_count();
  std::map<std::pair<int, int>, double> edges;
  for (const auto& tri : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      int a = tri[k], b = tri[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      auto key = std::make_pair(a, b);
      if (edges.count(key)) continue;
      edges[key] = (mesh.nodes[a] - mesh.nodes[b]).norm();
    }
  }
  WeightedGraph graph;
  graph.adjacency.resize(n);
  for (const auto& [key, d] : edges) {
    graph.adjacency[key.first].push_back({key.second, d});
    graph.adjacency[key.second].push_back({key.first, d});
  }
  return graph;
}

Eigen::VectorXd graph_laplacian_apply(const WeightedGraph& graph,
                                      const Eigen::VectorXd& field,
                                      double diffusivity) {
  const int n = graph.node_count();
  if (field.size() != n)
    throw ConfigError("graph_laplacian_apply: field length " + std::to_string(field.size()) +
                      " does not match node count " + std::to_string(n));
  if (!(diffusivity > 0.0)) throw ConfigError("graph_laplacian_apply: diffusivity must be > 0");
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (const auto& edge : graph.adjacency[i])
      acc += diffusivity / edge.length * (field[edge.to] - field[i]);
    out[i] = acc;
  }
  return out;
}

double laplacian_max_row_sum(const WeightedGraph& graph, double diffusivity) {
  double worst = 0.0;
  for (const auto& edges : graph.adjacency) {
    double row = 0.0;
    for (const auto& edge : edges) row += diffusivity / edge.length;
    worst = std::max(worst, row);
  }
  return worst;
}

Eigen::VectorXd geodesic_distances(const WeightedGraph& graph, int source) {
  const int n = graph.node_count();
  if (source < 0 || source >= n)
    throw ConfigError("geodesic_distances: source " + std::to_string(source) + " out of range");
  constexpr double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd dist = Eigen::VectorXd::Constant(n, inf);
  dist[source] = 0.0;
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  heap.push({0.0, source});
  while (!heap.empty()) {
    const auto [d, i] = heap.top();
    heap.pop();
    if (d > dist[i]) continue;
    for (const auto& edge : graph.adjacency[i]) {
      const double cand = d + edge.length;
      if (cand < dist[edge.to]) {
        dist[edge.to] = cand;
        heap.push({cand, edge.to});
      }
    }
  }
  return dist;
}

TransferMatrix synth_transfer_matrix(const SurfaceMesh& heart,
                                     const SurfaceMesh& body,
                                     double kernel_scale) {
  if (!(kernel_scale > 0.0)) throw ConfigError("synth_transfer_matrix: kernel_scale must be > 0");
  const int nh = heart.node_count();
  const int nb = body.node_count();
  if (nh == 0 || nb == 0) throw ConfigError("synth_transfer_matrix: empty mesh");
  TransferMatrix R;
  R.entries.resize(nb, nh);
  for (int i = 0; i < nb; ++i) {
    for (int j = 0; j < nh; ++j) {
      const double d = (body.nodes[i] - heart.nodes[j]).norm();
      if (d == 0.0)
        throw ConfigError("synth_transfer_matrix: body node " + std::to_string(i) +
                          " coincides with heart node " + std::to_string(j));
      R.entries(i, j) = kernel_scale / d;
    }
    R.entries.row(i) /= R.entries.row(i).sum();
  }
  return R;
}

// ---------------------------------------------------------------------------
// Sphere mesh: Fibonacci lattice + incremental convex hull.

namespace {

struct HullFace {
  int a, b, c;
  Eigen::Vector3d normal;  // not normalized
  double offset;           // normal . point_on_face
  bool alive = true;
};

Eigen::Vector3d face_normal(const std::vector<Eigen::Vector3d>& pts, int a, int b, int c) {
  return (pts[b] - pts[a]).cross(pts[c] - pts[a]);
}

// Convex hull of points in general position (all points are extreme, as on
// a sphere). Beneath-beyond insertion; O(n^2), fine at benchmark sizes.
std::vector<std::array<int, 3>> convex_hull(const std::vector<Eigen::Vector3d>& pts) {
  const int n = static_cast<int>(pts.size());
  if (n < 4) throw ConfigError("convex_hull: need at least 4 points");

  // Seed tetrahedron: spread points far apart for a well-conditioned start.
  int i0 = 0, i1 = -1;
  double best = -1.0;
  for (int i = 1; i < n; ++i) {
    const double d = (pts[i] - pts[i0]).squaredNorm();
    if (d > best) { best = d; i1 = i; }
  }
  int i2 = -1;
  best = -1.0;
  for (int i = 0; i < n; ++i) {
    if (i == i0 || i == i1) continue;
    const double d = (pts[i] - pts[i0]).cross(pts[i] - pts[i1]).squaredNorm();
    if (d > best) { best = d; i2 = i; }
  }
  const Eigen::Vector3d seed_n = face_normal(pts, i0, i1, i2);
  int i3 = -1;
  best = 0.0;
  for (int i = 0; i < n; ++i) {
    if (i == i0 || i == i1 || i == i2) continue;
    const double d = std::abs(seed_n.dot(pts[i] - pts[i0]));
    if (d > best) { best = d; i3 = i; }
  }
  if (i2 < 0 || i3 < 0) throw ConfigError("convex_hull: input points are degenerate");

  std::vector<HullFace> faces;
  const Eigen::Vector3d centroid = 0.25 * (pts[i0] + pts[i1] + pts[i2] + pts[i3]);
  auto push_face = [&](int a, int b, int c) {
    HullFace f;
    f.a = a; f.b = b; f.c = c;
    f.normal = face_normal(pts, a, b, c);
    // orient outward from the running interior point
    if (f.normal.dot(centroid - pts[a]) > 0.0) {
      std::swap(f.b, f.c);
      f.normal = -f.normal;
    }
    f.offset = f.normal.dot(pts[f.a]);
    faces.push_back(f);
  };
  push_face(i0, i1, i2);
  push_face(i0, i1, i3);
  push_face(i0, i2, i3);
  push_face(i1, i2, i3);

  double scale = 0.0;
  for (const auto& p : pts) scale = std::max(scale, p.norm());
  const double eps = 1e-12 * std::max(scale, 1.0);

  for (int p = 0; p < n; ++p) {
    if (p == i0 || p == i1 || p == i2 || p == i3) continue;
    // Faces the new point sees from outside.
    std::vector<int> visible;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!faces[f].alive) continue;
      if (faces[f].normal.dot(pts[p]) - faces[f].offset > eps) visible.push_back(static_cast<int>(f));
    }
    if (visible.empty())
      throw NumericalError("convex_hull: point " + std::to_string(p) +
                           " not outside any face (coplanar or interior input)");
    std::map<std::pair<int, int>, int> directed;  // edge -> visible multiplicity
    for (int f : visible) {
      const auto& face = faces[f];
      const int v[3] = {face.a, face.b, face.c};
      for (int k = 0; k < 3; ++k) {
        directed[{v[k], v[(k + 1) % 3]}]++;
      }
      faces[f].alive = false;
    }
    // Horizon = directed edges whose reverse is not in the visible set.
    for (const auto& [edge, count] : directed) {
      (void)count;
      if (directed.count({edge.second, edge.first})) continue;
      push_face(edge.first, edge.second, p);
    }
  }

  std::vector<std::array<int, 3>> out;
  for (const auto& f : faces)
    if (f.alive) out.push_back({f.a, f.b, f.c});
  return out;
}

}  // namespace

SurfaceMesh make_sphere_mesh(int node_count, double radius, const Eigen::Vector3d& center) {
  if (node_count < 4) throw ConfigError("make_sphere_mesh: need at least 4 nodes");
  if (!(radius > 0.0)) throw ConfigError("make_sphere_mesh: radius must be > 0");

  // Fibonacci lattice: near-uniform area per node for any count.
  std::vector<Eigen::Vector3d> pts(node_count);
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  constexpr double two_pi = 6.28318530717958647692;
  for (int i = 0; i < node_count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / node_count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = two_pi * static_cast<double>(i) / golden;
    pts[i] = Eigen::Vector3d(r * std::cos(phi), r * std::sin(phi), z);
  }

  SurfaceMesh mesh;
  mesh.triangles = convex_hull(pts);
  mesh.nodes.resize(node_count);
  for (int i = 0; i < node_count; ++i) mesh.nodes[i] = center + radius * pts[i];

  // Every lattice point must be a hull vertex; anything else is a hull bug.
  std::vector<char> used(node_count, 0);
  for (const auto& t : mesh.triangles) used[t[0]] = used[t[1]] = used[t[2]] = 1;
  for (int i = 0; i < node_count; ++i)
    if (!used[i]) throw NumericalError("make_sphere_mesh: node " + std::to_string(i) + " unused by hull");
  mesh.validate();
  return mesh;
}

// ---------------------------------------------------------------------------
// File formats.

namespace {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

SurfaceMesh load_mesh_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_mesh_json: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("load_mesh_json: " + path + ": " + e.what());
  }
  if (!j.contains("nodes") || !j.contains("triangles"))
    throw ConfigError("load_mesh_json: " + path + " missing 'nodes' or 'triangles'");
  SurfaceMesh mesh;
  for (const auto& row : j["nodes"]) {
    if (!row.is_array() || row.size() != 3)
      throw ConfigError("load_mesh_json: node entries must be [x,y,z]");
    mesh.nodes.emplace_back(row[0].get<double>(), row[1].get<double>(), row[2].get<double>());
  }
  for (const auto& row : j["triangles"]) {
    if (!row.is_array() || row.size() != 3)
      throw ConfigError("load_mesh_json: triangle entries must be [i,j,k]");
    mesh.triangles.push_back({row[0].get<int>(), row[1].get<int>(), row[2].get<int>()});
  }
  mesh.validate();
  return mesh;
}

void save_mesh_json(const SurfaceMesh& mesh, const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& extra) {
  nlohmann::json j;
  for (const auto& [key, value] : extra) j[key] = value;
  j["nodes"] = nlohmann::json::array();
  for (const auto& p : mesh.nodes) j["nodes"].push_back({p.x(), p.y(), p.z()});
  j["triangles"] = nlohmann::json::array();
  for (const auto& t : mesh.triangles) j["triangles"].push_back({t[0], t[1], t[2]});
  std::ofstream out(path);
  if (!out) throw ConfigError("save_mesh_json: cannot write " + path);
  out << j.dump(2) << "\n";
}

TransferMatrix load_transfer_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_transfer_csv: cannot open " + path);
  std::string header;
  std::getline(in, header);
  int rows = -1, cols = -1;
  if (std::sscanf(header.c_str(), "# rows=%d cols=%d", &rows, &cols) != 2)
    throw ConfigError("load_transfer_csv: bad header in " + path);
  if (rows < 1 || cols < 1) throw ConfigError("load_transfer_csv: bad dimensions in " + path);
  TransferMatrix R;
  R.entries.resize(rows, cols);
  std::string line;
  for (int i = 0; i < rows; ++i) {
    if (!std::getline(in, line))
      throw ConfigError("load_transfer_csv: " + path + " truncated at row " + std::to_string(i));
    std::stringstream ss(line);
    std::string cell;
    for (int jcol = 0; jcol < cols; ++jcol) {
      if (!std::getline(ss, cell, ','))
        throw ConfigError("load_transfer_csv: row " + std::to_string(i) + " too short");
      R.entries(i, jcol) = std::stod(cell);
    }
  }
  R.validate();
  return R;
}

void save_transfer_csv(const TransferMatrix& matrix, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("save_transfer_csv: cannot write " + path);
  out << "# rows=" << matrix.body_count() << " cols=" << matrix.heart_count() << "\n";
  for (int i = 0; i < matrix.entries.rows(); ++i) {
    for (int j = 0; j < matrix.entries.cols(); ++j) {
      if (j) out << ",";
      out << format_double(matrix.entries(i, j));
    }
    out << "\n";
  }
}

}  // namespace fossa
