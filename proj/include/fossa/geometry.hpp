#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fossa/common.hpp"

namespace fossa {

// Triangulated surface. Node positions are dimensionless length units.
struct SurfaceMesh {
  std::vector<Eigen::Vector3d> nodes;
  std::vector<std::array<int, 3>> triangles;

  int node_count() const { return static_cast<int>(nodes.size()); }
  // Index bounds and degeneracy checks; throws ConfigError naming the
  // offending triangle.
  void validate() const;
};

struct GraphEdge {
  int to;
  double length;
};

// Undirected graph with positive edge lengths, stored as symmetric
// adjacency lists.
struct WeightedGraph {
  std::vector<std::vector<GraphEdge>> adjacency;

  int node_count() const { return static_cast<int>(adjacency.size()); }
  void validate() const;  // symmetry with equal lengths, all lengths > 0
};

// Dense body-from-heart observation operator, N_b x N_h.
struct TransferMatrix {
  Eigen::MatrixXd entries;

  int body_count() const { return static_cast<int>(entries.rows()); }
  int heart_count() const { return static_cast<int>(entries.cols()); }
  void validate() const;  // finite entries, positive dimensions
};

// One graph node per mesh node, one edge per unique triangle edge,
// edge length = Euclidean distance between endpoints.
WeightedGraph build_edge_graph(const SurfaceMesh& mesh);

// (L f)_i = sum_{j in N(i)} (D / d_ij) (f_j - f_i).
Eigen::VectorXd graph_laplacian_apply(const WeightedGraph& graph,
                                      const Eigen::VectorXd& field,
                                      double diffusivity);

// max_i sum_j D/d_ij; the explicit-Euler stability bound is 2 over this.
double laplacian_max_row_sum(const WeightedGraph& graph, double diffusivity);

// Dijkstra shortest-path distances from `source` along edge lengths.
// Unreachable nodes get +infinity.
Eigen::VectorXd geodesic_distances(const WeightedGraph& graph, int source);

// R_ij = kernel_scale / ||x_b,i - x_h,j||, each row normalized to unit sum.
// Throws ConfigError naming the pair if a body node coincides with a heart
// node.
TransferMatrix synth_transfer_matrix(const SurfaceMesh& heart,
                                     const SurfaceMesh& body,
                                     double kernel_scale);

// Benchmark geometry: `node_count` Fibonacci-lattice points on a sphere,
// triangulated by their convex hull. The result is a closed 2-manifold
// using every node.
SurfaceMesh make_sphere_mesh(int node_count, double radius,
                             const Eigen::Vector3d& center = Eigen::Vector3d::Zero());

// JSON mesh files: {"nodes": [[x,y,z],...], "triangles": [[i,j,k],...]}.
// `extra` entries are written as additional top-level string fields
// (provenance); readers ignore unknown keys.
SurfaceMesh load_mesh_json(const std::string& path);
void save_mesh_json(const SurfaceMesh& mesh, const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& extra = {});

// Transfer matrix CSV: first line "# rows=N_b cols=N_h", then one
// comma-separated row of R per body node.
TransferMatrix load_transfer_csv(const std::string& path);
void save_transfer_csv(const TransferMatrix& matrix, const std::string& path);

}  // namespace fossa
