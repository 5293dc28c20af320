#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "fglr/camera.hpp"
#include "fglr/imgcore.hpp"

namespace fglr {

/// Correlation of color gradients between Bayer sub-channels, clamped to
/// [0, 1]. Same-channel factors are 1.
struct ChannelCorrelation {
  double rb = 1.0;
  double rg = 1.0;  // max(rho(R, G1), rho(R, G2))
  double bg = 1.0;  // max(rho(B, G1), rho(B, G2))

  double factor(Channel target, Channel observed) const;
};

/// Pearson coefficients between the R, G1, G2 and B sub-planes of an
/// even-sized Bayer patch. Constant sub-planes correlate as 0.
ChannelCorrelation compute_correlation(const BayerImage& patch);

/// One noisy observation of the gradient between the mapped locations s and t
/// of a rectified pair, taken from an adjacent same-color pair (m, n). The
/// pair is stored oriented so that cos_theta >= 0 and delta = y_m - y_n.
struct GradientObservation {
  double delta = 0.0;
  double weight = 0.0;
  double cos_theta = 0.0;
  Pixel m;
  Pixel n;
  CfaColor color = CfaColor::red;
};

enum class DistanceKernel {
  product,  // exp(-|ls-lm|^2 |lt-ln|^2 / sigma_v^2)
  sum,      // exp(-(|ls-lm|^2 + |lt-ln|^2) / sigma_v^2)
};

struct ObservationOptions {
  double sigma_v = 1.5;
  double radius = 3.0;  // Chebyshev radius around the midpoint of (s, t)
  DistanceKernel kernel = DistanceKernel::product;
  /// Scale delta by |l_t - l_s| / |l_n - l_m|.
  bool normalize_distance = false;
};

inline constexpr double kMinObservationWeight = 1e-12;

/// Observation from the pair (m, n) with weight kernel * cos_theta * rho.
/// Returns nullopt when the weight is <= 1e-12 or s and t coincide.
std::optional<GradientObservation> make_observation(Vec2 ls, Vec2 lt, Pixel m, Pixel n,
                                                    CfaColor color, double ym, double yn,
                                                    Pairing pairing, double rho,
                                                    const ObservationOptions& opts);

/// Observations for rectified neighbors i and j (Chebyshev distance 1), both
/// valid in the table. rho is taken from `corr` for the target channel.
std::vector<GradientObservation> collect_observations(const MappingTable& table,
                                                      const BayerImage& bayer, Pixel i,
                                                      Pixel j, Channel target,
                                                      const ChannelCorrelation& corr,
                                                      const ObservationOptions& opts);

/// As collect_observations with rho = 1 for every channel; callers apply the
/// correlation per target channel themselves.
std::vector<GradientObservation> collect_geometric_observations(const MappingTable& table,
                                                                const BayerImage& bayer,
                                                                Pixel i, Pixel j,
                                                                const ObservationOptions& opts);

/// Weighted average of the observations; nullopt when the total weight is 0.
std::optional<double> mle_gradient(std::span<const GradientObservation> obs);

/// exp(-delta^2 / sigma_w^2). Throws ConfigError for sigma_w <= 0.
double edge_weight(double delta, double sigma_w);

struct GraphEdge {
  int i = 0;
  int j = 0;
  double w = 0.0;
};

/// Weighted undirected graph with its combinatorial Laplacian L = D - W in
/// row-compressed form (diagonal included).
class PatchGraph {
 public:
  PatchGraph() = default;

  int nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }

  std::span<const int> row_ptr() const { return row_ptr_; }
  std::span<const int> col_index() const { return col_index_; }
  std::span<const double> values() const { return values_; }

  double degree(int i) const { return degree_[static_cast<std::size_t>(i)]; }
  double max_degree() const;

  /// out = L x
  void apply(std::span<const double> x, std::span<double> out) const;
  std::vector<double> apply(std::span<const double> x) const;
  /// x^T L x through the assembled matrix.
  double quadratic_form(std::span<const double> x) const;
  /// Sum over edges of w (x_i - x_j)^2.
  double smoothness(std::span<const double> x) const;

  /// Row-major dense copy of L.
  std::vector<double> dense() const;

 private:
  friend PatchGraph build_laplacian(int, std::vector<GraphEdge>);

  int nodes_ = 0;
  std::vector<GraphEdge> edges_;
  std::vector<int> row_ptr_{0};
  std::vector<int> col_index_;
  std::vector<double> values_;
  std::vector<double> degree_;
};

/// Duplicate edges keep the last weight (a warning is logged). Throws on
/// self loops, out-of-range nodes and weights outside [0, 1].
PatchGraph build_laplacian(int nodes, std::vector<GraphEdge> edges);

/// 8-connected edges of a width x height grid between nodes flagged valid
/// (row-major node index); weights are left at 1.
std::vector<GraphEdge> grid_topology(int width, int height, std::span<const std::uint8_t> valid);

/// Same topology, weights exp(-(x_i - x_j)^2 / sigma_w^2).
PatchGraph rebuild_from_signal(const PatchGraph& graph, std::span<const double> x,
                               double sigma_w);

/// CSV dump "i,j,w" for visualization.
void write_edge_csv(const PatchGraph& graph, const std::filesystem::path& path);

}  // namespace fglr
