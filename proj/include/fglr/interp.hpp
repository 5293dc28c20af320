#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "fglr/camera.hpp"
#include "fglr/imgcore.hpp"

namespace fglr {

struct StencilTap {
  int x = 0;
  int y = 0;
  double weight = 0.0;
};

/// Linear interpolation stencil of one channel at a real Bayer location.
/// Red and blue use bilinear weights on their spacing-2 lattice; green uses
/// inverse squared distance weights over the 4 nearest green sites. When
/// part of the stencil falls outside the grid the nearest in-bounds sample
/// of that channel is used alone.
std::vector<StencilTap> interpolation_stencil(Vec2 p, Channel channel, int width, int height,
                                              CfaLayout layout);

/// Sparse N x M interpolation operator from a Bayer window y to one channel
/// of a rectified patch. Stored row-compressed.
class InterpOperator {
 public:
  InterpOperator() = default;
  InterpOperator(int rows, int cols, std::vector<int> row_ptr, std::vector<int> col_index,
                 std::vector<double> values);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t nonzeros() const { return values_.size(); }

  std::span<const int> row_ptr() const { return row_ptr_; }
  std::span<const int> col_index() const { return col_index_; }
  std::span<const double> values() const { return values_; }

  Channel channel() const { return channel_; }
  const Rect& patch() const { return patch_; }
  const Rect& window() const { return window_; }

  /// Hy. Throws DimensionError when y.size() != cols().
  std::vector<double> apply(std::span<const double> y) const;

 private:
  friend InterpOperator build_H(const MappingTable&, const Rect&, const Rect&, Channel);

  int rows_ = 0;
  int cols_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> col_index_;
  std::vector<double> values_;
  Channel channel_ = Channel::red;
  Rect patch_{};
  Rect window_{};
};

inline constexpr int kWindowMargin = 2;

/// Bounding box of the mapped locations of the patch's valid pixels, dilated
/// by `margin`, aligned outward to whole RGGB quads and clipped to the grid.
/// Empty when the patch has no valid pixel.
Rect neighborhood_window(const MappingTable& table, const Rect& patch,
                         int margin = kWindowMargin);

/// Window samples in row-major order (the vector y).
std::vector<double> gather_window(const BayerImage& bayer, const Rect& window);

InterpOperator build_H(const MappingTable& table, const Rect& patch, const Rect& window,
                       Channel channel);
/// Convenience overload building the default neighborhood window. The Bayer
/// image is only used to check that it matches the table.
InterpOperator build_H(const MappingTable& table, const BayerImage& bayer, const Rect& patch,
                       Channel channel);

std::vector<double> apply_H(const InterpOperator& h, std::span<const double> y);

/// Matrix Market coordinate dump (1-based indices) for offline inspection.
void write_matrix_market(const InterpOperator& h, const std::filesystem::path& path);

}  // namespace fglr
