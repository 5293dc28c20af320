#pragma once

#include <string>
#include <string_view>

#include "fglr/camera.hpp"
#include "fglr/imgcore.hpp"

namespace fglr {

/// Demosaicker of a two-stage baseline; rectification is always bilinear.
enum class BaselineKind { bilinear, hql };

BaselineKind parse_baseline_kind(std::string_view name);
const char* baseline_name(BaselineKind kind);

/// Missing samples are the mean of the in-bounds same-channel sites among the
/// 8 neighbors; known samples are copied.
PlanarImage demosaic_bilinear(const BayerImage& b);

/// 5x5 gradient-corrected linear filters (alpha 1/2, beta 5/8, gamma 3/4)
/// with reflect-101 borders, clamped to [0, 1]. Needs both sides >= 5.
PlanarImage demosaic_hql(const BayerImage& b, bool clamp_output = true);

/// The 5x5 filter (row-major, already divided by 8) producing `target` at a
/// site of color `site`. The identity filter for target == channel_of(site).
std::array<double, 25> hql_kernel(Channel target, CfaColor site);

/// Bilinear sample of `img` at every valid mapped location; 0 elsewhere.
PlanarImage rectify_bilinear(const PlanarImage& img, const MappingTable& table);

PlanarImage run_baseline(const BayerImage& b, const MappingTable& table, BaselineKind kind);

}  // namespace fglr
