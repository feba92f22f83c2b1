#pragma once

// Not installed. Test hooks for the region growing engine.

#include <tracegrow/rgr.h>

namespace tracegrow::detail {

enum class CentroidMode { Online, Frozen };

ClusterMap growClusters(const LabColorPlane& lab, std::span<const Seed> seeds,
                        const RgrConfig& config, CentroidMode mode);

} // namespace tracegrow::detail
