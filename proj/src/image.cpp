#include <tracegrow/image.h>

#include <algorithm>

namespace tracegrow {

std::size_t TraceRaster::labeledCount() const noexcept {
    const auto v = values();
    return static_cast<std::size_t>(
        std::count_if(v.begin(), v.end(), [](std::uint8_t x) { return x != kUnlabeled; }));
}

} // namespace tracegrow
