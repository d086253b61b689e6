#pragma once

#include <string_view>

namespace pdp {

/// Tool version embedded in every emitted artifact.
std::string_view version() noexcept;

}  // namespace pdp
