#pragma once

namespace sarnarrator {
inline constexpr const char* kPipelineVersion = "1.0.0";
}
