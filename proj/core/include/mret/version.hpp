#pragma once

namespace mret {

/// Tool/library version; embedded in every output header for auditability.
const char* version();

}  // namespace mret
