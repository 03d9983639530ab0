// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <functional>
#include <string_view>

namespace sparsify {

using WarningSink = std::function<void(std::string_view)>;

/// Emits a diagnostic. Defaults to stderr.
void warn(std::string_view message);

/// Replaces the warning sink and returns the previous one. An empty sink
/// silences warnings.
WarningSink set_warning_sink(WarningSink sink);

}  // namespace sparsify
