// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include "sparsify/log.hpp"

#include <iostream>
#include <mutex>
#include <string>

namespace sparsify {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningSink& sink() {
  static WarningSink s = [](std::string_view msg) {
    std::cerr << "[sparsify] warning: " << msg << '\n';
  };
  return s;
}

}  // namespace

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (sink()) sink()(message);
}

WarningSink set_warning_sink(WarningSink s) {
  std::lock_guard lock(sink_mutex());
  WarningSink previous = std::move(sink());
  sink() = std::move(s);
  return previous;
}

}  // namespace sparsify
