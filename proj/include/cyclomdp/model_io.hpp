#pragma once

#include <string>

#include "cyclomdp/chain.hpp"
#include "cyclomdp/quantile.hpp"

namespace cyclomdp {

// Versioned, self-describing JSON model files. Doubles are serialized with
// shortest-round-trip formatting, so save/load round-trips are exact.
// Writes are atomic (temp file + rename).

void save_quantile_family(const QuantileFamily& family,
                          const std::string& path);
QuantileFamily load_quantile_family(const std::string& path);

void save_transition_model(const PeriodicTransitionModel& model,
                           const std::string& path);
PeriodicTransitionModel load_transition_model(const std::string& path);

// Streamed FNV-1a hash of a file's bytes, for pipeline stage stamps.
std::uint64_t hash_file(const std::string& path);

// Write-temp-then-rename, so partially written artifacts never appear.
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace cyclomdp
