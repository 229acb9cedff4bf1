#pragma once

#include <string>

#include "dsmpc/model.hpp"

namespace dsmpc {

/// Parses a model from its JSON text. Required keys: A, B, W, C (row-major
/// nested arrays), Q, R, x_ref, u_ref (flat arrays), t, e, gamma (numbers),
/// N (integer). Optional: K (defaults to the LQ gain for (A, B, Q, R)).
/// Malformed documents throw ParseError; shape problems surface later as
/// DimensionMismatch from validate().
SystemModel model_from_json_text(const std::string& text);

/// Reads and parses a model file. Unreadable files throw ParseError.
SystemModel load_model(const std::string& path);

/// Canonical JSON text of a model (sorted keys, full precision). Inverse of
/// model_from_json_text up to floating-point round-trip.
std::string model_to_json_text(const SystemModel& model);

/// FNV-1a 64-bit hash of the canonical JSON text, as fixed-width hex.
/// Stable across runs and platforms; used to stamp outputs.
std::string model_hash(const SystemModel& model);

}  // namespace dsmpc
