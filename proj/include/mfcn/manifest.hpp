#pragma once

#include <string>

#include "mfcn/config.hpp"

namespace mfcn {

// SHA-256 of a file's bytes, lowercase hex.
std::string sha256_file(const std::string& path);
std::string sha256_bytes(const void* data, std::size_t len);

// Manifests are flat key-value files (same syntax as configs) recording the
// command, the config copy, the seed, the code version, the wall time, and
// one "output.<name> = <sha256>" line per artifact.
inline constexpr const char* kManifestName = "manifest.txt";
inline constexpr const char* kConfigCopyName = "config.cfg";

}  // namespace mfcn
