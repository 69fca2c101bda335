#pragma once

// File formats.
//
// SystemFile (JSON):
//   {"L": 2, "Lprime": 2, "K": 3, "p": [..L reals..],
//    "channels": [ [[w(1|1), .., w(1|L)], .., [w(L'|1), .., w(L'|L)]], ..K.. ]}
//   Each channel is stored row-major as [output][input].
//
// SampleFile (CSV): header "t,y1,...,yK", then one row per observation with
//   t = 1, 2, ... and 1-based output symbols.
//
// TensorFile (JSON): {"shape": [L1, .., Lm], "values": [..]} with the last
//   axis varying fastest.
//
// ResultFile (JSON): recovered system, objective, convergence flags, the full
//   inversion config (including seed), per-restart log and library version.
//
// Reals are written in the shortest decimal form that parses back to the
// same double. Every writer replaces its target atomically.

#include "dcs/inversion.hpp"
#include "dcs/sampling.hpp"
#include "dcs/tensor_core.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace dcs {

inline constexpr const char* kVersion = "0.1.0";

/// Filesystem failure (unreadable or unwritable path).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ResultDocument {
  InversionResult result;
  InversionConfig config;
  std::string version = kVersion;
};

std::string system_to_string(const DCSystem& system);
DCSystem system_from_string(const std::string& text);

std::string samples_to_string(const SampleBatch& batch);
/// output_size defaults to the largest symbol present.
SampleBatch samples_from_string(const std::string& text,
                                std::optional<std::size_t> output_size = std::nullopt);

std::string tensor_to_string(const JointTensor& t);
JointTensor tensor_from_string(const std::string& text);

std::string result_to_string(const ResultDocument& doc);
ResultDocument result_from_string(const std::string& text);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

inline DCSystem load_system(const std::filesystem::path& p) { return system_from_string(read_file(p)); }
inline void save_system(const std::filesystem::path& p, const DCSystem& s) {
  write_file_atomic(p, system_to_string(s));
}

}  // namespace dcs
