#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "eli/encoder.hpp"
#include "eli/nn.hpp"

namespace eli {

/// On-disk model container shared by all learned components.
struct Checkpoint {
  static constexpr int kFormat = 1;

  std::string kind;  // "tagger", "evidence", "linker" or "inference"
  EncoderConfig encoder;
  std::map<std::string, std::string> config;  // echo of training settings
  std::vector<std::string> labels;
  std::map<std::string, Matrix> params;

  const Matrix& param(const std::string& name) const;
  double number(const std::string& key) const;
};

/// Writes JSON with round-trip exact doubles; throws IoError.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws IoError, or ParseError for a malformed file or a format other
/// than 1. When `expected_kind` is non-empty the kind must match.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::string& expected_kind = "");

/// Packs a linear head as `head.weights`, `head.bias`, with its input
/// scale under config key `input_scale`.
Checkpoint head_checkpoint(const std::string& kind, const EncoderConfig& encoder,
                           const LinearHead& head, std::vector<std::string> labels);
/// Inverse of head_checkpoint; checks kind and label count.
LinearHead head_from_checkpoint(const Checkpoint& ckpt, const std::string& kind,
                                std::size_t num_labels);

}  // namespace eli
