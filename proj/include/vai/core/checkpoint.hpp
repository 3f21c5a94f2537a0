#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vai/core/tensor.hpp"

namespace vai {

// Versioned model container: a text header (kind, metadata, array directory)
// followed by raw little-endian float32 blobs in directory order. Writing is
// deterministic, so identical models produce identical bytes.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  std::string kind;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Tensor>> arrays;

  void add_meta(const std::string& key, const std::string& value);
  std::string meta_value(const std::string& key) const;  // throws if absent
  void add_array(const std::string& name, const Tensor& t);
  const Tensor& array(const std::string& name) const;    // throws if absent

  void save(const std::string& path) const;
  // MissingArtifactError when the file does not exist; std::runtime_error on
  // corrupt or wrong-version content.
  static Checkpoint load(const std::string& path, const std::string& expected_kind = "");
};

}  // namespace vai
