#pragma once

#include <stdexcept>
#include <string>

namespace vai {

// Bad config file / CLI usage. CLI exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A required upstream artifact (dataset, checkpoint) is missing. CLI exit code 2.
struct MissingArtifactError : std::runtime_error {
  explicit MissingArtifactError(const std::string& path, const std::string& hint)
      : std::runtime_error("missing artifact: " + path + " (" + hint + ")"), path(path) {}
  std::string path;
};

// Training produced a non-finite loss. CLI exit code 3.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, long step)
      : std::runtime_error(what + " diverged (non-finite loss) at step " +
                           std::to_string(step)),
        step(step) {}
  long step;
};

}  // namespace vai
