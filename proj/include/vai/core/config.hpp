#pragma once

#include <map>
#include <string>
#include <vector>

#include "vai/core/errors.hpp"

namespace vai {

// Line-oriented `section.key = value` configuration. Keys are declared with a
// type and default before parsing; anything undeclared is rejected by name.
class Config {
 public:
  enum class Kind { Int, Real, Bool, String };

  void define_int(const std::string& key, long def);
  void define_real(const std::string& key, double def);
  void define_bool(const std::string& key, bool def);
  void define_string(const std::string& key, const std::string& def);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  long get_int(const std::string& key) const;
  double get_real(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;

  // Parses a config file; `# comments` and blank lines are ignored.
  void load_file(const std::string& path);
  void parse_text(const std::string& text, const std::string& origin);

  // Deterministic: keys in declaration order. parse(serialize()) is identity.
  std::string serialize() const;

  const std::vector<std::string>& keys() const { return order_; }

  // Full pipeline schema with every default.
  static Config pipeline_defaults();

 private:
  struct Entry {
    Kind kind;
    std::string value;  // canonical textual form
  };
  void define(const std::string& key, Kind kind, const std::string& def);
  const Entry& entry(const std::string& key) const;

  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

}  // namespace vai
