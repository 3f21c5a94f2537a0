#include "vai/core/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vai/core/errors.hpp"

namespace vai {

namespace {
constexpr const char* kMagic = "vai-checkpoint";
}

void Checkpoint::add_meta(const std::string& key, const std::string& value) {
  meta.emplace_back(key, value);
}

std::string Checkpoint::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  throw std::runtime_error("checkpoint: missing metadata key '" + key + "'");
}

void Checkpoint::add_array(const std::string& name, const Tensor& t) {
  arrays.emplace_back(name, t);
}

const Tensor& Checkpoint::array(const std::string& name) const {
  for (const auto& [n, t] : arrays)
    if (n == name) return t;
  throw std::runtime_error("checkpoint: missing array '" + name + "'");
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open for write: " + path);
  f << kMagic << "\n";
  f << "version = " << kFormatVersion << "\n";
  f << "kind = " << kind << "\n";
  for (const auto& [k, v] : meta) f << "meta." << k << " = " << v << "\n";
  f << "arrays = " << arrays.size() << "\n";
  for (const auto& [name, t] : arrays) {
    f << "array " << name << " ";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
      if (i) f << ",";
      f << t.shape[i];
    }
    f << "\n";
  }
  f << "data\n";
  for (const auto& [name, t] : arrays) {
    (void)name;
    f.write(reinterpret_cast<const char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(float)));
  }
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path, const std::string& expected_kind) {
  if (!std::filesystem::exists(path))
    throw MissingArtifactError(path, "checkpoint not found");
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);

  auto fail = [&](const std::string& why) -> std::runtime_error {
    return std::runtime_error("checkpoint " + path + ": " + why);
  };

  std::string line;
  if (!std::getline(f, line) || line != kMagic) throw fail("bad magic");
  if (!std::getline(f, line) || line.rfind("version = ", 0) != 0)
    throw fail("missing version field");
  int version = std::atoi(line.c_str() + 10);
  if (version != kFormatVersion)
    throw fail("unsupported version " + std::to_string(version));

  Checkpoint ck;
  if (!std::getline(f, line) || line.rfind("kind = ", 0) != 0) throw fail("missing kind");
  ck.kind = line.substr(7);
  if (!expected_kind.empty() && ck.kind != expected_kind)
    throw fail("expected kind '" + expected_kind + "', got '" + ck.kind + "'");

  while (std::getline(f, line) && line.rfind("meta.", 0) == 0) {
    std::size_t eq = line.find(" = ");
    if (eq == std::string::npos) throw fail("malformed meta line: " + line);
    ck.meta.emplace_back(line.substr(5, eq - 5), line.substr(eq + 3));
  }
  if (line.rfind("arrays = ", 0) != 0) throw fail("missing array count");
  long n_arrays = std::atol(line.c_str() + 9);

  for (long i = 0; i < n_arrays; ++i) {
    if (!std::getline(f, line) || line.rfind("array ", 0) != 0)
      throw fail("truncated array directory");
    std::istringstream ls(line.substr(6));
    std::string name, dims;
    ls >> name >> dims;
    std::vector<int> shape;
    std::stringstream ds(dims);
    std::string d;
    while (std::getline(ds, d, ',')) shape.push_back(std::atoi(d.c_str()));
    ck.arrays.emplace_back(name, Tensor(shape));
  }
  if (!std::getline(f, line) || line != "data") throw fail("missing data marker");

  for (auto& [name, t] : ck.arrays) {
    f.read(reinterpret_cast<char*>(t.v.data()),
           static_cast<std::streamsize>(t.v.size() * sizeof(float)));
    if (f.gcount() != static_cast<std::streamsize>(t.v.size() * sizeof(float)))
      throw fail("truncated data for array '" + name + "'");
  }
  return ck;
}

}  // namespace vai
