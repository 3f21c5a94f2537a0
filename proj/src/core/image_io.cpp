#include "vai/core/image_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace vai {

namespace {

void write_header(std::ofstream& f, const char* magic, int w, int h) {
  f << magic << "\n" << w << " " << h << "\n255\n";
}

// Reads magic + dimensions + maxval, skipping whitespace and '#' comments.
void read_header(std::ifstream& f, const std::string& path, const char* magic,
                 int& w, int& h) {
  std::string m;
  f >> m;
  if (m != magic)
    throw std::runtime_error(path + ": expected " + magic + " image, got '" + m + "'");
  int maxval = 0;
  int vals[3];
  for (int i = 0; i < 3; ++i) {
    f >> std::ws;
    while (f.peek() == '#') {
      std::string line;
      std::getline(f, line);
      f >> std::ws;
    }
    if (!(f >> vals[i])) throw std::runtime_error(path + ": truncated image header");
  }
  w = vals[0];
  h = vals[1];
  maxval = vals[2];
  if (maxval != 255) throw std::runtime_error(path + ": only 8-bit images supported");
  f.get();  // single whitespace after maxval
}

}  // namespace

void save_ppm(const std::string& path, const Frame& frame) {
  if (frame.rank() != 3 || frame.dim(2) != 3)
    throw std::invalid_argument("save_ppm: frame must be {H,W,3}, got " + frame.shape_str());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_ppm: cannot open " + path);
  const int h = frame.dim(0), w = frame.dim(1);
  write_header(f, "P6", w, h);
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w * 3);
  for (std::size_t i = 0; i < buf.size(); ++i)
    buf[i] = static_cast<unsigned char>(clamp01(frame.v[i]) * 255.0f + 0.5f);
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("save_ppm: write failed for " + path);
}

Frame load_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_ppm: cannot open " + path);
  int w = 0, h = 0;
  read_header(f, path, "P6", w, h);
  Frame frame({h, w, 3});
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w * 3);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (f.gcount() != static_cast<std::streamsize>(buf.size()))
    throw std::runtime_error("load_ppm: truncated pixel data in " + path);
  for (std::size_t i = 0; i < buf.size(); ++i)
    frame.v[i] = static_cast<float>(buf[i]) / 255.0f;
  return frame;
}

void save_pgm(const std::string& path, const Tensor& img) {
  if (img.rank() != 2)
    throw std::invalid_argument("save_pgm: image must be {H,W}, got " + img.shape_str());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_pgm: cannot open " + path);
  const int h = img.dim(0), w = img.dim(1);
  write_header(f, "P5", w, h);
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w);
  for (std::size_t i = 0; i < buf.size(); ++i)
    buf[i] = static_cast<unsigned char>(clamp01(img.v[i]) * 255.0f + 0.5f);
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("save_pgm: write failed for " + path);
}

Tensor load_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_pgm: cannot open " + path);
  int w = 0, h = 0;
  read_header(f, path, "P5", w, h);
  Tensor img({h, w});
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (f.gcount() != static_cast<std::streamsize>(buf.size()))
    throw std::runtime_error("load_pgm: truncated pixel data in " + path);
  for (std::size_t i = 0; i < buf.size(); ++i)
    img.v[i] = static_cast<float>(buf[i]) / 255.0f;
  return img;
}

}  // namespace vai
