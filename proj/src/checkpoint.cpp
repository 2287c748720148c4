#include "mosaic/checkpoint.hpp"

#include <cstdint>
#include <fstream>

namespace mosaic {

namespace {

constexpr char kMagic[9] = "MOSAICK1";

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

long long count_parameters(std::span<const Parameter* const> params) {
  long long n = 0;
  for (const Parameter* p : params) n += static_cast<long long>(p->size());
  return n;
}

Vector flatten_values(std::span<const Parameter* const> params) {
  Vector flat(count_parameters(params));
  Eigen::Index at = 0;
  for (const Parameter* p : params)
    for (Eigen::Index i = 0; i < p->value.rows(); ++i)
      for (Eigen::Index j = 0; j < p->value.cols(); ++j)
        flat(at++) = p->value(i, j);
  return flat;
}

Vector flatten_grads(std::span<const Parameter* const> params) {
  Vector flat(count_parameters(params));
  Eigen::Index at = 0;
  for (const Parameter* p : params)
    for (Eigen::Index i = 0; i < p->grad.rows(); ++i)
      for (Eigen::Index j = 0; j < p->grad.cols(); ++j)
        flat(at++) = p->grad(i, j);
  return flat;
}

void set_values(std::span<Parameter* const> params, const Vector& flat) {
  require(flat.size() == count_parameters({params.data(), params.size()}),
          "set_values: size mismatch");
  Eigen::Index at = 0;
  for (Parameter* p : params)
    for (Eigen::Index i = 0; i < p->value.rows(); ++i)
      for (Eigen::Index j = 0; j < p->value.cols(); ++j)
        p->value(i, j) = flat(at++);
}

void save_checkpoint(const std::string& path,
                     std::span<const Parameter* const> params) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "save_checkpoint: cannot open " + path);
  os.write(kMagic, 8);
  write_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    write_u32(os, static_cast<std::uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_u32(os, static_cast<std::uint32_t>(p->value.rows()));
    write_u32(os, static_cast<std::uint32_t>(p->value.cols()));
    for (Eigen::Index i = 0; i < p->value.rows(); ++i)
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
        double v = p->value(i, j);
        os.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
  }
  require(os.good(), "save_checkpoint: write failed for " + path);
}

void load_checkpoint(const std::string& path,
                     std::span<Parameter* const> params) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "load_checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  require(is.good() && std::string(magic, 8) == kMagic,
          "load_checkpoint: bad magic in " + path);
  std::uint32_t count = read_u32(is);
  require(count == params.size(),
          "load_checkpoint: parameter count mismatch in " + path);
  for (Parameter* p : params) {
    std::uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    require(name == p->name,
            "load_checkpoint: expected parameter '" + p->name + "', found '" +
                name + "'");
    std::uint32_t rows = read_u32(is), cols = read_u32(is);
    require(rows == p->value.rows() && cols == p->value.cols(),
            "load_checkpoint: shape mismatch for " + p->name);
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j) {
        double v = 0;
        is.read(reinterpret_cast<char*>(&v), sizeof(v));
        p->value(i, j) = v;
      }
  }
  require(is.good(), "load_checkpoint: truncated file " + path);
}

}  // namespace mosaic
