#include "cage/weight_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "cage/errors.hpp"

namespace cage {

namespace {

static_assert(std::endian::native == std::endian::little,
              "weight container i/o assumes a little-endian host");

constexpr char kMagic[4] = {'C', 'A', 'G', 'E'};

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <class T>
T take(std::istream& in, const std::string& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (in.gcount() != sizeof value)
    throw WeightFormatError(WeightFormatError::Kind::Truncated, path + ": truncated weight file");
  return value;
}

}  // namespace

void save_weights(const std::string& path, const WeightStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kWeightFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, tensor] : store) {  // std::map iterates in name order
    if (name.size() > UINT16_MAX) throw ValueError("tensor name too long: " + name);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.rank()));
    for (int d = 0; d < tensor.rank(); ++d)
      put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.dim(d)));
    out.write(reinterpret_cast<const char*>(tensor.data()),
              static_cast<std::streamsize>(tensor.size() * sizeof(float)));
  }
  if (!out) throw IoError("short write to " + path);
}

WeightStore load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw WeightFormatError(WeightFormatError::Kind::BadMagic,
                            path + ": not a CAGE weight file");
  const auto version = take<std::uint32_t>(in, path);
  if (version != kWeightFormatVersion)
    throw WeightFormatError(WeightFormatError::Kind::BadVersion,
                            path + ": unsupported weight format version " +
                                std::to_string(version));
  const auto count = take<std::uint32_t>(in, path);
  WeightStore store;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = take<std::uint16_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (in.gcount() != name_len)
      throw WeightFormatError(WeightFormatError::Kind::Truncated, path + ": truncated weight file");
    const auto rank = take<std::uint8_t>(in, path);
    if (rank == 0)
      throw WeightFormatError(WeightFormatError::Kind::Truncated,
                              path + ": tensor " + name + " has rank 0");
    Shape shape(rank);
    std::int64_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<int>(take<std::uint32_t>(in, path));
      if (d < 1)
        throw WeightFormatError(WeightFormatError::Kind::Truncated,
                                path + ": tensor " + name + " has a zero dimension");
      numel *= d;
    }
    std::vector<float> data(static_cast<std::size_t>(numel));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(data.size() * sizeof(float)))
      throw WeightFormatError(WeightFormatError::Kind::Truncated, path + ": truncated weight file");
    store[name] = Tensorf::from_data(std::move(shape), std::move(data));
  }
  return store;
}

}  // namespace cage
