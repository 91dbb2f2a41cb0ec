#include "s2s/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "s2s/errors.hpp"

namespace s2s {

namespace {

constexpr char kMagic[8] = {'S', '2', 'S', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  ensure(static_cast<bool>(is), "checkpoint: truncated while reading ", what);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointData& data) {
  std::ofstream os(path, std::ios::binary);
  ensure(os.good(), "checkpoint: cannot open ", path, " for writing");
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kVersion);
  write_pod(os, static_cast<std::uint64_t>(data.size()));
  for (const auto& e : data) {
    write_pod(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_pod(os, static_cast<std::uint32_t>(e.tensor.rank()));
    for (int d = 0; d < e.tensor.rank(); ++d) {
      write_pod(os, static_cast<std::uint64_t>(e.tensor.dim(d)));
    }
    os.write(reinterpret_cast<const char*>(e.tensor.data()),
             static_cast<std::streamsize>(e.tensor.numel() * sizeof(double)));
  }
  ensure(os.good(), "checkpoint: write failed for ", path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  ensure(is.good(), "checkpoint: cannot open ", path);
  char magic[8];
  is.read(magic, sizeof(magic));
  ensure(static_cast<bool>(is) && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
         "checkpoint: bad magic in ", path);
  auto version = read_pod<std::uint32_t>(is, "version");
  ensure(version == kVersion, "checkpoint: unsupported version ", version, " in ", path);
  auto count = read_pod<std::uint64_t>(is, "entry count");

  CheckpointData data;
  data.reserve(count);
  for (std::uint64_t n = 0; n < count; ++n) {
    auto name_len = read_pod<std::uint32_t>(is, "name length");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    ensure(static_cast<bool>(is), "checkpoint: truncated name in ", path);
    auto rank = read_pod<std::uint32_t>(is, "rank");
    std::vector<int> shape(rank);
    std::int64_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<int>(read_pod<std::uint64_t>(is, "extent"));
      numel *= d;
    }
    std::vector<double> values(static_cast<std::size_t>(numel));
    is.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    ensure(static_cast<bool>(is), "checkpoint: truncated payload for ", name, " in ", path);
    data.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  return data;
}

CheckpointData snapshot(const std::vector<nn::Parameter*>& params) {
  CheckpointData data;
  data.reserve(params.size());
  for (const nn::Parameter* p : params) data.push_back({p->name, p->value});
  return data;
}

void save_checkpoint(const std::string& path, const std::vector<nn::Parameter*>& params) {
  save_checkpoint(path, snapshot(params));
}

void load_into(const CheckpointData& data, const std::vector<nn::Parameter*>& params) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& e : data) by_name[e.name] = &e.tensor;
  ensure(by_name.size() == data.size(), "checkpoint: duplicate entry names");
  ensure(params.size() == data.size(), "checkpoint: expected ", params.size(), " entries, found ",
         data.size());
  for (nn::Parameter* p : params) {
    auto it = by_name.find(p->name);
    ensure(it != by_name.end(), "checkpoint: missing parameter ", p->name);
    ensure(it->second->shape() == p->value.shape(), "checkpoint: shape mismatch for ", p->name,
           ": model ", p->value.shape_str(), " vs file ", it->second->shape_str());
    p->value = *it->second;
    p->zero_grad();
  }
}

const Tensor* find_entry(const CheckpointData& data, const std::string& name) {
  for (const auto& e : data) {
    if (e.name == name) return &e.tensor;
  }
  return nullptr;
}

}  // namespace s2s
