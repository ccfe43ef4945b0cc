#include "voxelpipe/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "voxelpipe/errors.hpp"

namespace voxelpipe {

namespace {

constexpr char kMagic[8] = {'V', 'P', 'C', 'K', 'P', 'T', '0', '\n'};
constexpr std::uint32_t kVersion = 1;

class OffsetReader {
 public:
  OffsetReader(std::ifstream& in, const std::string& path) : in_(in), path_(path) {}

  void read(void* dst, std::size_t n, const char* what) {
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!in_ || static_cast<std::size_t>(in_.gcount()) != n) {
      throw IoError("corrupt checkpoint " + path_ + ": failed reading " + what +
                    " at byte offset " + std::to_string(offset_));
    }
    offset_ += n;
  }

  std::size_t offset() const { return offset_; }

 private:
  std::ifstream& in_;
  std::string path_;
  std::size_t offset_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open checkpoint for writing: " + path);
  }
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  const std::uint32_t count = static_cast<std::uint32_t>(entries.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, tensor] : entries) {
    const std::uint32_t name_len = static_cast<std::uint32_t>(name.size());
    out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    out.write(name.data(), name_len);
    const std::uint32_t rank = static_cast<std::uint32_t>(tensor->rank());
    out.write(reinterpret_cast<const char*>(&rank), sizeof(rank));
    for (const std::int64_t dim : tensor->shape) {
      out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    }
    out.write(reinterpret_cast<const char*>(tensor->data.data()),
              static_cast<std::streamsize>(tensor->data.size() * sizeof(float)));
  }
  if (!out) {
    throw IoError("short write to checkpoint: " + path);
  }
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open checkpoint: " + path);
  }
  OffsetReader reader(in, path);
  char magic[sizeof(kMagic)];
  reader.read(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("corrupt checkpoint " + path + ": bad magic at byte offset 0");
  }
  std::uint32_t version = 0;
  reader.read(&version, sizeof(version), "version");
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
  }
  std::uint32_t count = 0;
  reader.read(&count, sizeof(count), "entry count");
  std::map<std::string, Tensor> result;
  for (std::uint32_t e = 0; e < count; ++e) {
    std::uint32_t name_len = 0;
    reader.read(&name_len, sizeof(name_len), "entry name length");
    if (name_len == 0 || name_len > 4096) {
      throw IoError("corrupt checkpoint " + path + ": implausible name length at byte offset " +
                    std::to_string(reader.offset() - sizeof(name_len)));
    }
    std::string name(name_len, '\0');
    reader.read(name.data(), name_len, "entry name");
    std::uint32_t rank = 0;
    reader.read(&rank, sizeof(rank), "entry rank");
    if (rank > 8) {
      throw IoError("corrupt checkpoint " + path + ": implausible rank at byte offset " +
                    std::to_string(reader.offset() - sizeof(rank)));
    }
    std::vector<std::int64_t> shape(rank);
    std::int64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      reader.read(&shape[d], sizeof(std::int64_t), "entry shape");
      if (shape[d] < 1 || shape[d] > (std::int64_t{1} << 32)) {
        throw IoError("corrupt checkpoint " + path + ": implausible extent at byte offset " +
                      std::to_string(reader.offset() - sizeof(std::int64_t)));
      }
      numel *= shape[d];
    }
    Tensor t(shape);
    reader.read(t.data.data(), static_cast<std::size_t>(numel) * sizeof(float), "entry payload");
    if (!result.emplace(std::move(name), std::move(t)).second) {
      throw IoError("corrupt checkpoint " + path + ": duplicate entry name");
    }
  }
  return result;
}

std::vector<std::pair<std::string, const Tensor*>> checkpoint_entries(
    const std::vector<NamedParam<float>>& params) {
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    out.emplace_back(p.name, p.value);
  }
  return out;
}

void apply_checkpoint(const std::map<std::string, Tensor>& loaded,
                      const std::vector<NamedParam<float>>& params, bool allow_extra) {
  for (const auto& p : params) {
    const auto it = loaded.find(p.name);
    if (it == loaded.end()) {
      throw InvariantError("checkpoint is missing parameter " + p.name);
    }
    if (it->second.shape != p.value->shape) {
      throw InvariantError("checkpoint shape mismatch for parameter " + p.name);
    }
    p.value->data = it->second.data;
  }
  if (!allow_extra && loaded.size() != params.size()) {
    throw InvariantError("checkpoint holds entries not present in the model");
  }
}

}  // namespace voxelpipe
