#include "fh/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace fh {
namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 8> kMagic = {'F', 'H', 'C', 'K', 'P', 'T', '\r', '\n'};
constexpr std::array<char, 8> kEnd = {'F', 'H', 'E', 'N', 'D', '\0', '\0', '\0'};

// FNV-1a over everything before the checksum field.
std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& buf, std::size_t limit) : buf_(buf), limit_(limit) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }

  const char* take(std::size_t n) {
    if (n > limit_ - pos_) throw CheckpointError("checkpoint is truncated");
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }

  [[nodiscard]] std::size_t pos() const { return pos_; }

 private:
  const std::string& buf_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  std::string buf(kMagic.begin(), kMagic.end());
  put<std::uint32_t>(buf, kCheckpointFormatVersion);
  const std::string meta = ckpt.metadata.dump();
  put<std::uint64_t>(buf, meta.size());
  buf += meta;
  put<std::uint64_t>(buf, ckpt.arrays.size());
  for (const auto& [name, t] : ckpt.arrays) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(name.size()));
    buf += name;
    for (int d : t.shape().dims()) put<std::int32_t>(buf, d);
    buf.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
  }
  buf.append(kEnd.begin(), kEnd.end());
  put<std::uint64_t>(buf, fnv1a(buf.data(), buf.size()));

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw CheckpointError("failed writing checkpoint " + path.string() + " (disk full?)");
    }
  }
  fs::rename(tmp, path);
}

Checkpoint read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < kMagic.size() || std::memcmp(buf.data(), kMagic.data(), kMagic.size()) != 0) {
    throw CheckpointError(path.string() + " is not a checkpoint file");
  }
  if (buf.size() < kMagic.size() + kEnd.size() + sizeof(std::uint64_t) + sizeof(std::uint32_t)) {
    throw CheckpointError("checkpoint " + path.string() + " is truncated");
  }
  const std::size_t body = buf.size() - sizeof(std::uint64_t);
  Reader r(buf, body);
  r.take(kMagic.size());
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointFormatVersion) {
    throw CheckpointError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointFormatVersion) + ")");
  }

  Checkpoint ckpt;
  try {
    const auto meta_len = r.get<std::uint64_t>();
    const char* meta = r.take(meta_len);
    ckpt.metadata = nlohmann::json::parse(meta, meta + meta_len);
    const auto count = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < count; ++i) {
      const auto name_len = r.get<std::uint32_t>();
      std::string name(r.take(name_len), name_len);
      int dims[4];
      std::uint64_t numel = 1;
      for (int& d : dims) {
        d = r.get<std::int32_t>();
        if (d < 0) throw CheckpointError("negative extent in array " + name);
        if (d != 0 && numel > (buf.size() / sizeof(double)) / static_cast<std::uint64_t>(d)) {
          throw CheckpointError("array " + name + " is larger than the file");
        }
        numel *= static_cast<std::uint64_t>(d);
      }
      const char* raw = r.take(numel * sizeof(double));
      Tensor t(Shape{dims[0], dims[1], dims[2], dims[3]});
      std::memcpy(t.data(), raw, t.size() * sizeof(double));
      ckpt.arrays.emplace(std::move(name), std::move(t));
    }
    if (std::memcmp(r.take(kEnd.size()), kEnd.data(), kEnd.size()) != 0) {
      throw CheckpointError("checkpoint end marker missing");
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint metadata is corrupt: " + std::string(e.what()));
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  if (r.pos() != body) throw CheckpointError(path.string() + ": trailing bytes after end marker");
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + body, sizeof(stored));
  if (stored != fnv1a(buf.data(), body)) throw CheckpointError(path.string() + ": checksum mismatch");
  return ckpt;
}

}  // namespace fh
