#include "ditra/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "ditra/error.hpp"

namespace ditra {

namespace {
constexpr char kMagic[4] = {'V', 'W', 'T', '1'};
constexpr int kMaxRank = 8;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &d, sizeof bits);
  for (int i = 0; i < 8; ++i) out.push_back(char((bits >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw CheckpointError(CheckpointError::Kind::truncated,
                            "checkpoint ends mid-record");
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = std::uint16_t(std::uint8_t(buf[pos])) |
                      std::uint16_t(std::uint8_t(buf[pos + 1])) << 8;
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= std::uint32_t(std::uint8_t(buf[pos + std::size_t(i)])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return std::uint8_t(buf[pos++]);
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= std::uint64_t(std::uint8_t(buf[pos + std::size_t(i)])) << (8 * i);
    pos += 8;
    double d = 0;
    std::memcpy(&d, &bits, sizeof d);
    return d;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};
}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

const Digest* Checkpoint::find_hash(const std::string& name) const {
  for (const auto& [n, d] : frozen_hashes)
    if (n == name) return &d;
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, std::uint32_t(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    if (name.empty() || name.size() > std::numeric_limits<std::uint16_t>::max())
      throw CheckpointError(CheckpointError::Kind::malformed,
                            "tensor name unusable: '" + name + "'");
    if (!t.defined() || t.rank() == 0 || t.rank() > kMaxRank)
      throw CheckpointError(CheckpointError::Kind::malformed,
                            "tensor '" + name + "' has unusable rank");
    put_u16(out, std::uint16_t(name.size()));
    out += name;
    out.push_back(char(t.rank()));
    for (int e : t.shape()) put_u32(out, std::uint32_t(e));
    for (double v : t.values()) put_f64(out, v);
  }
  put_u32(out, std::uint32_t(ck.config_text.size()));
  out += ck.config_text;
  put_u32(out, std::uint32_t(ck.frozen_hashes.size()));
  for (const auto& [name, dig] : ck.frozen_hashes) {
    put_u16(out, std::uint16_t(name.size()));
    out += name;
    out.append(reinterpret_cast<const char*>(dig.data()), dig.size());
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write checkpoint: " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw ConfigError("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());

  Reader r{buf};
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw CheckpointError(CheckpointError::Kind::bad_magic,
                          "not a checkpoint file: " + path);
  r.pos = 4;

  Checkpoint ck;
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::uint16_t name_len = r.u16();
    if (name_len == 0)
      throw CheckpointError(CheckpointError::Kind::malformed,
                            "empty tensor name");
    std::string name = r.bytes(name_len);
    const int rank = r.u8();
    if (rank == 0 || rank > kMaxRank)
      throw CheckpointError(CheckpointError::Kind::malformed,
                            "tensor '" + name + "' has unusable rank");
    std::vector<int> shape;
    std::size_t total = 1;
    for (int d = 0; d < rank; ++d) {
      const std::uint32_t e = r.u32();
      if (e == 0 || e > (1u << 24))
        throw CheckpointError(CheckpointError::Kind::malformed,
                              "tensor '" + name + "' has unusable extent");
      shape.push_back(int(e));
      total *= e;
    }
    std::vector<double> vals(total);
    for (std::size_t k = 0; k < total; ++k) vals[k] = r.f64();
    ck.tensors.emplace_back(std::move(name),
                            Tensor::from(std::move(shape), std::move(vals)));
  }
  const std::uint32_t cfg_len = r.u32();
  ck.config_text = r.bytes(cfg_len);
  const std::uint32_t n_digests = r.u32();
  for (std::uint32_t i = 0; i < n_digests; ++i) {
    const std::uint16_t name_len = r.u16();
    std::string name = r.bytes(name_len);
    std::string raw = r.bytes(32);
    Digest d{};
    std::memcpy(d.data(), raw.data(), 32);
    ck.frozen_hashes.emplace_back(std::move(name), d);
  }
  if (r.pos != buf.size())
    throw CheckpointError(CheckpointError::Kind::malformed,
                          "trailing bytes after checkpoint payload");
  return ck;
}

void verify_frozen_hash(const Checkpoint& ck, const std::string& group,
                        const Digest& actual) {
  const Digest* want = ck.find_hash(group);
  if (!want)
    throw CheckpointError(CheckpointError::Kind::malformed,
                          "checkpoint lacks digest for group '" + group + "'");
  if (*want != actual)
    throw CheckpointError(CheckpointError::Kind::hash_mismatch,
                          "frozen group '" + group + "' changed since save");
}

}  // namespace ditra
