#include "nrl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace nrl {
namespace {

constexpr char kMagic[8] = {'N', 'R', 'L', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

void put_doubles(std::vector<std::uint8_t>& out,
                 std::span<const double> values) {
  const std::size_t off = out.size();
  out.resize(off + values.size() * sizeof(double));
  std::memcpy(out.data() + off, values.data(), values.size() * sizeof(double));
}

struct Reader {
  std::span<const std::uint8_t> buf;
  std::size_t pos = 0;

  void need(std::size_t n) {
    if (pos + n > buf.size()) {
      throw std::runtime_error("checkpoint truncated at byte " +
                               std::to_string(pos));
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
    pos += n;
    return s;
  }
  void doubles(double* dst, std::size_t n) {
    need(n * sizeof(double));
    std::memcpy(dst, buf.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
  }
};

void put_array(std::vector<std::uint8_t>& out, const std::string& name,
               std::span<const std::size_t> shape,
               std::span<const double> values) {
  put_string(out, name);
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (const std::size_t d : shape) put_u64(out, d);
  put_doubles(out, values);
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Encoder& enc) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + sizeof(kMagic));
  put_u32(out, kVersion);
  put_string(out, enc.config().echo());
  const std::size_t count = enc.store().all().size() + 2 * enc.buffers().size();
  put_u64(out, count);
  for (const Param& p : enc.store().all()) {
    put_array(out, p.name, p.shape, p.value);
  }
  for (const BnBuffer& b : enc.buffers()) {
    const std::size_t c[1] = {b.running_mean.size()};
    put_array(out, b.name + ".running_mean", c, b.running_mean);
    put_array(out, b.name + ".running_var", c, b.running_var);
  }
  return out;
}

void deserialize_checkpoint(std::span<const std::uint8_t> bytes, Encoder& enc) {
  Reader r{bytes};
  r.need(sizeof(kMagic));
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a checkpoint file (bad magic)");
  }
  r.pos = sizeof(kMagic);
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  }
  const std::string echo = r.str();
  if (echo != enc.config().echo()) {
    throw std::runtime_error("checkpoint config \"" + echo +
                             "\" does not match encoder config \"" +
                             enc.config().echo() + "\"");
  }
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const std::uint32_t ndim = r.u32();
    std::vector<std::size_t> shape(ndim);
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      shape[d] = static_cast<std::size_t>(r.u64());
      total *= shape[d];
    }
    double* dst = nullptr;
    if (Param* p = enc.store().find(name)) {
      if (p->shape != shape) {
        throw std::runtime_error("checkpoint shape mismatch for " + name);
      }
      dst = p->value.data();
    } else {
      for (BnBuffer& b : enc.buffers()) {
        if (name == b.name + ".running_mean") dst = b.running_mean.data();
        if (name == b.name + ".running_var") dst = b.running_var.data();
      }
      if (!dst) throw std::runtime_error("checkpoint has unknown array " + name);
    }
    r.doubles(dst, total);
  }
}

void save_checkpoint(const std::string& path, const Encoder& enc) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(enc);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void load_checkpoint(const std::string& path, Encoder& enc) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  deserialize_checkpoint(bytes, enc);
}

}  // namespace nrl
