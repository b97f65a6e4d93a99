#include "metasr/checkpoint.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace metasr {

namespace {

constexpr char kMagic[4] = {'M', 'Z', 'S', 'R'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::vector<unsigned char>& buf, std::uint16_t v) {
  buf.push_back(static_cast<unsigned char>(v & 0xff));
  buf.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<unsigned char>& buf, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::size_t pos() const { return pos_; }
  const unsigned char* raw() const { return bytes_.data(); }
  std::size_t size() const { return bytes_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size())
      throw std::runtime_error("checkpoint: truncated file");
  }
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const HostParams& params, const std::string& path) {
  std::vector<unsigned char> buf;
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u16(buf, kVersion);
  put_u16(buf, static_cast<std::uint16_t>(params.arch.depth));
  put_u16(buf, static_cast<std::uint16_t>(params.arch.features));
  put_u16(buf, static_cast<std::uint16_t>(params.arch.kernel_size));
  put_u16(buf, static_cast<std::uint16_t>(params.arch.in_channels));
  put_u16(buf, static_cast<std::uint16_t>(params.arch.out_channels));
  put_u32(buf, static_cast<std::uint32_t>(params.tensors.size()));
  for (const HostTensor& t : params.tensors) {
    put_u16(buf, static_cast<std::uint16_t>(t.shape.size()));
    for (int e : t.shape) put_u32(buf, static_cast<std::uint32_t>(e));
  }
  for (const HostTensor& t : params.tensors)
    for (double v : t.data) put_f32(buf, static_cast<float>(v));
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, buf.data(), static_cast<uInt>(buf.size())));
  put_u32(buf, crc);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

HostParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: not a checkpoint file (bad magic)");
  if (bytes.size() < 8) throw std::runtime_error("checkpoint: truncated file");

  // CRC covers everything before the trailing word.
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i)
    stored |= static_cast<std::uint32_t>(bytes[body + i]) << (8 * i);
  const std::uint32_t computed =
      static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(body)));
  if (stored != computed)
    throw std::runtime_error("checkpoint: CRC mismatch (corrupt or truncated file)");

  Reader r(std::move(bytes));
  // Skip the magic.
  r.u32();

  const std::uint16_t version = r.u16();
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported format version " +
                             std::to_string(version));

  HostParams params;
  params.arch.depth = r.u16();
  params.arch.features = r.u16();
  params.arch.kernel_size = r.u16();
  params.arch.in_channels = r.u16();
  params.arch.out_channels = r.u16();

  const std::uint32_t count = r.u32();
  if (count != static_cast<std::uint32_t>(2 * params.arch.depth))
    throw std::runtime_error("checkpoint: tensor count inconsistent with architecture");
  std::vector<Shape> shapes(count);
  for (auto& s : shapes) {
    const std::uint16_t rank = r.u16();
    s.resize(rank);
    for (auto& e : s) e = static_cast<int>(r.u32());
  }
  params.tensors.reserve(count);
  for (const Shape& s : shapes) {
    HostTensor t;
    t.shape = s;
    t.data.resize(numel(s));
    for (double& v : t.data) v = static_cast<double>(r.f32());
    params.tensors.push_back(std::move(t));
  }
  if (r.pos() != body)
    throw std::runtime_error("checkpoint: trailing bytes after payload");

  // Cross-check the declared shapes against the architecture.
  const HostParams reference = build(params.arch, 0);
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    if (params.tensors[i].shape != reference.tensors[i].shape)
      throw std::runtime_error("checkpoint: tensor shapes inconsistent with architecture");
  return params;
}

}  // namespace metasr
