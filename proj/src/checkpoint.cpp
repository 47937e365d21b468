#include "laimpute/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace laimpute {

namespace {

constexpr std::array<char, 8> kMagic = {'L', 'A', 'I', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename T>
  void put(T v) {
    v = byteswap_if_big(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw FormatError("checkpoint truncated");
    return byteswap_if_big(v);
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string get_string(std::size_t n) {
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) throw FormatError("checkpoint truncated");
    return s;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_checkpoint(const Checkpoint& ck, std::ostream& out) {
  Writer w(out);
  w.put_bytes(kMagic.data(), kMagic.size());
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ck.layout));
  const Architecture& a = ck.params.arch;
  w.put<std::uint32_t>(a.bidirectional ? 1u : 0u);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(a.input_size));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(a.hidden));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(a.dense));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(a.out_dim));
  w.put_f64(a.dropout_p);
  w.put_f64(ck.stats.lai.mean);
  w.put_f64(ck.stats.lai.std);
  w.put_f64(ck.stats.vhvv.mean);
  w.put_f64(ck.stats.vhvv.std);
  const auto blocks = ck.params.blocks();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(b.name.size()));
    w.put_bytes(b.name.data(), b.name.size());
    w.put<std::uint64_t>(static_cast<std::uint64_t>(b.rows));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(b.cols));
    for (const double v : b.values) w.put_f64(v);
  }
  if (!out) throw FormatError("checkpoint write failed");
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  save_checkpoint(checkpoint, out);
}

Checkpoint load_checkpoint(std::istream& in) {
  Reader r(in);
  const std::string magic = r.get_string(kMagic.size());
  if (std::memcmp(magic.data(), kMagic.data(), kMagic.size()) != 0) throw FormatError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  const auto layout = r.get<std::uint32_t>();
  if (layout != static_cast<std::uint32_t>(FeatureLayout::kVhvvLaiWithMasks))
    throw FormatError("unknown feature layout " + std::to_string(layout));
  ck.layout = static_cast<FeatureLayout>(layout);

  Architecture a;
  const auto bidirectional = r.get<std::uint32_t>();
  if (bidirectional > 1) throw FormatError("corrupt direction flag");
  a.bidirectional = bidirectional == 1;
  a.input_size = static_cast<Index>(r.get<std::uint64_t>());
  a.hidden = static_cast<Index>(r.get<std::uint64_t>());
  a.dense = static_cast<Index>(r.get<std::uint64_t>());
  a.out_dim = static_cast<Index>(r.get<std::uint64_t>());
  a.dropout_p = r.get_f64();
  constexpr Index kMaxDim = 1 << 20;
  if (a.input_size < 1 || a.hidden < 1 || a.dense < 1 || a.out_dim < 1 || a.input_size > kMaxDim ||
      a.hidden > kMaxDim || a.dense > kMaxDim || a.out_dim > kMaxDim)
    throw FormatError("corrupt architecture sizes");
  ck.stats.lai.mean = r.get_f64();
  ck.stats.lai.std = r.get_f64();
  ck.stats.vhvv.mean = r.get_f64();
  ck.stats.vhvv.std = r.get_f64();

  ck.params = NetworkParamsd::Zero(a);
  auto blocks = ck.params.blocks();
  const auto count = r.get<std::uint32_t>();
  if (count != blocks.size()) throw FormatError("checkpoint block count does not match architecture");
  for (auto& b : blocks) {
    const auto name_len = r.get<std::uint32_t>();
    if (name_len > 256) throw FormatError("corrupt block name");
    const std::string name = r.get_string(name_len);
    const auto rows = static_cast<Index>(r.get<std::uint64_t>());
    const auto cols = static_cast<Index>(r.get<std::uint64_t>());
    if (name != b.name || rows != b.rows || cols != b.cols)
      throw FormatError("checkpoint block '" + name + "' does not match expected '" + b.name + "'");
    for (double& v : b.values) v = r.get_f64();
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace laimpute
