#include "hgp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hgp/error.hpp"

namespace hgp {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void real(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const std::string& s) { out_ += s; }
  void section(const Writer& inner) {
    u64(inner.out_.size());
    out_ += inner.out_;
  }
  const std::string& str() const { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size) : data_(data), size_(size) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double real() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(data_ + pos_, n);
    pos_ += n;
    return s;
  }
  Reader section() {
    const std::uint64_t n = u64();
    need(n);
    Reader inner(data_ + pos_, n);
    pos_ += n;
    return inner;
  }
  std::string rest() { return bytes(size_ - pos_); }
  bool at_end() const { return pos_ == size_; }

 private:
  void need(std::uint64_t n) const {
    if (n > size_ - pos_) throw ParseError("checkpoint is truncated", 0);
  }
  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const TrainState& state) {
  Writer file;
  file.bytes(std::string(kCheckpointMagic, 4));
  file.u32(kCheckpointVersion);

  Writer config;
  config.bytes(config_to_text(state.config));
  file.section(config);

  Writer index;
  index.u64(state.params.size());
  std::uint64_t offset = 0;
  for (const auto& p : state.params) {
    index.u32(static_cast<std::uint32_t>(p.name.size()));
    index.bytes(p.name);
    index.u64(offset);
    index.u32(static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto d : p.tensor.shape()) index.u64(d);
    offset += p.tensor.numel();
  }
  file.section(index);

  Writer blob;
  for (const auto& p : state.params) {
    for (Real v : p.tensor.data()) blob.real(v);
  }
  file.section(blob);

  Writer optim;
  optim.u64(state.adam.step);
  optim.u64(state.adam.m.size());
  for (const auto* moments : {&state.adam.m, &state.adam.v}) {
    for (const auto& buf : *moments) {
      optim.u64(buf.size());
      for (Real v : buf) optim.real(v);
    }
  }
  file.section(optim);

  Writer rng;
  rng.bytes(state.rng_state);
  file.section(rng);
  return file.str();
}

TrainState deserialize_checkpoint(const std::string& bytes) {
  Reader file(bytes.data(), bytes.size());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw VersionError("not a checkpoint file (bad magic)");
  }
  file.bytes(4);
  const std::uint32_t version = file.u32();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) + ", expected " +
                       std::to_string(kCheckpointVersion));
  }
  TrainState st;
  Reader config = file.section();
  st.config = config_from_text(config.rest());

  Reader index = file.section();
  const std::uint64_t count = index.u64();
  std::uint64_t expected_offset = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = index.bytes(index.u32());
    const std::uint64_t offset = index.u64();
    if (offset != expected_offset) throw ParseError("parameter index offsets are inconsistent", 0);
    Shape shape(index.u32());
    for (auto& d : shape) d = index.u64();
    st.params.push_back({name, Tensor(shape)});
    expected_offset += st.params.back().tensor.numel();
  }
  if (!index.at_end()) throw ParseError("trailing bytes in parameter index", 0);

  Reader blob = file.section();
  for (auto& p : st.params) {
    for (auto& v : p.tensor.mutable_data()) v = blob.real();
  }
  if (!blob.at_end()) throw ParseError("parameter blob size does not match the index", 0);

  Reader optim = file.section();
  st.adam.step = optim.u64();
  const std::uint64_t n = optim.u64();
  for (auto* moments : {&st.adam.m, &st.adam.v}) {
    moments->resize(n);
    for (auto& buf : *moments) {
      buf.resize(optim.u64());
      for (auto& v : buf) v = optim.real();
    }
  }
  if (!optim.at_end()) throw ParseError("trailing bytes in optimizer state", 0);

  Reader rng = file.section();
  st.rng_state = rng.rest();
  if (!file.at_end()) throw ParseError("trailing bytes after the last section", 0);
  return st;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  const std::string bytes = serialize_checkpoint(state);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + tmp.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return deserialize_checkpoint(ss.str());
}

Model model_from_state(const TrainState& state) {
  Model model(state.config.model, state.config.seed);
  model.load_params(state.params);
  return model;
}

}  // namespace hgp
