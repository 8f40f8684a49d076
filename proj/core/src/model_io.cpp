#include "speckle/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "speckle/errors.hpp"

namespace speckle {
namespace {

class Writer {
public:
  template <typename U>
  void put(U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }

  std::vector<std::uint8_t> bytes;
};

class Reader {
public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename U>
  U get() {
    if (bytes_.size() - pos_ < sizeof(U)) throw IoError("model file is truncated");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_model(const ModelFile& model) {
  const Architecture& arch = model.params.arch;
  if (model.params.weights.size() != arch.weight_count()) {
    throw std::invalid_argument("model weights do not match the architecture");
  }
  Writer w;
  w.bytes.assign(std::begin(kModelMagic), std::end(kModelMagic));
  w.put(kModelVersion);
  w.put(static_cast<std::uint32_t>(arch.cond_channels));
  w.put(static_cast<std::uint32_t>(arch.hidden.size()));
  for (int h : arch.hidden) w.put(static_cast<std::uint32_t>(h));
  w.put(static_cast<std::uint32_t>(arch.kernel));
  w.put(static_cast<std::uint32_t>(arch.time_dim));
  w.put(static_cast<std::uint32_t>(model.diffusion_steps));
  w.put_f64(model.beta_start);
  w.put_f64(model.beta_end);
  w.put(static_cast<std::uint32_t>(model.sampler_steps));
  w.put(model.train_seed);
  w.put(model.train_steps);
  w.put_f64(model.prior.contrast_eps);
  w.put_f64(model.prior.flow_eps);
  w.put_f64(model.normalization.lo_pct);
  w.put_f64(model.normalization.hi_pct);
  w.put_f64(model.target_record.lo);
  w.put_f64(model.target_record.hi);
  w.put(static_cast<std::uint64_t>(model.params.weights.size()));
  for (float v : model.params.weights) w.put_f32(v);
  return w.bytes;
}

ModelFile decode_model(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
    throw IoError("not a model file (bad magic)");
  }
  std::vector<std::uint8_t> body(bytes.begin() + 4, bytes.end());
  Reader r(body);
  const auto version = r.get<std::uint16_t>();
  if (version != kModelVersion) throw IoError("unsupported model format version " + std::to_string(version));
  ModelFile m;
  Architecture& arch = m.params.arch;
  arch.cond_channels = static_cast<int>(r.get<std::uint32_t>());
  const auto hidden = r.get<std::uint32_t>();
  if (hidden > 1024) throw IoError("model file declares an implausible layer count");
  arch.hidden.clear();
  for (std::uint32_t i = 0; i < hidden; ++i) arch.hidden.push_back(static_cast<int>(r.get<std::uint32_t>()));
  arch.kernel = static_cast<int>(r.get<std::uint32_t>());
  arch.time_dim = static_cast<int>(r.get<std::uint32_t>());
  m.diffusion_steps = static_cast<int>(r.get<std::uint32_t>());
  m.beta_start = r.get_f64();
  m.beta_end = r.get_f64();
  m.sampler_steps = static_cast<int>(r.get<std::uint32_t>());
  m.train_seed = r.get<std::uint64_t>();
  m.train_steps = r.get<std::uint64_t>();
  m.prior.contrast_eps = r.get_f64();
  m.prior.flow_eps = r.get_f64();
  m.normalization.lo_pct = r.get_f64();
  m.normalization.hi_pct = r.get_f64();
  m.target_record.lo = r.get_f64();
  m.target_record.hi = r.get_f64();
  const auto count = r.get<std::uint64_t>();
  try {
    arch.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("model file has an invalid architecture: ") + e.what());
  }
  if (count != arch.weight_count() || r.remaining() != count * 4) {
    throw IoError("model weight block does not match its architecture");
  }
  m.params.weights.resize(count);
  for (auto& v : m.params.weights) v = r.get_f32();
  return m;
}

void write_model(const std::filesystem::path& path, const ModelFile& model) {
  const auto bytes = encode_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

ModelFile read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_model(bytes);
}

}  // namespace speckle
