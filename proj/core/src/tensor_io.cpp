#include "speckle/tensor_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "speckle/errors.hpp"

namespace speckle {
namespace {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

class Reader {
public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("tensor file is truncated");
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::uint8_t* cursor() const { return bytes_.data() + pos_; }
  void skip(std::size_t n) { pos_ += n; }

private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return dims.empty() ? 0 : n;
}

std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path) {
  return std::filesystem::path(tensor_path.string() + ".meta");
}

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
  if (tensor.dims.empty() || tensor.dims.size() > 255) throw std::invalid_argument("tensor needs 1..255 dimensions");
  if (tensor.data.size() != tensor.element_count()) {
    throw std::invalid_argument("tensor payload does not match its dimensions");
  }
  std::vector<std::uint8_t> out(std::begin(kTensorMagic), std::end(kTensorMagic));
  put_le(out, kTensorVersion);
  put_le(out, static_cast<std::uint8_t>(tensor.dims.size()));
  for (auto d : tensor.dims) put_le(out, d);
  put_le(out, kDtypeF32);
  out.reserve(out.size() + 4 * tensor.data.size());
  for (float v : tensor.data) put_le(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.need(4);
  if (std::memcmp(r.cursor(), kTensorMagic, 4) != 0) throw IoError("not a tensor file (bad magic)");
  r.skip(4);
  const auto version = r.get<std::uint16_t>();
  if (version != kTensorVersion) throw IoError("unsupported tensor format version " + std::to_string(version));
  const auto ndim = r.get<std::uint8_t>();
  if (ndim == 0) throw IoError("tensor file declares zero dimensions");
  Tensor t;
  for (int i = 0; i < ndim; ++i) t.dims.push_back(r.get<std::uint32_t>());
  const auto dtype = r.get<std::uint8_t>();
  if (dtype != kDtypeF32) throw IoError("unsupported tensor dtype tag " + std::to_string(dtype));
  const std::size_t count = t.element_count();
  if (r.remaining() != count * 4) throw IoError("tensor payload length does not match its dimensions");
  t.data.resize(count);
  for (auto& v : t.data) v = std::bit_cast<float>(r.get<std::uint32_t>());
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor, const Metadata& meta) {
  dump(path, encode_tensor(tensor));
  if (!meta.empty()) write_metadata(sidecar_path(path), meta);
}

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(slurp(path)); }

void write_metadata(const std::filesystem::path& path, const Metadata& meta) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& [k, v] : meta) out << k << " = " << v << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

Metadata read_metadata(const std::filesystem::path& tensor_path) {
  const auto path = sidecar_path(tensor_path);
  Metadata meta;
  if (!std::filesystem::exists(path)) return meta;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (trim(line).empty() || eq == std::string::npos) continue;
    meta.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return meta;
}

std::string metadata_value(const Metadata& meta, const std::string& key) {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  throw IoError("metadata key '" + key + "' is missing");
}

Tensor to_tensor(const Image& image) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(image.rows()), static_cast<std::uint32_t>(image.cols())};
  t.data.assign(image.begin(), image.end());
  return t;
}

Tensor to_tensor(const SpeckleSequence& seq) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(seq.n_frames()), static_cast<std::uint32_t>(seq.height()),
            static_cast<std::uint32_t>(seq.width())};
  t.data.reserve(t.element_count());
  for (const auto& f : seq.frames()) t.data.insert(t.data.end(), f.begin(), f.end());
  return t;
}

Image image_from_tensor(const Tensor& tensor) {
  std::vector<std::uint32_t> dims = tensor.dims;
  if (dims.size() == 3 && dims[0] == 1) dims.erase(dims.begin());
  if (dims.size() != 2) throw IoError("expected a 2-D map tensor");
  Image img(static_cast<int>(dims[0]), static_cast<int>(dims[1]));
  std::copy(tensor.data.begin(), tensor.data.end(), img.begin());
  return img;
}

SpeckleSequence sequence_from_tensor(const Tensor& tensor) {
  std::vector<std::uint32_t> dims = tensor.dims;
  if (dims.size() == 2) dims.insert(dims.begin(), 1);
  if (dims.size() != 3 || dims[0] == 0) throw IoError("expected an N x H x W sequence tensor");
  const auto plane = static_cast<std::size_t>(dims[1]) * dims[2];
  std::vector<Image> frames;
  for (std::uint32_t t = 0; t < dims[0]; ++t) {
    Image f(static_cast<int>(dims[1]), static_cast<int>(dims[2]));
    std::copy_n(tensor.data.begin() + static_cast<std::ptrdiff_t>(t * plane), plane, f.begin());
    frames.push_back(std::move(f));
  }
  try {
    return SpeckleSequence(std::move(frames));
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("invalid speckle sequence: ") + e.what());
  }
}

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

}  // namespace speckle
