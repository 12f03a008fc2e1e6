#include "pecas/model_io.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "pecas/errors.hpp"

namespace pecas {

namespace {

using Fault = FormatError::Fault;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() && { return std::move(out_); }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8(const std::string& field) { return static_cast<std::uint8_t>(get_le(1, field)); }
  std::uint16_t u16(const std::string& field) { return static_cast<std::uint16_t>(get_le(2, field)); }
  std::uint32_t u32(const std::string& field) { return static_cast<std::uint32_t>(get_le(4, field)); }
  double f64(const std::string& field) { return std::bit_cast<double>(get_le(8, field)); }

  std::string_view text(std::size_t n, const std::string& field) {
    need(n, field);
    std::string_view s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const std::string& field) const {
    if (remaining() < n) {
      throw FormatError(Fault::truncated, field,
                        "file ends after " + std::to_string(bytes_.size()) + " bytes, needed " + std::to_string(n) +
                            " more at offset " + std::to_string(pos_));
    }
  }

  std::uint64_t get_le(int n, const std::string& field) {
    need(static_cast<std::size_t>(n), field);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_model(const ModelWeights& weights) {
  validate_weights(weights);
  const auto layout = parameter_layout(weights.spec);
  if (weights.spec.name.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw ArgumentError("model name too long to encode");
  }
  ByteWriter w;
  w.bytes(kWeightsMagic);
  w.u16(static_cast<std::uint16_t>(weights.spec.name.size()));
  w.bytes(weights.spec.name);
  w.u16(static_cast<std::uint16_t>(weights.params.size()));
  for (std::size_t i = 0; i < weights.params.size(); ++i) {
    const Tensor& t = weights.params[i];
    w.u8(static_cast<std::uint8_t>(layout[i].kind));
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.data()) w.f64(v);
  }
  return std::move(w).take();
}

ModelWeights decode_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < kWeightsMagic.size()) {
    throw FormatError(Fault::truncated, "magic", "file shorter than the 8-byte magic");
  }
  const auto magic = r.text(kWeightsMagic.size(), "magic");
  if (magic != kWeightsMagic) throw FormatError(Fault::bad_magic, "magic", "expected \"PECAS001\"");

  const std::uint16_t name_len = r.u16("model_name_length");
  const std::string name(r.text(name_len, "model_name"));
  auto spec = spec_by_name(name);
  if (!spec) throw FormatError(Fault::unknown_model, "model_name", "unknown model '" + name + "'");
  const auto layout = parameter_layout(*spec);

  const std::uint16_t count = r.u16("record_count");
  if (count != layout.size()) {
    throw FormatError(Fault::shape_mismatch, "record_count",
                      "model '" + name + "' has " + std::to_string(layout.size()) + " parameter tensors, file has " +
                          std::to_string(count));
  }

  ModelWeights weights{*spec, {}};
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const std::string prefix = "record[" + std::to_string(i) + "].";
    const std::uint8_t kind = r.u8(prefix + "layer_kind");
    if (kind != static_cast<std::uint8_t>(layout[i].kind)) {
      throw FormatError(Fault::bad_layer_kind, prefix + "layer_kind",
                        "expected " + std::to_string(static_cast<int>(layout[i].kind)) + ", got " +
                            std::to_string(kind));
    }
    const std::uint8_t rank = r.u8(prefix + "rank");
    Shape dims;
    for (std::uint8_t d = 0; d < rank; ++d) dims.push_back(r.u32(prefix + "dims"));
    if (dims != layout[i].shape) {
      throw FormatError(Fault::shape_mismatch, prefix + "dims",
                        "expected " + shape_string(layout[i].shape) + ", got " + shape_string(dims));
    }
    std::vector<double> values(shape_size(dims));
    for (double& v : values) {
      v = r.f64(prefix + "values");
      if (!std::isfinite(v)) throw FormatError(Fault::non_finite, prefix + "values", "non-finite parameter");
    }
    weights.params.emplace_back(std::move(dims), std::move(values));
  }
  if (r.remaining() != 0) {
    throw FormatError(Fault::trailing_bytes, "end_of_file", std::to_string(r.remaining()) + " unexpected bytes");
  }
  return weights;
}

void save_model(const ModelWeights& weights, const std::filesystem::path& path) {
  const auto bytes = encode_model(weights);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

ModelWeights load_model(const std::filesystem::path& path, std::optional<std::string_view> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ModelWeights weights = decode_model(bytes);
  if (expected) require_model(weights, *expected);
  return weights;
}

}  // namespace pecas
