#include "ccdd/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <limits>

#include "ccdd/corpus.hpp"
#include "ccdd/error.hpp"

namespace ccdd {

namespace {

constexpr char kMagic[4] = {'C', 'C', 'D', 'D'};

class Writer {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out_.append(reinterpret_cast<const char*>(b), sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    out_ += s;
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    unsigned char b[sizeof(T)];
    std::memcpy(b, in_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
  std::string get_string(const char* what) {
    const auto n = get<std::uint64_t>(what);
    need(n, what);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void need(std::uint64_t n, const char* what) const {
    if (n > in_.size() - pos_) {
      throw CheckpointError(CheckpointError::Code::kTruncatedPayload,
                            std::string("checkpoint: truncated payload while reading ") + what);
    }
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

NamedTensor NamedTensor::from_matrix(std::string name, const Matrix& m, DType dtype) {
  NamedTensor t;
  t.name = std::move(name);
  t.dtype = dtype;
  t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.data.assign(m.data(), m.data() + m.size());
  if (dtype == DType::kF32) {
    for (double& v : t.data) v = static_cast<double>(static_cast<float>(v));
  }
  return t;
}

Matrix NamedTensor::to_matrix() const {
  if (dims.size() != 2) throw CheckpointError(CheckpointError::Code::kMalformed,
                                              "checkpoint: tensor '" + name + "' is not rank 2");
  Matrix m(static_cast<Eigen::Index>(dims[0]), static_cast<Eigen::Index>(dims[1]));
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

std::uint64_t NamedTensor::element_count() const {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) n *= d;
  return n;
}

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const NamedTensor& Checkpoint::at(const std::string& name) const {
  const NamedTensor* t = find(name);
  if (t == nullptr) {
    throw CheckpointError(CheckpointError::Code::kMalformed,
                          "checkpoint: missing tensor '" + name + "'");
  }
  return *t;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic, 4);
  w.put<std::uint32_t>(Checkpoint::kVersion);
  w.put_string(ckpt.config_text);
  w.put_string(ckpt.vocab_text);
  w.put<std::uint64_t>(ckpt.config_hash);
  w.put<std::int64_t>(ckpt.step);
  w.put<std::uint64_t>(ckpt.rng_seed);
  w.put<std::uint64_t>(ckpt.rng_counter);
  w.put<std::uint64_t>(ckpt.tensors.size());
  for (const NamedTensor& t : ckpt.tensors) {
    if (t.element_count() != t.data.size()) {
      throw CheckpointError(CheckpointError::Code::kMalformed,
                            "checkpoint: tensor '" + t.name + "' dims do not match data");
    }
    w.put_string(t.name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.dtype));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.dims.size()));
    for (std::uint64_t d : t.dims) w.put<std::uint64_t>(d);
    if (t.dtype == DType::kF32) {
      for (double v : t.data) w.put<float>(static_cast<float>(v));
    } else {
      for (double v : t.data) w.put<double>(v);
    }
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    if (bytes.size() < 4 && std::memcmp(bytes.data(), kMagic, bytes.size()) == 0) {
      throw CheckpointError(CheckpointError::Code::kTruncatedPayload,
                            "checkpoint: truncated payload while reading magic");
    }
    throw CheckpointError(CheckpointError::Code::kBadMagic, "checkpoint: bad magic");
  }
  const std::string body = bytes.substr(4);
  Reader r(body);
  const auto version = r.get<std::uint32_t>("version");
  if (version != Checkpoint::kVersion) {
    throw CheckpointError(CheckpointError::Code::kVersionMismatch,
                          "checkpoint: version mismatch (file " + std::to_string(version) +
                              ", expected " + std::to_string(Checkpoint::kVersion) + ")");
  }
  Checkpoint c;
  c.config_text = r.get_string("config");
  c.vocab_text = r.get_string("vocabulary");
  c.config_hash = r.get<std::uint64_t>("config hash");
  c.step = r.get<std::int64_t>("step");
  c.rng_seed = r.get<std::uint64_t>("rng seed");
  c.rng_counter = r.get<std::uint64_t>("rng counter");
  const auto count = r.get<std::uint64_t>("tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.get_string("tensor name");
    const auto dtype = r.get<std::uint8_t>("tensor dtype");
    if (dtype > 1) {
      throw CheckpointError(CheckpointError::Code::kMalformed,
                            "checkpoint: unknown dtype for tensor '" + t.name + "'");
    }
    t.dtype = static_cast<DType>(dtype);
    const auto rank = r.get<std::uint32_t>("tensor rank");
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto d = r.get<std::uint64_t>("tensor dims");
      if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / 8 / d) {
        throw CheckpointError(CheckpointError::Code::kMalformed,
                              "checkpoint: tensor '" + t.name + "' too large");
      }
      n *= d;
      t.dims.push_back(d);
    }
    r.need(n * (t.dtype == DType::kF32 ? 4 : 8), "tensor payload");
    t.data.resize(n);
    for (double& v : t.data) {
      v = t.dtype == DType::kF32 ? static_cast<double>(r.get<float>("tensor payload"))
                                 : r.get<double>("tensor payload");
    }
    c.tensors.push_back(std::move(t));
  }
  if (!r.at_end()) {
    throw CheckpointError(CheckpointError::Code::kMalformed, "checkpoint: trailing bytes");
  }
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string tmp = path + ".tmp";
  write_file(tmp, serialize_checkpoint(ckpt));
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot rename to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  return deserialize_checkpoint(read_file(path));
}

void save_tensor_file(const std::string& path, const std::vector<NamedTensor>& tensors) {
  Checkpoint c;
  c.tensors = tensors;
  save_checkpoint(path, c);
}

}  // namespace ccdd
