#include "semfill/checkpoint.hpp"

#include <openssl/sha.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "semfill/log.hpp"

namespace fs = std::filesystem;

namespace semfill {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'M', 'F', 'I', 'L', 'L', '\0'};

struct DtypeCode {
  torch::ScalarType type;
  uint8_t code;
};

constexpr DtypeCode kDtypes[] = {
    {torch::kFloat32, 1}, {torch::kFloat64, 2}, {torch::kInt64, 3},
    {torch::kInt32, 4},   {torch::kUInt8, 5},   {torch::kBool, 6},
    {torch::kBFloat16, 7}, {torch::kFloat16, 8},
};

uint8_t dtype_code(torch::ScalarType t) {
  for (const auto& d : kDtypes) {
    if (d.type == t) return d.code;
  }
  throw CheckpointError(std::string("unsupported tensor dtype ") + c10::toString(t));
}

torch::ScalarType dtype_from(uint8_t code) {
  for (const auto& d : kDtypes) {
    if (d.code == code) return d.type;
  }
  throw CheckpointIntegrityError("unknown dtype code " + std::to_string(code));
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& bytes, size_t end) : bytes_(bytes), end_(end) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }

  const char* take(size_t n) {
    if (n > end_ - pos_) throw CheckpointIntegrityError("checkpoint truncated");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  bool done() const { return pos_ == end_; }

 private:
  const std::string& bytes_;
  size_t end_;
  size_t pos_ = 0;
};

std::string digest(const char* data, size_t n) {
  unsigned char md[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data), n, md);
  return std::string(reinterpret_cast<const char*>(md), SHA256_DIGEST_LENGTH);
}

std::string to_hex(const std::string& raw) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned char c : raw) {
    out += hex[c >> 4];
    out += hex[c & 15];
  }
  return out;
}

}  // namespace

const torch::Tensor* Container::find(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return &b.value;
  }
  return nullptr;
}

const torch::Tensor& Container::at(const std::string& name) const {
  const torch::Tensor* t = find(name);
  if (t == nullptr) throw CheckpointError("checkpoint has no block '" + name + "'");
  return *t;
}

std::string sha256_hex(const std::string& bytes) { return to_hex(digest(bytes.data(), bytes.size())); }

std::string encode_container(const Container& c) {
  std::string out(kMagic, sizeof(kMagic));
  put<uint32_t>(out, kContainerVersion);
  put<uint32_t>(out, static_cast<uint32_t>(c.kind));
  const std::string meta = c.meta.dump();
  put<uint64_t>(out, meta.size());
  out += meta;
  put<uint64_t>(out, c.blocks.size());
  for (const auto& b : c.blocks) {
    const torch::Tensor t = b.value.detach().to(torch::kCPU).contiguous();
    put<uint32_t>(out, static_cast<uint32_t>(b.name.size()));
    out += b.name;
    put<uint8_t>(out, dtype_code(t.scalar_type()));
    put<uint32_t>(out, static_cast<uint32_t>(t.dim()));
    for (auto d : t.sizes()) put<int64_t>(out, d);
    const size_t n = t.numel() * t.element_size();
    put<uint64_t>(out, n);
    out.append(static_cast<const char*>(t.data_ptr()), n);
  }
  out += digest(out.data(), out.size());
  return out;
}

Container decode_container(const std::string& bytes) {
  constexpr size_t kHeader = sizeof(kMagic) + 4;
  if (bytes.size() < kHeader || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointIntegrityError("not a checkpoint container (bad magic)");
  }
  uint32_t version;
  std::memcpy(&version, bytes.data() + sizeof(kMagic), 4);
  if (version != kContainerVersion) {
    throw CheckpointVersionError("checkpoint format version " + std::to_string(version) +
                                 " is not supported (expected " + std::to_string(kContainerVersion) + ")");
  }
  if (bytes.size() < kHeader + SHA256_DIGEST_LENGTH) throw CheckpointIntegrityError("checkpoint truncated");
  const size_t body = bytes.size() - SHA256_DIGEST_LENGTH;
  if (digest(bytes.data(), body) != bytes.substr(body)) {
    throw CheckpointIntegrityError("checkpoint digest mismatch (file corrupted)");
  }
  Reader r(bytes, body);
  r.take(kHeader);
  Container c;
  c.kind = static_cast<ContainerKind>(r.get<uint32_t>());
  const auto meta_len = r.get<uint64_t>();
  const char* meta = r.take(meta_len);
  try {
    c.meta = nlohmann::json::parse(std::string(meta, meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointIntegrityError(std::string("bad checkpoint metadata: ") + e.what());
  }
  const auto n_blocks = r.get<uint64_t>();
  for (uint64_t i = 0; i < n_blocks; ++i) {
    NamedTensor b;
    const auto name_len = r.get<uint32_t>();
    b.name.assign(r.take(name_len), name_len);
    const auto dtype = dtype_from(r.get<uint8_t>());
    const auto ndim = r.get<uint32_t>();
    std::vector<int64_t> dims(ndim);
    for (auto& d : dims) d = r.get<int64_t>();
    const auto n = r.get<uint64_t>();
    b.value = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    if (n != static_cast<uint64_t>(b.value.numel() * b.value.element_size())) {
      throw CheckpointIntegrityError("block '" + b.name + "' size does not match its shape");
    }
    std::memcpy(b.value.data_ptr(), r.take(n), n);
    c.blocks.push_back(std::move(b));
  }
  if (!r.done()) throw CheckpointIntegrityError("trailing bytes after the last block");
  return c;
}

void write_container(const fs::path& path, const Container& c, nlohmann::json sidecar) {
  const std::string bytes = encode_container(c);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw CheckpointError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
  sidecar["format_version"] = kContainerVersion;
  sidecar["sha256"] = to_hex(bytes.substr(bytes.size() - SHA256_DIGEST_LENGTH));
  sidecar["meta"] = c.meta;
  std::ofstream side(path.string() + ".json", std::ios::trunc);
  side << sidecar.dump(2) << "\n";
  if (!side) throw CheckpointError("failed writing sidecar for " + path.string());
}

Container read_container(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_container(ss.str());
}

void append_module(std::vector<NamedTensor>& blocks, const std::string& prefix,
                   const torch::nn::Module& module) {
  for (const auto& p : module.named_parameters(true)) blocks.push_back({prefix + "." + p.key(), p.value()});
  for (const auto& b : module.named_buffers(true)) blocks.push_back({prefix + "." + b.key(), b.value()});
}

void restore_module(const Container& c, const std::string& prefix, torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  auto copy = [&](const std::string& name, torch::Tensor& dst) {
    const std::string key = prefix + "." + name;
    const torch::Tensor& src = c.at(key);
    if (src.sizes() != dst.sizes()) {
      std::ostringstream msg;
      msg << "shape mismatch for '" << key << "': checkpoint " << src.sizes() << " vs model "
          << dst.sizes();
      throw CheckpointError(msg.str());
    }
    dst.copy_(src);
  };
  for (auto& p : module.named_parameters(true)) copy(p.key(), p.value());
  for (auto& b : module.named_buffers(true)) copy(b.key(), b.value());
}

std::string module_hash(const torch::nn::Module& module) {
  Container c;
  append_module(c.blocks, "m", module);
  std::string bytes;
  for (const auto& b : c.blocks) {
    const torch::Tensor t = b.value.detach().contiguous();
    bytes += b.name;
    bytes.append(static_cast<const char*>(t.data_ptr()), t.numel() * t.element_size());
  }
  return sha256_hex(bytes);
}

}  // namespace semfill
