#include "udc/nnet/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace udc::nn {

namespace {

constexpr char kMagic[8] = {'U', 'D', 'C', 'C', 'K', 'P', 'T', '\0'};

template <class T>
void put(std::string& out, T v) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  put(out, bits);
}

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  float get_f32() {
    const auto bits = get<std::uint32_t>();
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw Error("corrupt_checkpoint", "truncated file");
  }
  const std::string& data_;
  std::size_t pos_ = 0;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, ckpt.config_hash);
  const std::string header = ckpt.header.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rows));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.cols));
    for (double x : e.value.data) put_f32(out, static_cast<float>(x));
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("io_error", "cannot write " + tmp);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("io_error", "short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("io_error", "rename " + tmp + ": " + ec.message());
}

Checkpoint read_checkpoint(const std::string& path) {
  const std::string data = slurp(path);
  Reader r(data);
  if (r.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw Error("corrupt_checkpoint", "bad magic in " + path);
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error("corrupt_checkpoint", "unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config_hash = r.get<std::uint64_t>();
  const auto hlen = r.get<std::uint32_t>();
  try {
    ckpt.header = nlohmann::json::parse(r.bytes(hlen));
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt_checkpoint", std::string("header: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  ckpt.entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.bytes(r.get<std::uint32_t>());
    const auto rows = static_cast<int>(r.get<std::uint32_t>());
    const auto cols = static_cast<int>(r.get<std::uint32_t>());
    e.value = Matrix(rows, cols);
    for (double& x : e.value.data) x = r.get_f32();
    ckpt.entries.push_back(std::move(e));
  }
  if (!r.at_end()) throw Error("corrupt_checkpoint", "trailing bytes");
  return ckpt;
}

void store_to_checkpoint(Checkpoint& ckpt, const std::string& prefix, const ParamStore& store) {
  const AdamState& st = store.adam();
  for (int i = 0; i < store.size(); ++i) {
    const Parameter& p = store.at(i);
    ckpt.entries.push_back({prefix + p.name, p.value});
    ckpt.entries.push_back({prefix + p.name + "#m", st.m[i]});
    ckpt.entries.push_back({prefix + p.name + "#v", st.v[i]});
  }
  ckpt.header["optimizer"][prefix] = {{"step", st.step}, {"lr", st.lr}, {"beta1", st.beta1},
                                      {"beta2", st.beta2}, {"eps", st.eps}};
}

void store_from_checkpoint(const Checkpoint& ckpt, const std::string& prefix, ParamStore& store) {
  AdamState& st = store.adam();
  auto load = [&](const std::string& name, Matrix& dst) {
    const CheckpointEntry* e = ckpt.find(name);
    if (e == nullptr) throw Error("checkpoint_mismatch", "missing tensor " + name);
    if (!e->value.same_shape(dst)) {
      throw Error("checkpoint_mismatch",
                  name + " has shape " + e->value.shape_str() + ", expected " + dst.shape_str());
    }
    dst = e->value;
  };
  for (int i = 0; i < store.size(); ++i) {
    Parameter& p = store.at(i);
    load(prefix + p.name, p.value);
    load(prefix + p.name + "#m", st.m[i]);
    load(prefix + p.name + "#v", st.v[i]);
  }
  if (ckpt.header.contains("optimizer") && ckpt.header["optimizer"].contains(prefix)) {
    const auto& o = ckpt.header["optimizer"][prefix];
    st.step = o.value("step", 0L);
    st.lr = o.value("lr", st.lr);
    st.beta1 = o.value("beta1", st.beta1);
    st.beta2 = o.value("beta2", st.beta2);
    st.eps = o.value("eps", st.eps);
  }
}

std::uint64_t file_hash(const std::string& path) {
  const std::string data = slurp(path);
  return fnv1a(data.data(), data.size());
}

}  // namespace udc::nn
