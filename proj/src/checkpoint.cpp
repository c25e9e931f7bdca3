#include "faceseal/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <unordered_map>

namespace faceseal {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'S', 'E', 'A', 'L'};

const char* dtype_tag(torch::Dtype d) {
  switch (d) {
    case torch::kFloat32: return "f32";
    case torch::kFloat64: return "f64";
    case torch::kInt64: return "i64";
    case torch::kUInt8: return "u8";
    default: throw config_error("checkpoint: unsupported tensor dtype");
  }
}

torch::Dtype dtype_from_tag(const std::string& tag) {
  if (tag == "f32") return torch::kFloat32;
  if (tag == "f64") return torch::kFloat64;
  if (tag == "i64") return torch::kInt64;
  if (tag == "u8") return torch::kUInt8;
  throw format_error("checkpoint: unknown dtype tag " + tag);
}

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t read_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const CheckpointPayload& payload) {
  json index = json::array();
  std::uint64_t offset = 0;
  std::vector<torch::Tensor> flat;
  flat.reserve(payload.tensors.size());
  for (const auto& nt : payload.tensors) {
    auto t = nt.tensor.detach().contiguous().cpu();
    const std::uint64_t bytes = static_cast<std::uint64_t>(t.numel()) * t.element_size();
    index.push_back({{"name", nt.name},
                     {"shape", std::vector<std::int64_t>(t.sizes().begin(), t.sizes().end())},
                     {"dtype", dtype_tag(t.scalar_type())},
                     {"offset", offset},
                     {"bytes", bytes}});
    offset += bytes;
    flat.push_back(t);
  }
  json header;
  header["arch"] = payload.arch;
  header["meta"] = payload.meta;
  header["tensors"] = index;
  const std::string header_str = header.dump();

  std::string prefix;
  prefix.append(kMagic, 4);
  append_u32(prefix, kCheckpointVersion);
  append_u64(prefix, header_str.size());

  const std::string tmp = path + ".tmp";
  std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write checkpoint: " + path);
  uLong crc = crc32(0L, Z_NULL, 0);
  auto put = [&](const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    crc = crc32(crc, static_cast<const Bytef*>(data), static_cast<uInt>(n));
  };
  put(prefix.data(), prefix.size());
  put(header_str.data(), header_str.size());
  for (const auto& t : flat) put(t.data_ptr(), static_cast<std::size_t>(t.numel()) * t.element_size());
  std::string trailer;
  append_u32(trailer, static_cast<std::uint32_t>(crc));
  out.write(trailer.data(), static_cast<std::streamsize>(trailer.size()));
  out.close();
  if (!out) throw io_error("short write: " + path);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw io_error("cannot finalize checkpoint: " + path + " (" + ec.message() + ")");
}

CheckpointPayload read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open checkpoint: " + path);
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 20) throw format_error("checkpoint truncated: " + path);

  if (std::memcmp(data.data(), kMagic, 4) != 0) throw format_error("not a checkpoint file: " + path);
  const std::uint32_t version = read_u32(data.data() + 4);
  if (version != kCheckpointVersion)
    throw format_error("checkpoint version " + std::to_string(version) + " unsupported (this build reads version " +
                       std::to_string(kCheckpointVersion) + "): " + path);

  const std::uint32_t stored_crc = read_u32(data.data() + data.size() - 4);
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, data.data(), static_cast<uInt>(data.size() - 4));
  if (static_cast<std::uint32_t>(crc) != stored_crc)
    throw io_error("checkpoint checksum mismatch (corrupt file): " + path);

  const std::uint64_t header_len = read_u64(data.data() + 8);
  const std::size_t header_start = 16;
  if (header_start + header_len + 4 > data.size()) throw format_error("checkpoint truncated: " + path);
  json header;
  try {
    header = json::parse(data.begin() + header_start, data.begin() + header_start + header_len);
  } catch (const json::exception& e) {
    throw format_error(std::string("checkpoint header unreadable: ") + e.what());
  }

  CheckpointPayload payload;
  payload.arch = header.at("arch").get<ArchConfig>();
  payload.meta = header.value("meta", json::object());
  const std::size_t body = header_start + header_len;
  const std::size_t body_size = data.size() - 4 - body;
  for (const auto& entry : header.at("tensors")) {
    NamedTensor nt;
    nt.name = entry.at("name").get<std::string>();
    auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    auto dtype = dtype_from_tag(entry.at("dtype").get<std::string>());
    const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
    const std::uint64_t bytes = entry.at("bytes").get<std::uint64_t>();
    if (offset + bytes > body_size) throw format_error("checkpoint tensor out of bounds: " + nt.name);
    nt.tensor = torch::empty(shape, torch::TensorOptions().dtype(dtype));
    std::memcpy(nt.tensor.data_ptr(), data.data() + body + offset, bytes);
    payload.tensors.push_back(std::move(nt));
  }
  return payload;
}

void append_module_tensors(std::vector<NamedTensor>& out, const torch::nn::Module& module,
                           const std::string& prefix) {
  for (const auto& p : module.named_parameters()) out.push_back({prefix + "/" + p.key(), p.value()});
  for (const auto& b : module.named_buffers()) out.push_back({prefix + "/" + b.key(), b.value()});
}

void load_module_tensors(torch::nn::Module& module, const std::string& prefix,
                         const std::vector<NamedTensor>& tensors) {
  std::unordered_map<std::string, const torch::Tensor*> by_name;
  for (const auto& nt : tensors) by_name[nt.name] = &nt.tensor;
  torch::NoGradGuard guard;
  auto copy_into = [&](const std::string& key, torch::Tensor value) {
    auto it = by_name.find(prefix + "/" + key);
    if (it == by_name.end()) throw io_error("checkpoint missing tensor: " + prefix + "/" + key);
    if (it->second->sizes() != value.sizes())
      throw io_error("checkpoint tensor shape mismatch: " + prefix + "/" + key);
    value.copy_(it->second->to(value.scalar_type()));
  };
  for (const auto& p : module.named_parameters()) copy_into(p.key(), p.value());
  for (const auto& b : module.named_buffers()) copy_into(b.key(), b.value());
}

void save_model_checkpoint(const std::string& path, const ModelBundle& bundle, const json& meta) {
  CheckpointPayload payload;
  payload.arch = bundle.arch;
  payload.meta = meta;
  payload.meta["kind"] = "model";
  append_module_tensors(payload.tensors, *bundle.encoder, "encoder");
  append_module_tensors(payload.tensors, *bundle.decoder, "decoder");
  append_module_tensors(payload.tensors, *bundle.discriminator, "discriminator");
  write_checkpoint(path, payload);
}

ModelBundle load_model_checkpoint(const std::string& path, json* meta_out) {
  auto payload = read_checkpoint(path);
  auto bundle = init_models(payload.arch, 0);
  load_module_tensors(*bundle.encoder, "encoder", payload.tensors);
  load_module_tensors(*bundle.decoder, "decoder", payload.tensors);
  load_module_tensors(*bundle.discriminator, "discriminator", payload.tensors);
  if (meta_out) *meta_out = payload.meta;
  return bundle;
}

}  // namespace faceseal
