#include "faceseal/message.hpp"

#include <openssl/hmac.h>

#include <algorithm>
#include <stdexcept>

#include "faceseal/common.hpp"

namespace faceseal {

MessageBits::MessageBits(std::vector<std::uint8_t> b) : bits(std::move(b)) {
  for (auto v : bits)
    if (v > 1) throw std::invalid_argument("MessageBits: elements must be 0 or 1");
}

MessageBits generate_message(const std::vector<std::uint8_t>& key, const std::vector<std::uint8_t>& context,
                             int length) {
  if (key.empty()) throw std::invalid_argument("generate_message: key must be nonempty");
  if (length < 1) throw std::invalid_argument("generate_message: length must be >= 1");

  std::vector<std::uint8_t> bits;
  bits.reserve(length);
  std::uint32_t counter = 0;
  while (static_cast<int>(bits.size()) < length) {
    std::vector<std::uint8_t> block = context;
    block.push_back(static_cast<std::uint8_t>(counter >> 24));
    block.push_back(static_cast<std::uint8_t>(counter >> 16));
    block.push_back(static_cast<std::uint8_t>(counter >> 8));
    block.push_back(static_cast<std::uint8_t>(counter));
    unsigned char mac[32];
    unsigned int mac_len = 0;
    if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), block.data(), block.size(), mac, &mac_len))
      throw std::runtime_error("generate_message: HMAC failed");
    for (unsigned int i = 0; i < mac_len && static_cast<int>(bits.size()) < length; ++i)
      for (int b = 7; b >= 0 && static_cast<int>(bits.size()) < length; --b)
        bits.push_back((mac[i] >> b) & 1u);
    ++counter;
  }
  return MessageBits(std::move(bits));
}

MessageBits generate_message(const std::string& key, const std::string& context, int length) {
  return generate_message(std::vector<std::uint8_t>(key.begin(), key.end()),
                          std::vector<std::uint8_t>(context.begin(), context.end()), length);
}

std::string bits_to_hex(const MessageBits& m) {
  if (m.length() % 4 != 0) throw std::invalid_argument("bits_to_hex: length must be a multiple of 4");
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(m.length() / 4);
  for (int i = 0; i < m.length(); i += 4) {
    int v = (m.bits[i] << 3) | (m.bits[i + 1] << 2) | (m.bits[i + 2] << 1) | m.bits[i + 3];
    out.push_back(digits[v]);
  }
  return out;
}

MessageBits hex_to_bits(const std::string& hex, int length) {
  if (length % 4 != 0 || static_cast<int>(hex.size()) * 4 != length)
    throw std::invalid_argument("hex_to_bits: expected " + std::to_string(length / 4) + " hex characters");
  std::vector<std::uint8_t> bits;
  bits.reserve(length);
  for (char c : hex) {
    int v;
    if (c >= '0' && c <= '9')
      v = c - '0';
    else if (c >= 'a' && c <= 'f')
      v = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F')
      v = c - 'A' + 10;
    else
      throw std::invalid_argument(std::string("hex_to_bits: invalid character '") + c + "'");
    bits.push_back((v >> 3) & 1);
    bits.push_back((v >> 2) & 1);
    bits.push_back((v >> 1) & 1);
    bits.push_back(v & 1);
  }
  return MessageBits(std::move(bits));
}

MessageBits harden(const SoftBits& s) {
  std::vector<std::uint8_t> bits(s.values.size());
  for (std::size_t i = 0; i < s.values.size(); ++i) bits[i] = s.values[i] >= 0.5f ? 1 : 0;
  return MessageBits(std::move(bits));
}

MessageBits random_message(std::mt19937_64& rng, int length) {
  if (length < 1) throw std::invalid_argument("random_message: length must be >= 1");
  std::vector<std::uint8_t> bits(length);
  std::uniform_int_distribution<int> bit(0, 1);
  for (auto& b : bits) b = static_cast<std::uint8_t>(bit(rng));
  return MessageBits(std::move(bits));
}

torch::Tensor message_to_tensor(const MessageBits& m) {
  auto t = torch::empty({m.length()}, torch::kFloat32);
  for (int i = 0; i < m.length(); ++i) t[i] = static_cast<float>(m.bits[i]);
  return t;
}

SoftBits soft_from_tensor(const torch::Tensor& t) {
  if (!t.defined() || t.dim() != 1) throw std::invalid_argument("soft_from_tensor: expected a 1-D tensor");
  auto f = t.to(torch::kFloat32).contiguous();
  const float* p = f.data_ptr<float>();
  SoftBits s;
  s.values.assign(p, p + f.numel());
  return s;
}

}  // namespace faceseal
