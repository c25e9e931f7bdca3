#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace faceseal {

inline constexpr int kDefaultMessageBits = 128;

/// Hard message: a fixed-length vector of 0/1 bits.
struct MessageBits {
  std::vector<std::uint8_t> bits;

  MessageBits() = default;
  explicit MessageBits(std::vector<std::uint8_t> b);

  int length() const { return static_cast<int>(bits.size()); }
  bool operator==(const MessageBits&) const = default;
};

/// Decoder output before thresholding: values in [0,1].
struct SoftBits {
  std::vector<float> values;
  int length() const { return static_cast<int>(values.size()); }
};

/// Deterministic keyed message: HMAC-SHA256(key, context || counter), expanded
/// to `length` bits. Same (key, context) always yields the same message.
MessageBits generate_message(const std::vector<std::uint8_t>& key, const std::vector<std::uint8_t>& context,
                             int length = kDefaultMessageBits);
MessageBits generate_message(const std::string& key, const std::string& context,
                             int length = kDefaultMessageBits);

/// Lowercase hex, big-endian bit order (bit 0 is the MSB of the first nibble).
/// Message length must be a multiple of 4.
std::string bits_to_hex(const MessageBits& m);

/// Inverse of bits_to_hex; `length` must equal 4 * strlen(hex).
MessageBits hex_to_bits(const std::string& hex, int length);

/// Threshold at 0.5; a value of exactly 0.5 maps to 1.
MessageBits harden(const SoftBits& s);

MessageBits random_message(std::mt19937_64& rng, int length);

torch::Tensor message_to_tensor(const MessageBits& m);  // float32 [L]
SoftBits soft_from_tensor(const torch::Tensor& t);      // from 1-D [L]

}  // namespace faceseal
