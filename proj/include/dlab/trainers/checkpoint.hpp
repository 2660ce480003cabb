#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace dlab::trainers {

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

/// On-disk layout:
///
///   DLABCKPT v1\n
///   seed <u64>\n
///   iteration <n>\n
///   meta <key> <value>\n          (zero or more, sorted by key)
///   tensor <name> <d0> <d1> ...\n (one per tensor, payload order)
///   end\n
///   <payload: every tensor's elements as little-endian IEEE-754 float64>
struct Checkpoint {
  std::uint64_t seed = 0;
  std::size_t iteration = 0;
  std::map<std::string, std::string> meta;
  std::vector<NamedTensor> tensors;

  [[nodiscard]] const NamedTensor& tensor(const std::string& name) const;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace dlab::trainers
