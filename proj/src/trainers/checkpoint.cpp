#include "dlab/trainers/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <sstream>

namespace dlab::trainers {
namespace {

constexpr const char* kMagic = "DLABCKPT v1";

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

bool valid_token(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') return false;
  }
  return true;
}

}  // namespace

const NamedTensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw CheckpointError("checkpoint has no tensor '" + name + "'");
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out = std::string(kMagic) + "\n";
  out += "seed " + std::to_string(ckpt.seed) + "\n";
  out += "iteration " + std::to_string(ckpt.iteration) + "\n";
  for (const auto& [k, v] : ckpt.meta) {
    if (!valid_token(k) || !valid_token(v)) throw CheckpointError("checkpoint meta entries must be single tokens");
    out += "meta " + k + " " + v + "\n";
  }
  for (const auto& t : ckpt.tensors) {
    if (!valid_token(t.name)) throw CheckpointError("invalid tensor name '" + t.name + "'");
    if (element_count(t.shape) != t.data.size()) throw CheckpointError("tensor '" + t.name + "' shape/data mismatch");
    out += "tensor " + t.name;
    for (auto d : t.shape) out += " " + std::to_string(d);
    out += "\n";
  }
  out += "end\n";
  for (const auto& t : ckpt.tensors) {
    for (double x : t.data) {
      const auto bits = std::bit_cast<std::uint64_t>(x);
      for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
    }
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Checkpoint ckpt;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw CheckpointError("checkpoint header truncated");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    return line;
  };
  if (next_line() != kMagic) throw CheckpointError("not a checkpoint (bad magic)");
  bool seen_end = false;
  while (!seen_end) {
    std::istringstream line(next_line());
    std::string key;
    line >> key;
    if (key == "seed") {
      line >> ckpt.seed;
    } else if (key == "iteration") {
      line >> ckpt.iteration;
    } else if (key == "meta") {
      std::string k, v;
      line >> k >> v;
      ckpt.meta[k] = v;
    } else if (key == "tensor") {
      NamedTensor t;
      line >> t.name;
      std::size_t d;
      while (line >> d) t.shape.push_back(d);
      if (!line.eof()) throw CheckpointError("bad tensor shape on header line " + std::to_string(line_no));
      ckpt.tensors.push_back(std::move(t));
      continue;
    } else if (key == "end") {
      seen_end = true;
      continue;
    } else {
      throw CheckpointError("unknown header entry '" + key + "' on line " + std::to_string(line_no));
    }
    if (line.fail()) throw CheckpointError("malformed header line " + std::to_string(line_no));
  }
  std::size_t total = 0;
  for (const auto& t : ckpt.tensors) total += element_count(t.shape);
  if (bytes.size() - pos != total * 8) {
    throw CheckpointError("checkpoint payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                          std::to_string(total * 8));
  }
  for (auto& t : ckpt.tensors) {
    t.data.resize(element_count(t.shape));
    for (auto& x : t.data) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * b);
      x = std::bit_cast<double>(bits);
    }
  }
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw CheckpointError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace dlab::trainers
