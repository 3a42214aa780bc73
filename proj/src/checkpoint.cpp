// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace dun {

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw std::runtime_error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

void put_values(std::string& out, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) put_u64(out, std::bit_cast<std::uint64_t>(data[i]));
}

void get_values(const std::string& in, std::size_t& pos, double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<double>(get_u64(in, pos));
}

template <typename Fn>
void for_each_tensor(DunModel& m, std::vector<double>& prior_logits, Fn&& fn) {
  auto mat = [&](Matrix2D& t) { fn(t.data(), static_cast<std::size_t>(t.size())); };
  auto vec = [&](RowVector& t) { fn(t.data(), static_cast<std::size_t>(t.size())); };
  mat(m.input_block.weight.value);
  mat(m.input_block.bias.value);
  for (auto& h : m.hidden_blocks) {
    mat(h.linear.weight.value);
    mat(h.linear.bias.value);
    if (h.batchnorm) {
      mat(h.bn.scale.value);
      mat(h.bn.shift.value);
      vec(h.bn.running_mean);
      vec(h.bn.running_var);
    }
  }
  mat(m.output_block.weight.value);
  mat(m.output_block.bias.value);
  fn(prior_logits.data(), prior_logits.size());
  mat(m.variational_logits.value);
  mat(m.noise_log_std.value);
}

std::string header_for(const DunModel& m) {
  const auto& c = m.config();
  std::ostringstream os;
  os << "version=1\n"
     << "task=" << to_string(c.task) << "\n"
     << "input_dim=" << c.input_dim << "\n"
     << "width=" << c.width << "\n"
     << "max_depth=" << c.max_depth << "\n"
     << "output_dim=" << c.output_dim << "\n"
     << "residual=" << (c.residual ? 1 : 0) << "\n"
     << "batchnorm=" << (c.batchnorm ? 1 : 0) << "\n";
  os.precision(17);
  os << "dropout=" << c.dropout << "\n"
     << "seed=" << m.seed() << "\n";
  return os.str();
}

}  // namespace

std::string serialize_checkpoint(const DunModel& model) {
  std::string out(kCheckpointMagic, 8);
  const std::string header = header_for(model);
  put_u64(out, header.size());
  out += header;
  DunModel copy = model;
  auto prior = std::vector<double>(model.prior().logits().begin(), model.prior().logits().end());
  for_each_tensor(copy, prior, [&](double* d, std::size_t n) { put_values(out, d, n); });
  return out;
}

DunModel deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 8, kCheckpointMagic) != 0)
    throw std::runtime_error("not a DUN checkpoint (bad magic)");
  std::size_t pos = 8;
  const std::uint64_t header_len = get_u64(bytes, pos);
  if (pos + header_len > bytes.size()) throw std::runtime_error("checkpoint header truncated");
  std::istringstream header(bytes.substr(pos, header_len));
  pos += header_len;

  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(header, line);) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("malformed checkpoint header line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error(std::string("checkpoint header missing ") + key);
    return it->second;
  };
  if (get("version") != "1") throw std::runtime_error("unsupported checkpoint version " + get("version"));

  ArchitectureConfig c;
  c.task = parse_task(get("task"));
  c.input_dim = std::stoul(get("input_dim"));
  c.width = std::stoul(get("width"));
  c.max_depth = std::stoul(get("max_depth"));
  c.output_dim = std::stoul(get("output_dim"));
  c.residual = get("residual") == "1";
  c.batchnorm = get("batchnorm") == "1";
  c.dropout = std::stod(get("dropout"));
  const std::uint64_t seed = std::stoull(get("seed"));

  // Read the prior first: it sits in the middle of the payload.
  DunModel m = DunModel::zeros(c, seed, DepthDistribution::uniform(c.max_depth + 1));
  std::vector<double> prior(c.max_depth + 1);
  std::size_t cursor = pos;
  for_each_tensor(m, prior, [&](double* d, std::size_t n) { get_values(bytes, cursor, d, n); });
  if (cursor != bytes.size()) throw std::runtime_error("checkpoint has trailing bytes");

  DunModel out = DunModel::zeros(c, seed, DepthDistribution::from_logits(prior));
  cursor = pos;
  for_each_tensor(out, prior, [&](double* d, std::size_t n) { get_values(bytes, cursor, d, n); });
  return out;
}

void save_checkpoint(const DunModel& model, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path.string());
  const std::string bytes = serialize_checkpoint(model);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing checkpoint " + path.string());
}

DunModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace dun
