#include "semi3/errors.hpp"
#include "semi3/model.hpp"
#include "semi3/run_config.hpp"

#include "binary_io.hpp"

#include <fstream>
#include <map>

namespace semi3 {
namespace {

constexpr char kMagic[8] = {'S', '3', 'N', 'E', 'T', '0', '0', '1'};

struct Record {
  Shape shape;
  Eigen::VectorXd values;
};

}  // namespace

void save_checkpoint(const Semi3Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, sizeof kMagic);
  const ParameterStore& store = model.store();
  io::put_le(out, static_cast<std::uint32_t>(store.names().size()));
  for (const std::string& name : store.names()) {
    const Tensor& value = store.get(name)->value;
    io::put_string(out, name);
    io::put_le(out, static_cast<std::uint8_t>(value.rank()));
    for (std::size_t d : value.shape()) io::put_le(out, static_cast<std::uint64_t>(d));
    for (std::size_t i = 0; i < value.size(); ++i) io::put_f64(out, value[i]);
  }
  std::vector<std::pair<std::string, std::string>> membership;
  for (const auto& [group, members] : store.groups()) {
    for (const std::string& member : members) membership.emplace_back(member, group);
  }
  io::put_le(out, static_cast<std::uint32_t>(membership.size()));
  for (const auto& [member, group] : membership) {
    io::put_string(out, member);
    io::put_string(out, group);
  }
  io::put_string(out, to_text(model.config()));
  if (!out) throw FormatError("failed writing checkpoint " + path.string());
}

Semi3Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError(path.string() + ": bad magic, not an S3NET001 checkpoint");
  }
  std::uint32_t count = 0;
  if (!io::get_le(in, count)) throw FormatError(path.string() + ": truncated before parameter count");

  std::vector<std::pair<std::string, Record>> records;
  std::string last = "<header>";
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name;
    if (!io::get_string(in, name)) throw FormatError(path.string() + ": truncated name after '" + last + "'");
    std::uint8_t rank = 0;
    if (!io::get_le(in, rank)) throw FormatError(path.string() + ": truncated rank of '" + name + "'");
    Record record;
    for (std::uint8_t d = 0; d < rank; ++d) {
      std::uint64_t dim = 0;
      if (!io::get_le(in, dim) || dim == 0 || dim > (1ull << 32)) {
        throw FormatError(path.string() + ": bad or truncated dims of '" + name + "'");
      }
      record.shape.push_back(static_cast<std::size_t>(dim));
    }
    record.values.resize(static_cast<Eigen::Index>(shape_size(record.shape)));
    for (Eigen::Index k = 0; k < record.values.size(); ++k) {
      if (!io::get_f64(in, record.values[k])) throw FormatError(path.string() + ": truncated values of '" + name + "'");
    }
    last = name;
    records.emplace_back(std::move(name), std::move(record));
  }

  std::uint32_t entries = 0;
  if (!io::get_le(in, entries)) throw FormatError(path.string() + ": truncated before group table");
  std::map<std::string, std::vector<std::string>> groups;
  for (std::uint32_t i = 0; i < entries; ++i) {
    std::string member, group;
    if (!io::get_string(in, member) || !io::get_string(in, group)) {
      throw FormatError(path.string() + ": truncated group table");
    }
    groups[group].push_back(member);
  }
  std::string config_text;
  if (!io::get_string(in, config_text)) throw FormatError(path.string() + ": truncated model configuration");

  ModelConfig config;
  try {
    config = parse_model_config(config_text);
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": bad model configuration: " + e.what());
  }
  Semi3Model model(config);
  ParameterStore& store = model.store();
  if (records.size() != store.names().size()) {
    throw FormatError(path.string() + ": holds " + std::to_string(records.size()) + " parameters, model expects " +
                      std::to_string(store.names().size()));
  }
  for (auto& [name, record] : records) {
    if (!store.contains(name)) throw FormatError(path.string() + ": unexpected parameter '" + name + "'");
    auto p = store.get(name);
    if (p->value.shape() != record.shape) {
      throw FormatError(path.string() + ": parameter '" + name + "' has shape " + shape_string(record.shape) +
                        ", model expects " + shape_string(p->value.shape()));
    }
    p->value = Tensor(record.shape, std::move(record.values));
  }
  for (const auto& [group, members] : groups) store.tie_group(group, members);
  return model;
}

}  // namespace semi3
