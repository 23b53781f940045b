#include "rulkit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rulkit {
namespace {

constexpr char kMagic[8] = {'R', 'K', 'C', 'K', 'P', 'T', '0', '1'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <typename T>
void write_le(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const std::string& path) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw std::runtime_error(path + ": truncated checkpoint");
  return to_little(v);
}

}  // namespace

void to_json(nlohmann::json& j, const NetConfig& cfg) {
  j = nlohmann::json{{"hidden_dim", cfg.hidden_dim},       {"horizon", cfg.horizon},
                     {"conv_filters", cfg.conv_filters},   {"kernel_sizes", cfg.kernel_sizes},
                     {"dropout_p", cfg.dropout_p},         {"learning_rate", cfg.learning_rate},
                     {"decay", cfg.decay},                 {"epochs", cfg.epochs},
                     {"batch_size", cfg.batch_size},       {"clip_norm", cfg.clip_norm}};
}

void from_json(const nlohmann::json& j, NetConfig& cfg) {
  NetConfig d;
  cfg.hidden_dim = j.value("hidden_dim", d.hidden_dim);
  cfg.horizon = j.value("horizon", d.horizon);
  cfg.conv_filters = j.value("conv_filters", d.conv_filters);
  cfg.kernel_sizes = j.value("kernel_sizes", d.kernel_sizes);
  cfg.dropout_p = j.value("dropout_p", d.dropout_p);
  cfg.learning_rate = j.value("learning_rate", d.learning_rate);
  cfg.decay = j.value("decay", d.decay);
  cfg.epochs = j.value("epochs", d.epochs);
  cfg.batch_size = j.value("batch_size", d.batch_size);
  cfg.clip_norm = j.value("clip_norm", d.clip_norm);
}

void save_checkpoint(const std::string& path, const TrajectoryModel& model,
                     const nlohmann::json& meta) {
  nlohmann::json header;
  header["format"] = "rulkit-trajectory-model";
  header["config"] = model.config();
  header["cycle_scale"] = model.cycle_scale();
  header["meta"] = meta;
  auto& tensors = header["tensors"] = nlohmann::json::array();
  for (const auto& b : model.layout().blocks())
    tensors.push_back({{"name", b.name}, {"shape", {b.rows, b.cols}}});
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  os.write(kMagic, sizeof kMagic);
  write_le<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  const VectorXd& p = model.params();
  for (Eigen::Index i = 0; i < p.size(); ++i) write_le<double>(os, p[i]);
  if (!os) throw std::runtime_error(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path + ": cannot open checkpoint");
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error(path + ": not a rulkit checkpoint");
  const auto len = read_le<std::uint64_t>(is, path);
  if (len > (std::uint64_t{1} << 30)) throw std::runtime_error(path + ": implausible header size");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len)))
    throw std::runtime_error(path + ": truncated header");
  const auto header = nlohmann::json::parse(text);

  TrajectoryModel model(header.at("config").get<NetConfig>(), header.at("cycle_scale").get<double>());
  const auto& tensors = header.at("tensors");
  const auto& blocks = model.layout().blocks();
  if (tensors.size() != blocks.size()) throw std::runtime_error(path + ": tensor count mismatch");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name") != blocks[i].name || t.at("shape")[0] != blocks[i].rows ||
        t.at("shape")[1] != blocks[i].cols)
      throw std::runtime_error(path + ": tensor " + t.at("name").get<std::string>() +
                               " does not match the configured layout");
  }
  VectorXd& p = model.params();
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = read_le<double>(is, path);
  if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error(path + ": trailing bytes");
  return {std::move(model), header.value("meta", nlohmann::json::object())};
}

}  // namespace rulkit
