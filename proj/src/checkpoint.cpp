#include "eli/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "eli/error.hpp"
#include "json.hpp"

namespace eli {

using ojson = nlohmann::ordered_json;

const Matrix& Checkpoint::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw ParseError("checkpoint has no parameter '" + name + "'");
  return it->second;
}

double Checkpoint::number(const std::string& key) const {
  auto it = config.find(key);
  if (it == config.end()) throw ParseError("checkpoint has no config key '" + key + "'");
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ParseError("checkpoint config key '" + key + "' is not a number");
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  ojson j;
  j["format"] = Checkpoint::kFormat;
  j["kind"] = ckpt.kind;
  j["encoder"] = {{"name", ckpt.encoder.name},
                  {"dim", ckpt.encoder.dim},
                  {"seed", ckpt.encoder.seed},
                  {"max_tokens", ckpt.encoder.max_tokens},
                  {"url", ckpt.encoder.url},
                  {"frozen", ckpt.encoder.frozen}};
  j["config"] = ckpt.config;
  j["labels"] = ckpt.labels;
  ojson params = ojson::object();
  for (const auto& [name, m] : ckpt.params) {
    std::vector<double> data(m.data(), m.data() + m.size());  // column-major
    params[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
  }
  j["params"] = std::move(params);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_kind) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  Checkpoint ckpt;
  try {
    const ojson j = ojson::parse(buffer.str());
    if (j.at("format").get<int>() != Checkpoint::kFormat) {
      throw ParseError("unsupported checkpoint format in " + path.string());
    }
    ckpt.kind = j.at("kind").get<std::string>();
    const auto& e = j.at("encoder");
    ckpt.encoder.name = e.at("name").get<std::string>();
    ckpt.encoder.dim = e.at("dim").get<std::size_t>();
    ckpt.encoder.seed = e.at("seed").get<std::uint64_t>();
    ckpt.encoder.max_tokens = e.at("max_tokens").get<std::size_t>();
    ckpt.encoder.url = e.at("url").get<std::string>();
    ckpt.encoder.frozen = e.at("frozen").get<bool>();
    ckpt.config = j.at("config").get<std::map<std::string, std::string>>();
    ckpt.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& [name, p] : j.at("params").items()) {
      const auto rows = p.at("rows").get<Eigen::Index>();
      const auto cols = p.at("cols").get<Eigen::Index>();
      const auto data = p.at("data").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw ParseError("parameter '" + name + "' has the wrong number of values");
      }
      ckpt.params[name] = Eigen::Map<const Matrix>(data.data(), rows, cols);
    }
  } catch (const ojson::exception& ex) {
    throw ParseError("malformed checkpoint " + path.string() + ": " + ex.what());
  }
  if (!expected_kind.empty() && ckpt.kind != expected_kind) {
    throw ParseError(path.string() + " holds a " + ckpt.kind + " model, expected " + expected_kind);
  }
  return ckpt;
}

Checkpoint head_checkpoint(const std::string& kind, const EncoderConfig& encoder,
                           const LinearHead& head, std::vector<std::string> labels) {
  Checkpoint c;
  c.kind = kind;
  c.encoder = encoder;
  std::ostringstream scale;
  scale.precision(17);
  scale << head.input_scale();
  c.config["input_scale"] = scale.str();
  c.labels = std::move(labels);
  c.params["head.weights"] = head.weights;
  c.params["head.bias"] = head.bias;
  return c;
}

LinearHead head_from_checkpoint(const Checkpoint& ckpt, const std::string& kind,
                                std::size_t num_labels) {
  if (ckpt.kind != kind) throw ParseError("checkpoint holds a " + ckpt.kind + " model, expected " + kind);
  if (ckpt.labels.size() != num_labels) throw ParseError(kind + " checkpoint has the wrong label set");
  const Matrix& w = ckpt.param("head.weights");
  const Matrix& b = ckpt.param("head.bias");
  const std::size_t outputs = num_labels == 2 ? 1 : num_labels;
  if (static_cast<std::size_t>(w.rows()) != outputs || b.rows() != w.rows() || b.cols() != 1 ||
      w.cols() == 0) {
    throw ParseError(kind + " checkpoint head has the wrong shape");
  }
  if (static_cast<std::size_t>(w.cols()) != ckpt.encoder.dim) {
    throw ParseError(kind + " checkpoint head width differs from its encoder");
  }
  LinearHead head(static_cast<std::size_t>(w.cols()), outputs, ckpt.number("input_scale"));
  head.weights = w;
  head.bias = b;
  return head;
}

}  // namespace eli
