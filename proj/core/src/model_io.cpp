#include "pidon/model_io.hpp"

#include <fstream>
#include <sstream>

#include "base64.hpp"
#include "pidon/dataset.hpp"
#include "pidon/errors.hpp"

namespace pidon {

using nlohmann::json;
using Eigen::Index;
using Eigen::MatrixXd;

namespace {

json matrix_json(const MatrixXd& m) {
  // Row-major payload.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", detail::encode_f64(rm.data(), static_cast<std::size_t>(rm.size()))}};
}

MatrixXd matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  if (rows < 0 || cols < 0) throw CorruptModel("negative matrix shape");
  const std::vector<double> v = detail::decode_f64(j.at("data").get<std::string>());
  if (static_cast<Index>(v.size()) != rows * cols) throw CorruptModel("matrix payload does not match its shape");
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

json mlp_json(const Mlp& net) {
  json layers = json::array();
  for (const Mlp::Layer& l : net.layers()) {
    layers.push_back({{"weight", matrix_json(l.weight)}, {"bias", matrix_json(l.bias)}});
  }
  const MlpSpec& s = net.spec();
  return {{"input_dim", s.input_dim},
          {"hidden", s.hidden},
          {"output_dim", s.output_dim},
          {"activation", "tanh"},
          {"init_seed", s.init_seed},
          {"layers", layers}};
}

Mlp mlp_from(const json& j) {
  MlpSpec s;
  s.input_dim = j.at("input_dim").get<std::size_t>();
  s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  s.output_dim = j.at("output_dim").get<std::size_t>();
  s.init_seed = j.at("init_seed").get<std::uint64_t>();
  if (j.at("activation").get<std::string>() != "tanh") throw CorruptModel("unsupported activation");
  Mlp net(s);
  const json& layers = j.at("layers");
  if (layers.size() != net.layers().size()) throw CorruptModel("layer count does not match the network shape");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Mlp::Layer& dst = net.layers()[l];
    MatrixXd w = matrix_from(layers[l].at("weight"));
    MatrixXd b = matrix_from(layers[l].at("bias"));
    if (w.rows() != dst.weight.rows() || w.cols() != dst.weight.cols() || b.rows() != 1 ||
        b.cols() != dst.bias.cols()) {
      throw CorruptModel("layer " + std::to_string(l) + " has the wrong shape");
    }
    dst.weight = std::move(w);
    dst.bias = std::move(b);
  }
  return net;
}

json row_json(const Eigen::RowVectorXd& v) { return detail::encode_f64(v.data(), static_cast<std::size_t>(v.size())); }

Eigen::RowVectorXd row_from(const json& j, Index expected) {
  const std::vector<double> v = detail::decode_f64(j.get<std::string>());
  if (static_cast<Index>(v.size()) != expected) throw CorruptModel("statistics vector has the wrong length");
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(), expected);
}

std::uint32_t content_crc(const json& body) {
  const std::string text = body.dump();
  return crc32c(std::as_bytes(std::span<const char>(text.data(), text.size())));
}

}  // namespace

json model_to_json(const OperatorModel& model) {
  json body;
  body["arch"] = to_string(model.arch());
  body["sensors"] = model.spec.sensors;
  body["latent"] = model.spec.latent;
  body["hidden"] = model.spec.hidden;
  body["pinn_width"] = model.spec.pinn_width;
  body["seed"] = model.spec.seed;
  body["state_dim"] = kStateDim;
  body["state_columns"] = kStateColumns;
  body["channel_order"] = {"Vs", "theta_vs"};
  json nets = json::object();
  if (model.is_deeponet()) {
    nets["branch"] = mlp_json(model.branch);
    if (model.arch() == Arch::StackedN) nets["branch_b"] = mlp_json(model.branch_b);
    nets["trunk"] = mlp_json(model.trunk);
    body["out_bias"] = row_json(model.out_bias);
  } else {
    nets["pinn"] = mlp_json(model.pinn);
  }
  body["networks"] = nets;
  if (model.norm) {
    const Normalization& n = *model.norm;
    body["normalization"] = {{"input_mean", row_json(n.input_mean)},
                             {"input_std", row_json(n.input_std)},
                             {"state_mean", row_json(n.state_mean)},
                             {"state_std", row_json(n.state_std)},
                             {"horizon", row_json(Eigen::RowVectorXd::Constant(1, n.horizon))}};
  }
  return {{"format_version", kModelFormatVersion}, {"crc32c", content_crc(body)}, {"model", body}};
}

OperatorModel model_from_json(const json& doc, std::optional<Arch> expected) {
  if (!doc.is_object() || !doc.contains("format_version")) throw CorruptModel("not a model document");
  if (!doc["format_version"].is_number_integer() || doc["format_version"].get<int>() != kModelFormatVersion) {
    throw VersionMismatch("model format_version " + doc["format_version"].dump() + ", expected " +
                          std::to_string(kModelFormatVersion));
  }
  try {
    const json& body = doc.at("model");
    if (doc.at("crc32c").get<std::uint32_t>() != content_crc(body)) throw CorruptModel("model checksum mismatch");
    ModelSpec spec;
    spec.arch = parse_arch(body.at("arch").get<std::string>());
    if (expected && *expected != spec.arch) {
      throw VersionMismatch("model architecture is " + std::string(to_string(spec.arch)) + ", expected " +
                            std::string(to_string(*expected)));
    }
    spec.sensors = body.at("sensors").get<std::size_t>();
    spec.latent = body.at("latent").get<std::size_t>();
    spec.hidden = body.at("hidden").get<std::vector<std::size_t>>();
    spec.pinn_width = body.at("pinn_width").get<std::size_t>();
    spec.seed = body.at("seed").get<std::uint64_t>();
    spec.validate();
    if (body.at("state_dim").get<std::size_t>() != kStateDim) throw CorruptModel("unsupported state dimension");

    OperatorModel model = OperatorModel::create(spec);
    const json& nets = body.at("networks");
    auto load_net = [&](const char* name, Mlp& dst) {
      Mlp net = mlp_from(nets.at(name));
      if (net.spec().input_dim != dst.spec().input_dim || net.spec().hidden != dst.spec().hidden ||
          net.spec().output_dim != dst.spec().output_dim) {
        throw CorruptModel(std::string("network '") + name + "' does not match the architecture");
      }
      dst = std::move(net);
    };
    if (model.is_deeponet()) {
      load_net("branch", model.branch);
      if (spec.arch == Arch::StackedN) load_net("branch_b", model.branch_b);
      load_net("trunk", model.trunk);
      model.out_bias = row_from(body.at("out_bias"), kStateDim);
    } else {
      load_net("pinn", model.pinn);
    }
    if (body.contains("normalization")) {
      const json& n = body["normalization"];
      const auto d = static_cast<Index>(spec.branch_input_dim());
      Normalization norm;
      norm.input_mean = row_from(n.at("input_mean"), d);
      norm.input_std = row_from(n.at("input_std"), d);
      norm.state_mean = row_from(n.at("state_mean"), kStateDim);
      norm.state_std = row_from(n.at("state_std"), kStateDim);
      norm.horizon = row_from(n.at("horizon"), 1)(0);
      model.norm = std::move(norm);
    }
    return model;
  } catch (const json::exception& e) {
    throw CorruptModel(std::string("malformed model document: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw CorruptModel(std::string("invalid model document: ") + e.what());
  }
}

void save_model(const OperatorModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << model_to_json(model).dump(1) << '\n';
  if (!os) throw IoError("cannot write " + path.string());
}

OperatorModel load_model(const std::filesystem::path& path, std::optional<Arch> expected) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read model file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  json doc;
  try {
    doc = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw CorruptModel(path.string() + ": " + e.what());
  }
  return model_from_json(doc, expected);
}

}  // namespace pidon
