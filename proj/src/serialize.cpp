#include <wgal/serialize.hpp>

#include <stdexcept>

namespace wgal {

nlohmann::json arch_to_json(const NetworkArch& arch) {
  nlohmann::json j;
  j["depth"] = arch.depth();
  j["widths"] = arch.widths;
  j["activation"] = arch.activation.name();
  if (arch.activation.kind == ActivationKind::relu_k) j["relu_power"] = arch.activation.power;
  j["b_theta"] = arch.b_theta;
  return j;
}

NetworkArch arch_from_json(const nlohmann::json& j) {
  NetworkArch arch;
  arch.widths = j.at("widths").get<std::vector<int>>();
  arch.activation =
      Activation::from_name(j.at("activation").get<std::string>(), j.value("relu_power", 1));
  arch.b_theta = j.at("b_theta").get<double>();
  if (j.contains("depth") && j.at("depth").get<int>() != arch.depth()) {
    throw std::invalid_argument("network JSON: depth does not match widths");
  }
  arch.validate();
  return arch;
}

nlohmann::json network_to_json(const NetworkParams& net) {
  nlohmann::json j;
  j["arch"] = arch_to_json(net.arch());
  nlohmann::json layers = nlohmann::json::array();
  for (int l = 1; l <= net.arch().depth(); ++l) {
    const auto a = net.weights(l);
    const auto b = net.bias(l);
    layers.push_back({{"A", std::vector<double>(a.begin(), a.end())},
                      {"b", std::vector<double>(b.begin(), b.end())}});
  }
  j["layers"] = std::move(layers);
  return j;
}

NetworkParams network_from_json(const nlohmann::json& j) {
  NetworkParams net(arch_from_json(j.at("arch")));
  const auto& layers = j.at("layers");
  if (!layers.is_array() || static_cast<int>(layers.size()) != net.arch().depth()) {
    throw std::invalid_argument("network JSON: layer count does not match depth");
  }
  for (int l = 1; l <= net.arch().depth(); ++l) {
    const auto a = layers[l - 1].at("A").get<std::vector<double>>();
    const auto b = layers[l - 1].at("b").get<std::vector<double>>();
    auto wa = net.weights(l);
    auto wb = net.bias(l);
    if (a.size() != wa.size() || b.size() != wb.size()) {
      throw std::invalid_argument("network JSON: layer " + std::to_string(l) + " has wrong shape");
    }
    std::copy(a.begin(), a.end(), wa.begin());
    std::copy(b.begin(), b.end(), wb.begin());
  }
  return net;
}

}  // namespace wgal
