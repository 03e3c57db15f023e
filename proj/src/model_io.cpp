#include "cyclomdp/model_io.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "cyclomdp/error.hpp"

namespace cyclomdp {

namespace {

using json = nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

json basis_to_json(const BasisSpec& basis) {
  json j;
  j["periods"] = basis.periods;
  j["harmonic_order"] = basis.harmonic_order;
  j["include_cross_terms"] = basis.include_cross_terms;
  j["constant_only"] = basis.constant_only;
  return j;
}

BasisSpec basis_from_json(const json& j) {
  if (j.at("constant_only").get<bool>())
    return constant_basis(j.at("periods").get<std::vector<double>>().at(0));
  return build_basis(j.at("periods").get<std::vector<double>>(),
                     j.at("harmonic_order").get<int>(),
                     j.at("include_cross_terms").get<bool>());
}

json read_model_file(const std::string& path, const char* expected_kind) {
  std::ifstream in(path);
  require(in.good(), strf("cannot open model file '%s'", path.c_str()));
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const std::exception& e) {
    fail(strf("model file '%s' is not valid JSON: %s", path.c_str(),
              e.what()));
  }
  require(j.value("format", "") == "cyclomdp-model",
          strf("'%s' is not a cyclomdp model file", path.c_str()));
  require(j.at("format_version").get<int>() == kFormatVersion,
          strf("model file '%s' has unsupported version %d", path.c_str(),
               j.at("format_version").get<int>()));
  require(j.at("kind").get<std::string>() == expected_kind,
          strf("model file '%s' holds a '%s', expected a '%s'", path.c_str(),
               j.at("kind").get<std::string>().c_str(), expected_kind));
  return j;
}

}  // namespace

void save_quantile_family(const QuantileFamily& family,
                          const std::string& path) {
  json j;
  j["format"] = "cyclomdp-model";
  j["format_version"] = kFormatVersion;
  j["kind"] = "quantile_family";
  j["basis"] = basis_to_json(family.basis());
  j["component_names"] = component_names(family.basis());
  j["curves"] = json::array();
  for (const auto& curve : family.curves) {
    json c;
    c["level"] = curve.level;
    c["beta"] = std::vector<double>(curve.beta.data(),
                                    curve.beta.data() + curve.beta.size());
    j["curves"].push_back(c);
  }
  write_text_atomic(path, j.dump(2) + "\n");
}

QuantileFamily load_quantile_family(const std::string& path) {
  json j = read_model_file(path, "quantile_family");
  BasisSpec basis = basis_from_json(j.at("basis"));
  std::vector<QuantileCurve> curves;
  for (const auto& c : j.at("curves")) {
    QuantileCurve curve;
    curve.level = c.at("level").get<double>();
    curve.basis = basis;
    auto beta = c.at("beta").get<std::vector<double>>();
    require(static_cast<int>(beta.size()) == basis.dimension(),
            strf("model file '%s': beta size %zu != basis dimension %d",
                 path.c_str(), beta.size(), basis.dimension()));
    curve.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), beta.size());
    curves.push_back(std::move(curve));
  }
  return make_family(std::move(curves));
}

void save_transition_model(const PeriodicTransitionModel& model,
                           const std::string& path) {
  json j;
  j["format"] = "cyclomdp-model";
  j["format_version"] = kFormatVersion;
  j["kind"] = "transition_model";
  j["num_states"] = model.num_states;
  j["basis"] = basis_to_json(model.basis);
  j["pi"] = std::vector<double>(model.pi.data(),
                                model.pi.data() + model.pi.size());
  j["gamma"] = json::array();  // (i, j) pairs in i-major order
  for (const auto& g : model.gamma)
    j["gamma"].push_back(
        std::vector<double>(g.data(), g.data() + g.size()));
  write_text_atomic(path, j.dump(2) + "\n");
}

PeriodicTransitionModel load_transition_model(const std::string& path) {
  json j = read_model_file(path, "transition_model");
  PeriodicTransitionModel model;
  model.num_states = j.at("num_states").get<int>();
  model.basis = basis_from_json(j.at("basis"));
  auto pi = j.at("pi").get<std::vector<double>>();
  require(static_cast<int>(pi.size()) == model.num_states,
          strf("model file '%s': pi size mismatch", path.c_str()));
  model.pi = Eigen::Map<const Eigen::VectorXd>(pi.data(), pi.size());
  const auto& gj = j.at("gamma");
  require(static_cast<int>(gj.size()) == model.num_states * model.num_states,
          strf("model file '%s': gamma block count mismatch", path.c_str()));
  for (const auto& g : gj) {
    auto coeffs = g.get<std::vector<double>>();
    require(static_cast<int>(coeffs.size()) == model.basis.dimension(),
            strf("model file '%s': gamma size mismatch", path.c_str()));
    model.gamma.push_back(
        Eigen::Map<const Eigen::VectorXd>(coeffs.data(), coeffs.size()));
  }
  return model;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), strf("cannot write '%s'", tmp.c_str()));
    out << content;
    require(out.good(), strf("write to '%s' failed", tmp.c_str()));
  }
  require(std::rename(tmp.c_str(), path.c_str()) == 0,
          strf("cannot rename '%s' to '%s'", tmp.c_str(), path.c_str()));
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), strf("hash_file: cannot open '%s'", path.c_str()));
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (got < static_cast<std::streamsize>(sizeof buf)) break;
  }
  return h;
}

}  // namespace cyclomdp
