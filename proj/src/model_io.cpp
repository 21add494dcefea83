#include "mdtc/model_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "mdtc/errors.hpp"

namespace mdtc {

namespace {

using nlohmann::json;

constexpr const char* kModelMagic = "MDTC-MODEL v1";
constexpr const char* kAdamMagic = "MDTC-ADAM v1";

void write_f64le(std::ostream& out, const Tensor& t) {
  std::vector<unsigned char> buf(t.size() * 8);
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &t[i], 8);
    for (int b = 0; b < 8; ++b)
      buf[i * 8 + static_cast<std::size_t>(b)] =
          static_cast<unsigned char>(bits >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

void read_f64le(std::istream& in, Tensor& t, const std::string& name) {
  std::vector<unsigned char> buf(t.size() * 8);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw ParseError("model file truncated inside block " + name);
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b)
      bits = (bits << 8) | buf[i * 8 + static_cast<std::size_t>(b)];
    double v;
    std::memcpy(&v, &bits, 8);
    t[i] = v;
  }
}

json specs_to_json(const std::vector<ConvSpec>& specs) {
  json arr = json::array();
  for (const auto& s : specs) arr.push_back({s.width, s.filters});
  return arr;
}

std::vector<ConvSpec> specs_from_json(const json& arr) {
  std::vector<ConvSpec> specs;
  for (const auto& e : arr)
    specs.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
  return specs;
}

json manifest_of(const ParamSet& params) {
  json arr = json::array();
  for (const auto& ref : tensor_refs(params))
    arr.push_back({ref.name, ref.tensor->shape()});
  return arr;
}

void check_manifest(const json& manifest, const ParamSet& params,
                    const std::string& what) {
  auto refs = tensor_refs(params);
  if (manifest.size() != refs.size())
    throw ParseError(what + ": manifest lists " +
                     std::to_string(manifest.size()) + " blocks, expected " +
                     std::to_string(refs.size()));
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const std::string name = manifest[i].at(0).get<std::string>();
    const auto shape = manifest[i].at(1).get<std::vector<std::size_t>>();
    if (name != refs[i].name || shape != refs[i].tensor->shape())
      throw ParseError(what + ": block " + std::to_string(i) + " is " + name +
                       Tensor::shape_str(shape) + ", expected " +
                       refs[i].name +
                       Tensor::shape_str(refs[i].tensor->shape()));
  }
}

std::string read_line(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("unexpected end of " + path);
  return line;
}

json parse_header(std::istream& in, const std::string& path,
                  const char* magic) {
  if (read_line(in, path) != magic)
    throw ParseError(path + ": bad magic; not a " + std::string(magic) +
                     " file");
  try {
    return json::parse(read_line(in, path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": bad header: " + e.what());
  }
}

// Rebuilds an all-zero parameter layout from the header's structural fields.
ParamSet layout_from_header(const json& h, std::size_t embed_dim,
                            std::size_t vocab_size, std::size_t n_labels,
                            std::size_t n_domains) {
  ParamSet ps;
  ps.embedding.table = Tensor::zeros({vocab_size, embed_dim});
  auto make_bank = [&](const json& spec_arr) {
    ConvBank bank;
    bank.specs = specs_from_json(spec_arr);
    for (const auto& s : bank.specs) {
      bank.weights.push_back(Tensor::zeros({s.width * embed_dim, s.filters}));
      bank.biases.push_back(Tensor::zeros({s.filters}));
    }
    return bank;
  };
  const json& banks = h.at("banks");
  ps.shared = make_bank(banks.at("shared"));
  for (const auto& p : banks.at("privates")) ps.privates.push_back(make_bank(p));

  std::size_t repr = ps.shared.output_dim();
  if (!ps.privates.empty()) repr += ps.privates[0].output_dim();
  ps.classifier = Linear{Tensor::zeros({repr, n_labels}),
                         Tensor::zeros({n_labels})};
  const json& heads = h.at("heads");
  if (heads.at("discriminator").get<bool>())
    ps.discriminator = Linear{
        Tensor::zeros({ps.shared.output_dim(), n_domains}),
        Tensor::zeros({n_domains})};
  if (heads.at("generator").get<bool>()) {
    const std::size_t gin = ps.privates.empty() ? ps.shared.output_dim()
                                                : ps.privates[0].output_dim();
    ps.generator =
        Linear{Tensor::zeros({gin, n_domains}), Tensor::zeros({n_domains})};
  }
  return ps;
}

}  // namespace

void save_model(const ModelBundle& bundle, const std::string& path) {
  const Model& m = bundle.model;
  json h;
  h["arch"] = kind_name(m.kind);
  h["switches"] = {{"adversary", m.switches.adversary},
                   {"generator", m.switches.generator}};
  h["hyper"] = {{"lambda_d", m.hyper.lambda_d},
                {"lambda_g", m.hyper.lambda_g},
                {"dropout", m.hyper.dropout},
                {"embed_dim", m.hyper.embed_dim},
                {"learning_rate", m.hyper.learning_rate},
                {"conv_specs", specs_to_json(m.hyper.conv_specs)}};
  h["labels"] = bundle.labels;
  h["domains"] = bundle.domains;
  h["vocab_size"] = m.vocab_size;
  h["banks"] = {{"shared", specs_to_json(m.params.shared.specs)},
                {"privates", json::array()}};
  for (const auto& p : m.params.privates)
    h["banks"]["privates"].push_back(specs_to_json(p.specs));
  h["heads"] = {{"discriminator", m.params.discriminator.has_value()},
                {"generator", m.params.generator.has_value()}};
  h["tokenizer"] = {
      {"mode", bundle.tokenizer.mode == TokenMode::Byte ? "byte" : "word"},
      {"max_len", bundle.tokenizer.max_len},
      {"lowercase", bundle.tokenizer.lowercase},
      {"min_freq", bundle.tokenizer.min_freq}};
  if (bundle.vocab.mode == TokenMode::Word) h["vocab"] = bundle.vocab.words;
  h["params"] = manifest_of(m.params);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write model file: " + path);
  out << kModelMagic << '\n' << h.dump() << '\n';
  for (const auto& ref : tensor_refs(m.params)) write_f64le(out, *ref.tensor);
  if (!out) throw ParseError("write failed: " + path);
}

ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open model file: " + path);
  json h = parse_header(in, path, kModelMagic);

  ModelBundle bundle;
  try {
    Model& m = bundle.model;
    m.kind = kind_from_name(h.at("arch").get<std::string>());
    m.switches.adversary = h.at("switches").at("adversary").get<bool>();
    m.switches.generator = h.at("switches").at("generator").get<bool>();
    const json& hy = h.at("hyper");
    m.hyper.lambda_d = hy.at("lambda_d").get<double>();
    m.hyper.lambda_g = hy.at("lambda_g").get<double>();
    m.hyper.dropout = hy.at("dropout").get<double>();
    m.hyper.embed_dim = hy.at("embed_dim").get<std::size_t>();
    m.hyper.learning_rate = hy.at("learning_rate").get<double>();
    m.hyper.conv_specs = specs_from_json(hy.at("conv_specs"));
    bundle.labels = h.at("labels").get<std::vector<std::string>>();
    bundle.domains = h.at("domains").get<std::vector<std::string>>();
    m.vocab_size = h.at("vocab_size").get<std::size_t>();
    m.n_labels = bundle.labels.size();
    m.n_domains = bundle.domains.size();

    const json& tok = h.at("tokenizer");
    const std::string mode = tok.at("mode").get<std::string>();
    if (mode != "byte" && mode != "word")
      throw ParseError("unknown tokenizer mode: " + mode);
    bundle.tokenizer.mode = mode == "byte" ? TokenMode::Byte : TokenMode::Word;
    bundle.tokenizer.max_len = tok.at("max_len").get<std::size_t>();
    bundle.tokenizer.lowercase = tok.at("lowercase").get<bool>();
    bundle.tokenizer.min_freq = tok.at("min_freq").get<std::size_t>();
    if (bundle.tokenizer.mode == TokenMode::Byte) {
      bundle.vocab = byte_vocab();
    } else {
      bundle.vocab.mode = TokenMode::Word;
      bundle.vocab.words = h.at("vocab").get<std::vector<std::string>>();
      for (std::size_t i = 0; i < bundle.vocab.words.size(); ++i)
        bundle.vocab.word_to_id[bundle.vocab.words[i]] =
            static_cast<int>(2 + i);
    }

    m.params = layout_from_header(h, m.hyper.embed_dim, m.vocab_size,
                                  m.n_labels, m.n_domains);
    check_manifest(h.at("params"), m.params, path);
  } catch (const json::exception& e) {
    throw ParseError(path + ": bad header: " + e.what());
  }
  for (auto& ref : tensor_refs(bundle.model.params))
    read_f64le(in, *ref.tensor, ref.name);
  return bundle;
}

void save_adam_state(const AdamState& state, const ParamSet& params,
                     const std::string& path) {
  json h;
  h["t"] = state.t;
  h["config"] = {{"alpha", state.config.alpha},
                 {"beta1", state.config.beta1},
                 {"beta2", state.config.beta2},
                 {"eps", state.config.eps}};
  h["params"] = manifest_of(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write optimizer file: " + path);
  out << kAdamMagic << '\n' << h.dump() << '\n';
  for (const auto& ref : tensor_refs(state.m)) write_f64le(out, *ref.tensor);
  for (const auto& ref : tensor_refs(state.v)) write_f64le(out, *ref.tensor);
  if (!out) throw ParseError("write failed: " + path);
}

AdamState load_adam_state(const std::string& path, const ParamSet& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open optimizer file: " + path);
  json h = parse_header(in, path, kAdamMagic);
  AdamState state;
  try {
    state.t = h.at("t").get<std::uint64_t>();
    const json& c = h.at("config");
    state.config.alpha = c.at("alpha").get<double>();
    state.config.beta1 = c.at("beta1").get<double>();
    state.config.beta2 = c.at("beta2").get<double>();
    state.config.eps = c.at("eps").get<double>();
    state.m = zeros_like(params);
    state.v = zeros_like(params);
    check_manifest(h.at("params"), state.m, path);
  } catch (const json::exception& e) {
    throw ParseError(path + ": bad header: " + e.what());
  }
  for (auto& ref : tensor_refs(state.m)) read_f64le(in, *ref.tensor, ref.name);
  for (auto& ref : tensor_refs(state.v)) read_f64le(in, *ref.tensor, ref.name);
  return state;
}

}  // namespace mdtc
