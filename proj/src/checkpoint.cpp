#include "negprec/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include <json.hpp>

#include "negprec/error.hpp"

namespace negprec {

namespace {

using json = nlohmann::json;

constexpr const char* kFormat = "negprec-checkpoint";

template <typename Tensor>
json tensor_to_json(const Tensor& t) {
  json out;
  out["rows"] = t.rows();
  out["cols"] = t.cols();
  out["data"] = std::vector<double>(t.data(), t.data() + t.size());
  return out;
}

template <typename Tensor>
Tensor tensor_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw DataError("checkpoint tensor has inconsistent shape");
  }
  Tensor t(rows, cols);
  std::copy(data.begin(), data.end(), t.data());
  return t;
}

json sigmoid_heads_to_json(const std::vector<SigmoidHead>& heads) {
  json out = json::array();
  for (const auto& h : heads) out.push_back({{"hidden", tensor_to_json(h.hidden)}, {"out", tensor_to_json(h.out)}});
  return out;
}

json to_json(const Model& m) {
  json j;
  j["format"] = kFormat;
  j["version"] = kCheckpointVersion;
  j["architecture"] = std::string(to_string(m.architecture));
  j["dims"] = {{"K", m.dims.articles}, {"d1", m.dims.input}, {"d2", m.dims.hidden}, {"d3", m.dims.second_hidden}};
  j["encoder_kind"] = std::string(to_string(m.encoders.front().kind));
  j["tokenizer"] = {{"max_tokens", m.tokenizer.max_tokens},
                    {"vocab_buckets", m.tokenizer.vocab_buckets},
                    {"hash_seed", m.tokenizer.hash_seed}};
  auto& articles = j["articles"] = json::array();
  for (ArticleId a : m.articles.articles()) articles.push_back(a.number);

  auto& encoders = j["encoders"] = json::array();
  for (const auto& enc : m.encoders) {
    json e;
    e["kind"] = std::string(to_string(enc.kind));
    e["width"] = enc.width;
    if (enc.kind == EncoderKind::HashedBow) {
      e["embedding"] = tensor_to_json(enc.embedding);
    } else {
      json vectors = json::object();
      for (const auto& [id, v] : *enc.table) vectors[id] = std::vector<double>(v.data(), v.data() + v.size());
      e["vectors"] = std::move(vectors);
    }
    encoders.push_back(std::move(e));
  }
  j["first"] = sigmoid_heads_to_json(m.first);
  j["second"] = sigmoid_heads_to_json(m.second);
  auto& joint = j["joint"] = json::array();
  for (const auto& h : m.joint) joint.push_back({{"hidden", tensor_to_json(h.hidden)}, {"out", tensor_to_json(h.out)}});
  return j;
}

std::vector<SigmoidHead> sigmoid_heads_from_json(const json& j) {
  std::vector<SigmoidHead> out;
  for (const auto& h : j) {
    out.push_back({tensor_from_json<Eigen::MatrixXd>(h.at("hidden")), tensor_from_json<Eigen::VectorXd>(h.at("out"))});
  }
  return out;
}

Model from_json(const json& j) {
  if (!j.is_object() || j.value("format", "") != kFormat) throw DataError("not a negprec checkpoint");
  if (!j.contains("version")) throw DataError("checkpoint has no version field");
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
  }
  Model m;
  m.architecture = parse_architecture(j.at("architecture").get<std::string>());
  const auto& d = j.at("dims");
  m.dims = {d.at("K").get<Eigen::Index>(), d.at("d1").get<Eigen::Index>(), d.at("d2").get<Eigen::Index>(),
            d.at("d3").get<Eigen::Index>()};
  const auto& t = j.at("tokenizer");
  m.tokenizer = {t.at("max_tokens").get<std::size_t>(), t.at("vocab_buckets").get<std::size_t>(),
                 t.at("hash_seed").get<std::uint64_t>()};
  std::vector<ArticleId> articles;
  for (const auto& a : j.at("articles")) articles.push_back(ArticleId{a.get<int>()});
  m.articles = ArticleIndex(std::move(articles));

  std::shared_ptr<const VectorTable> shared_table;
  for (const auto& e : j.at("encoders")) {
    const auto kind = parse_encoder_kind(e.at("kind").get<std::string>());
    if (kind == EncoderKind::HashedBow) {
      EncoderParams p;
      p.kind = kind;
      p.width = e.at("width").get<Eigen::Index>();
      p.embedding = tensor_from_json<EmbeddingMatrix>(e.at("embedding"));
      m.encoders.push_back(std::move(p));
    } else {
      if (!shared_table) {
        auto table = std::make_shared<VectorTable>();
        for (const auto& [id, values] : e.at("vectors").items()) {
          const auto v = values.get<std::vector<double>>();
          table->emplace(id, Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
        shared_table = std::move(table);
      }
      m.encoders.push_back(EncoderParams::precomputed(shared_table));
    }
  }
  m.first = sigmoid_heads_from_json(j.at("first"));
  m.second = sigmoid_heads_from_json(j.at("second"));
  for (const auto& h : j.at("joint")) {
    m.joint.push_back({tensor_from_json<Eigen::MatrixXd>(h.at("hidden")), tensor_from_json<Eigen::MatrixXd>(h.at("out"))});
  }
  try {
    validate(m);
  } catch (const ShapeError& e) {
    throw DataError(std::string("checkpoint is inconsistent: ") + e.what());
  }
  return m;
}

bool is_json_path(const std::filesystem::path& path) { return path.extension() == ".json"; }

}  // namespace

std::vector<std::uint8_t> checkpoint_to_cbor(const Model& model) { return json::to_cbor(to_json(model)); }

Model checkpoint_from_cbor(const std::vector<std::uint8_t>& bytes) {
  try {
    return from_json(json::from_cbor(bytes));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  if (is_json_path(path)) {
    out << to_json(model).dump() << '\n';
  } else {
    const auto bytes = checkpoint_to_cbor(model);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  if (is_json_path(path)) {
    try {
      return from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": malformed checkpoint (" + e.what() + ")");
    }
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return checkpoint_from_cbor(bytes);
}

}  // namespace negprec
