#include "kgpath/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "kgpath/errors.hpp"

namespace kgpath {

namespace {

constexpr char kMagic[8] = {'K', 'G', 'P', 'C', 'K', 'P', 'T', '1'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

nlohmann::json config_json(const structural::TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"steps", c.steps},
          {"hidden_dim", c.hidden_dim},
          {"seed", c.seed},
          {"init_range", c.init_range},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon}};
}

structural::TrainConfig config_from_json(const nlohmann::json& j) {
  structural::TrainConfig c;
  c.epochs = j.at("epochs");
  c.batch_size = j.at("batch_size");
  c.learning_rate = j.at("learning_rate");
  c.steps = j.at("steps");
  c.hidden_dim = j.at("hidden_dim");
  c.seed = j.at("seed");
  c.init_range = j.at("init_range");
  c.adam_beta1 = j.at("adam_beta1");
  c.adam_beta2 = j.at("adam_beta2");
  c.adam_epsilon = j.at("adam_epsilon");
  return c;
}

}  // namespace

std::uint64_t vocabulary_hash(const std::vector<std::string>& names) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (const auto& n : names) {
    for (unsigned char c : n) mix(c);
    mix(0);
  }
  return h;
}

void save_checkpoint(const std::string& path, const structural::ReasonerParams& params,
                     const CheckpointMeta& meta) {
  params.check_shapes();
  nlohmann::json j;
  j["format"] = 1;
  j["word_dim"] = params.word_dim;
  j["hidden_dim"] = params.hidden_dim;
  j["num_relations"] = params.num_relations;
  j["config"] = config_json(meta.train);
  j["entity_vocab_hash"] = meta.entity_vocab_hash;
  j["relation_vocab_hash"] = meta.relation_vocab_hash;
  auto tensors = params.tensors();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    j["tensors"].push_back({{"name", t.name},
                            {"shape", {t.value->rows(), t.value->cols()}},
                            {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.value->size());
  }
  const std::string header = j.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  auto len = to_little(static_cast<std::uint64_t>(header.size()));
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& t : tensors) {
    for (Eigen::Index i = 0; i < t.value->size(); ++i) {
      auto f = to_little(static_cast<float>(t.value->data()[i]));
      out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
  }
  if (!out) throw Error("failed writing checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw Error("not a checkpoint file: " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  len = to_little(len);
  if (!in || len > (1ULL << 30)) throw Error("corrupt checkpoint header: " + path);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error("truncated checkpoint header: " + path);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt checkpoint metadata: " + std::string(e.what()));
  }

  LoadedCheckpoint ck;
  try {
    ck.meta.train = config_from_json(j.at("config"));
    ck.meta.entity_vocab_hash = j.at("entity_vocab_hash");
    ck.meta.relation_vocab_hash = j.at("relation_vocab_hash");
    const int word_dim = j.at("word_dim");
    const int hidden_dim = j.at("hidden_dim");
    const int num_relations = j.at("num_relations");
    ck.params = structural::ReasonerParams::init(word_dim, hidden_dim, num_relations, 0, 1.0);

    std::vector<float> data;
    {
      std::vector<char> rest((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
      if (rest.size() % sizeof(float) != 0) throw Error("checkpoint data is not float32-aligned");
      data.resize(rest.size() / sizeof(float));
      std::memcpy(data.data(), rest.data(), rest.size());
      for (auto& f : data) f = to_little(f);
    }
    const auto& listed = j.at("tensors");
    for (auto& t : ck.params.tensors()) {
      auto it = std::find_if(listed.begin(), listed.end(),
                             [&](const nlohmann::json& e) { return e.at("name") == t.name; });
      if (it == listed.end()) throw Error("checkpoint lacks tensor " + t.name);
      const auto rows = (*it).at("shape").at(0).get<Eigen::Index>();
      const auto cols = (*it).at("shape").at(1).get<Eigen::Index>();
      const auto offset = (*it).at("offset").get<std::uint64_t>();
      if (rows != t.value->rows() || cols != t.value->cols())
        throw Error("checkpoint tensor " + t.name + " has unexpected shape");
      if (offset + static_cast<std::uint64_t>(rows * cols) > data.size())
        throw Error("checkpoint truncated in tensor " + t.name);
      for (Eigen::Index i = 0; i < rows * cols; ++i)
        t.value->data()[i] = static_cast<double>(data[offset + static_cast<std::uint64_t>(i)]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt checkpoint metadata: " + std::string(e.what()));
  }
  return ck;
}

void check_compatible(const CheckpointMeta& meta, const KnowledgeGraph& kg) {
  if (meta.relation_vocab_hash != vocabulary_hash(kg.relations().names()))
    throw Error("checkpoint was trained on a different relation vocabulary");
  if (meta.entity_vocab_hash != vocabulary_hash(kg.entities().names()))
    throw Error("checkpoint was trained on a different entity vocabulary");
}

}  // namespace kgpath
