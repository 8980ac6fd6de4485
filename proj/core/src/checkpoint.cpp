#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pens/error.hpp"
#include "pens/models.hpp"

namespace pens {

using json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[4] = {'P', 'E', 'N', 'S'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what);
    }
    const auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint32_t u32(const char* what) {
    const auto b = take(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
    return v;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

json config_json(const ModelConfig& c) {
  return {
      {"architecture", architecture_name(c.architecture)},
      {"pool", pool_name(c.pool)},
      {"feature", {{"mode", mode_name(c.feature.mode)}, {"words", c.feature.words}}},
      {"embedding_source", embedding_source_name(c.embedding_source)},
      {"embedding_name", c.embedding_name},
      {"embedding_dim", c.embedding_dim},
      {"trainable_embeddings", c.trainable_embeddings},
      {"min_count", c.min_count},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"optimizer",
       {{"learning_rate", c.optimizer.learning_rate},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"epsilon", c.optimizer.epsilon}}},
      {"seed", c.seed},
      {"conv_filters", c.conv_filters},
      {"kernel_size", c.kernel_size},
      {"dense_units", c.dense_units},
      {"dropout", c.dropout},
      {"hidden_units", c.hidden_units},
      {"spatial_dropout", c.spatial_dropout},
      {"init", c.init},
  };
}

ModelConfig config_of(const json& j) {
  ModelConfig c;
  c.architecture = parse_architecture(j.at("architecture").get<std::string>());
  c.pool = parse_pool_kind(j.at("pool").get<std::string>());
  c.feature.mode = parse_mode(j.at("feature").at("mode").get<std::string>());
  c.feature.words = j.at("feature").at("words").get<std::size_t>();
  c.embedding_source = parse_embedding_source(j.at("embedding_source").get<std::string>());
  c.embedding_name = j.at("embedding_name").get<std::string>();
  c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.trainable_embeddings = j.at("trainable_embeddings").get<bool>();
  c.min_count = j.at("min_count").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  const auto& o = j.at("optimizer");
  c.optimizer.learning_rate = o.at("learning_rate").get<double>();
  c.optimizer.beta1 = o.at("beta1").get<double>();
  c.optimizer.beta2 = o.at("beta2").get<double>();
  c.optimizer.epsilon = o.at("epsilon").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.conv_filters = j.at("conv_filters").get<std::size_t>();
  c.kernel_size = j.at("kernel_size").get<std::size_t>();
  c.dense_units = j.at("dense_units").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.hidden_units = j.at("hidden_units").get<std::size_t>();
  c.spatial_dropout = j.at("spatial_dropout").get<double>();
  c.init = j.at("init").get<std::string>();
  return c;
}

}  // namespace

std::string config_to_json(const ModelConfig& config) { return config_json(config).dump(2) + "\n"; }

ModelConfig config_from_json(std::string_view text) {
  try {
    return config_of(json::parse(text));
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid model config: ") + e.what());
  }
}

std::string checkpoint_bytes(const ClassifierModel& model) {
  const auto& h = model.history();
  json header = {
      {"config", config_json(model.config())},
      {"vocabulary", model.vocabulary().tokens()},
      {"labels", model.labels().codes()},
      {"num_tensors", model.parameters().size()},
      {"history",
       {{"batch_loss", h.batch_loss},
        {"epoch_train_loss", h.epoch_train_loss},
        {"epoch_train_accuracy", h.epoch_train_accuracy},
        {"epoch_validation_accuracy", h.epoch_validation_accuracy}}},
  };
  const std::string text = header.dump();

  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto& [name, tensor] : model.parameters()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (Real v : tensor.data()) {
      const float f = static_cast<float>(v);
      std::uint32_t bits = 0;
      std::memcpy(&bits, &f, sizeof bits);
      put_u32(out, bits);
    }
  }
  return out;
}

ClassifierModel checkpoint_from_bytes(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(4, "magic") != std::string_view(kMagic, 4)) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t header_size = in.u32("header length");
  json header;
  try {
    header = json::parse(in.take(header_size, "header"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
  }

  ModelConfig config;
  std::vector<std::string> tokens, codes;
  std::size_t num_tensors = 0;
  TrainingHistory history;
  try {
    config = config_of(header.at("config"));
    tokens = header.at("vocabulary").get<std::vector<std::string>>();
    codes = header.at("labels").get<std::vector<std::string>>();
    num_tensors = header.at("num_tensors").get<std::size_t>();
    const auto& hj = header.at("history");
    history.batch_loss = hj.at("batch_loss").get<std::vector<double>>();
    history.epoch_train_loss = hj.at("epoch_train_loss").get<std::vector<double>>();
    history.epoch_train_accuracy = hj.at("epoch_train_accuracy").get<std::vector<double>>();
    history.epoch_validation_accuracy =
        hj.at("epoch_validation_accuracy").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
  }

  Vocabulary vocab = Vocabulary::from_tokens(std::move(tokens));
  EmbeddingMatrix blank;
  blank.rows = vocab.size();
  blank.dim = config.embedding_dim;
  blank.values.assign(blank.rows * blank.dim, 0.0f);
  blank.trainable = config.trainable_embeddings;
  ClassifierModel model = ClassifierModel::build(config, std::move(vocab),
                                                 LabelVocabulary::from_codes(std::move(codes)), blank);

  const auto& params = model.parameters();
  if (num_tensors != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(num_tensors) +
                      " tensors, architecture needs " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < num_tensors; ++i) {
    const std::string name(in.take(in.u32("tensor name length"), "tensor name"));
    Tensor target = params[i].second;
    if (name != params[i].first) {
      throw FormatError("checkpoint tensor '" + name + "' where '" + params[i].first +
                        "' was expected");
    }
    const std::uint32_t rank = in.u32("tensor rank");
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(in.u32("tensor dims"));
    if (shape != target.shape()) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_string(shape) +
                        ", expected " + shape_string(target.shape()));
    }
    for (Real& v : target.data()) {
      const std::uint32_t bits = in.u32("tensor values");
      float f = 0;
      std::memcpy(&f, &bits, sizeof f);
      v = static_cast<Real>(f);
    }
  }
  if (!in.done()) throw FormatError("trailing bytes after checkpoint tensors");
  model.history() = std::move(history);
  return model;
}

void save_checkpoint(const ClassifierModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  const std::string bytes = checkpoint_bytes(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

ClassifierModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_bytes(buf.str());
}

}  // namespace pens
