#include "muco/encoder/encoder.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "muco/grad/ops.hpp"

namespace muco {

namespace {

std::vector<double> uniform_init(Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

Tensor random_param(Rng& rng, grad::Shape shape) {
  const auto n = grad::shape_numel(shape);
  return Tensor(std::move(shape), uniform_init(rng, n), true);
}

void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
  out << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      if (c) out << ' ';
      out << t.at(r, c);
    }
    out << '\n';
  }
}

Tensor read_tensor(std::istream& in, const std::string& name, bool vector_shape) {
  std::string header;
  std::size_t rows = 0;
  std::size_t cols = 0;
  if (!(in >> header >> rows >> cols) || header != name) {
    throw std::runtime_error("encoder file: expected section '" + name + "'");
  }
  std::vector<double> values(rows * cols);
  for (auto& v : values) {
    if (!(in >> v)) throw std::runtime_error("encoder file: truncated section '" + name + "'");
  }
  if (vector_shape) return Tensor({cols}, std::move(values));
  return Tensor({rows, cols}, std::move(values));
}

}  // namespace

Vocabulary::Vocabulary() {
  add(kPadToken);
  add(kUnkToken);
}

std::size_t Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const std::size_t id = tokens_.size();
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

std::optional<std::size_t> Vocabulary::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::id(const std::string& token) const {
  if (auto found = find(token)) return *found;
  if (!unknown_enabled_) throw std::out_of_range("token not in vocabulary: " + token);
  return kUnk;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, Rng& rng) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file " + path.string());
  EmbeddingTable result;
  std::vector<double> rows;
  std::size_t dim = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> values;
    double v = 0.0;
    while (fields >> v) values.push_back(v);
    if (!fields.eof()) {
      throw std::runtime_error("embedding file line " + std::to_string(line_no) +
                               ": non-numeric value");
    }
    if (values.empty()) {
      throw std::runtime_error("embedding file line " + std::to_string(line_no) +
                               ": no vector values");
    }
    if (dim == 0) {
      dim = values.size();
      rows = uniform_init(rng, 2 * dim);
    } else if (values.size() != dim) {
      throw std::runtime_error("embedding file line " + std::to_string(line_no) + ": dimension " +
                               std::to_string(values.size()) + " differs from " +
                               std::to_string(dim));
    }
    if (result.vocab.find(token)) {
      throw std::runtime_error("embedding file line " + std::to_string(line_no) +
                               ": duplicate token '" + token + "'");
    }
    result.vocab.add(token);
    rows.insert(rows.end(), values.begin(), values.end());
  }
  if (dim == 0) throw std::runtime_error("embedding file " + path.string() + " is empty");
  result.table = Tensor({result.vocab.size(), dim}, std::move(rows));
  return result;
}

Encoder Encoder::create(Vocabulary vocab, const EncoderConfig& config, Rng& rng) {
  if (config.embed_dim == 0 || config.hidden_dim == 0) {
    throw std::invalid_argument("encoder dimensions must be positive");
  }
  Encoder enc;
  enc.window_ = config.window;
  enc.train_embeddings_ = config.train_embeddings;
  enc.embedding_ = random_param(rng, {vocab.size(), config.embed_dim});
  enc.vocab_ = std::move(vocab);
  const std::size_t span = 2 * config.window + 1;
  enc.mix_weight_ = random_param(rng, {span * config.embed_dim, config.hidden_dim});
  enc.mix_bias_ = random_param(rng, {config.hidden_dim});
  enc.out_weight_ = random_param(rng, {config.hidden_dim, config.hidden_dim});
  enc.out_bias_ = random_param(rng, {config.hidden_dim});
  enc.set_trainable(true);
  return enc;
}

Encoder Encoder::create(const EmbeddingTable& embeddings, const EncoderConfig& config, Rng& rng) {
  EncoderConfig adjusted = config;
  adjusted.embed_dim = embeddings.table.cols();
  Encoder enc = create(embeddings.vocab, adjusted, rng);
  auto dst = enc.embedding_.mutable_values();
  const auto src = embeddings.table.values();
  std::copy(src.begin(), src.end(), dst.begin());
  return enc;
}

void Encoder::set_trainable(bool trainable) {
  embedding_.set_requires_grad(trainable && train_embeddings_);
  for (Tensor* t : {&mix_weight_, &mix_bias_, &out_weight_, &out_bias_}) {
    t->set_requires_grad(trainable);
  }
}

void Encoder::set_train_embeddings(bool value) {
  train_embeddings_ = value;
  if (mix_weight_.defined()) embedding_.set_requires_grad(value && mix_weight_.requires_grad());
}

std::vector<std::size_t> Encoder::token_ids(const Sentence& sentence) const {
  std::vector<std::size_t> ids;
  ids.reserve(sentence.size());
  for (const auto& t : sentence.tokens) ids.push_back(vocab_.id(t));
  return ids;
}

std::vector<std::size_t> Encoder::window_ids(const std::vector<std::size_t>& ids,
                                             std::size_t index) const {
  if (index >= ids.size()) {
    throw std::out_of_range("token index " + std::to_string(index) + " outside sentence of length " +
                            std::to_string(ids.size()));
  }
  std::vector<std::size_t> out;
  out.reserve(2 * window_ + 1);
  for (std::size_t k = 0; k < 2 * window_ + 1; ++k) {
    const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(index + k) -
                               static_cast<std::ptrdiff_t>(window_);
    const bool inside = pos >= 0 && pos < static_cast<std::ptrdiff_t>(ids.size());
    out.push_back(inside ? ids[static_cast<std::size_t>(pos)] : Vocabulary::kPad);
  }
  return out;
}

std::vector<std::size_t> Encoder::sentence_windows(const std::vector<std::size_t>& ids) const {
  std::vector<std::size_t> out;
  out.reserve(ids.size() * (2 * window_ + 1));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto w = window_ids(ids, i);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

Tensor Encoder::encode_windows(const std::vector<std::size_t>& window_ids) const {
  const std::size_t span = 2 * window_ + 1;
  if (window_ids.empty() || window_ids.size() % span != 0) {
    throw grad::DimensionError("encode_windows: id count " + std::to_string(window_ids.size()) +
                               " is not a positive multiple of " + std::to_string(span));
  }
  const std::size_t n = window_ids.size() / span;
  Tensor rows = grad::gather_rows(embedding_, window_ids);
  Tensor stacked = grad::reshape(rows, {n, span * embed_dim()});
  Tensor hidden = grad::tanh(grad::affine(stacked, mix_weight_, mix_bias_));
  return grad::affine(hidden, out_weight_, out_bias_);
}

Tensor Encoder::encode(const Sentence& sentence, std::size_t index) const {
  const auto ids = token_ids(sentence);
  const auto out = encode_windows(window_ids(ids, index));
  return grad::reshape(out, {hidden_dim()});
}

Tensor Encoder::encode_sentence(const Sentence& sentence) const {
  return encode_windows(sentence_windows(token_ids(sentence)));
}

std::vector<Tensor> Encoder::parameters() const {
  std::vector<Tensor> params;
  if (embedding_.requires_grad()) params.push_back(embedding_);
  for (const Tensor* t : {&mix_weight_, &mix_bias_, &out_weight_, &out_bias_}) {
    if (t->requires_grad()) params.push_back(*t);
  }
  return params;
}

Encoder Encoder::snapshot() const {
  Encoder copy;
  copy.vocab_ = vocab_;
  copy.window_ = window_;
  copy.nonlinearity_ = nonlinearity_;
  copy.train_embeddings_ = train_embeddings_;
  copy.embedding_ = embedding_.detach();
  copy.mix_weight_ = mix_weight_.detach();
  copy.mix_bias_ = mix_bias_.detach();
  copy.out_weight_ = out_weight_.detach();
  copy.out_bias_ = out_bias_.detach();
  return copy;
}

Encoder Encoder::clone() const {
  Encoder copy = snapshot();
  copy.set_trainable(mix_weight_.requires_grad());
  return copy;
}

void Encoder::restore(const Encoder& other) {
  if (!(vocab_ == other.vocab_) || window_ != other.window_ ||
      embedding_.shape() != other.embedding_.shape() ||
      mix_weight_.shape() != other.mix_weight_.shape() ||
      out_weight_.shape() != other.out_weight_.shape()) {
    throw std::invalid_argument("restore: encoder architectures differ");
  }
  auto copy_values = [](Tensor& dst, const Tensor& src) {
    auto d = dst.mutable_values();
    const auto s = src.values();
    std::copy(s.begin(), s.end(), d.begin());
    dst.zero_grad();
  };
  copy_values(embedding_, other.embedding_);
  copy_values(mix_weight_, other.mix_weight_);
  copy_values(mix_bias_, other.mix_bias_);
  copy_values(out_weight_, other.out_weight_);
  copy_values(out_bias_, other.out_bias_);
}

bool Encoder::same_values(const Encoder& other) const {
  auto eq = [](const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(),
                                                b.values().begin());
  };
  return vocab_ == other.vocab_ && window_ == other.window_ && eq(embedding_, other.embedding_) &&
         eq(mix_weight_, other.mix_weight_) && eq(mix_bias_, other.mix_bias_) &&
         eq(out_weight_, other.out_weight_) && eq(out_bias_, other.out_bias_);
}

void Encoder::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write encoder file " + path.string());
  out << std::setprecision(17);
  out << "encoder " << vocab_.size() << ' ' << embed_dim() << ' ' << hidden_dim() << ' '
      << window_ << ' ' << nonlinearity_ << ' ' << (train_embeddings_ ? 1 : 0) << '\n';
  for (std::size_t i = 0; i < vocab_.size(); ++i) out << vocab_.token(i) << '\n';
  write_tensor(out, "embedding", embedding_);
  write_tensor(out, "mix_weight", mix_weight_);
  write_tensor(out, "mix_bias", mix_bias_);
  write_tensor(out, "out_weight", out_weight_);
  write_tensor(out, "out_bias", out_bias_);
}

Encoder Encoder::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open encoder file " + path.string());
  std::string tag;
  std::size_t vocab_size = 0;
  std::size_t embed = 0;
  std::size_t hidden = 0;
  int train = 1;
  Encoder enc;
  if (!(in >> tag >> vocab_size >> embed >> hidden >> enc.window_ >> enc.nonlinearity_ >> train) ||
      tag != "encoder") {
    throw std::runtime_error("encoder file " + path.string() + ": bad header");
  }
  if (enc.nonlinearity_ != "tanh") {
    throw std::runtime_error("encoder file: unsupported nonlinearity " + enc.nonlinearity_);
  }
  std::string line;
  std::getline(in, line);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("encoder file: truncated vocabulary");
    if (i >= 2) enc.vocab_.add(line);
  }
  enc.train_embeddings_ = train != 0;
  enc.embedding_ = read_tensor(in, "embedding", false);
  enc.mix_weight_ = read_tensor(in, "mix_weight", false);
  enc.mix_bias_ = read_tensor(in, "mix_bias", true);
  enc.out_weight_ = read_tensor(in, "out_weight", false);
  enc.out_bias_ = read_tensor(in, "out_bias", true);
  if (enc.embedding_.rows() != enc.vocab_.size() || enc.embedding_.cols() != embed ||
      enc.out_bias_.size() != hidden) {
    throw std::runtime_error("encoder file: parameter shapes disagree with header");
  }
  enc.set_trainable(true);
  return enc;
}

}  // namespace muco
