#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "muco/encoder/encoder.hpp"

namespace muco {

inline constexpr double kDefaultScale = 10.0;
inline constexpr double kMinScale = 0.01;

/// Unit-norm class vectors plus the shared scale s.
class PrototypeTable {
 public:
  PrototypeTable() = default;

  /// Rows drawn from a standard normal and normalized.
  static PrototypeTable init(const std::vector<std::string>& classes, std::size_t dim, Rng& rng,
                             double scale = kDefaultScale);

  /// Appends freshly initialized rows for new class names.
  void append(const std::vector<std::string>& classes, Rng& rng);

  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t size() const { return classes_.size(); }
  std::size_t dim() const { return vectors_.cols(); }
  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<std::size_t> indices(const std::vector<std::string>& names) const;

  const Tensor& vectors() const { return vectors_; }
  const Tensor& scale() const { return scale_; }
  double scale_value() const { return scale_.item(); }
  void set_scale(double s);

  /// Re-normalizes every row and clamps s to kMinScale.
  void project();

  PrototypeTable clone() const;

  void save(const std::filesystem::path& path) const;
  static PrototypeTable load(const std::filesystem::path& path);

 private:
  std::vector<std::string> classes_;
  Tensor vectors_;
  Tensor scale_;
};

/// A queried token inside a sentence with its class. The sentence must
/// outlive the example.
struct LabeledExample {
  const Sentence* sentence = nullptr;
  std::size_t index = 0;
  std::string label;
};

/// -(h/|h|).(p/|p|)
Tensor distance(const Tensor& h, const Tensor& p);

/// Logits s * cos(h, p_c) for every row of hidden [n, d] against the listed
/// prototype rows; s is 1 when unscaled. Returns [n, subset.size()].
Tensor class_logits(const Tensor& hidden, const PrototypeTable& table,
                    const std::vector<std::size_t>& subset, bool scaled);

/// Cross-entropy over the class subset for one example.
Tensor proto_loss(const LabeledExample& example, const Encoder& encoder,
                  const PrototypeTable& table, const std::vector<std::string>& class_subset,
                  bool scaled);

struct ClassifierOutput {
  std::vector<std::string> classes;
  std::vector<double> probabilities;
  std::size_t predicted = 0;

  const std::string& predicted_class() const { return classes[predicted]; }
};

ClassifierOutput classify(const LabeledExample& example, const Encoder& encoder,
                          const PrototypeTable& table,
                          const std::vector<std::string>& class_subset);

/// Group of tokens trained together: n windows and n target rows over the
/// active class subset.
struct TrainingUnit {
  std::vector<std::size_t> windows;
  std::vector<double> targets;
  std::size_t count = 0;
};

struct FitOptions {
  std::size_t epochs = 100;
  double learning_rate = 0.05;
  std::size_t batch_units = 16;  // 0 means full batch
  std::uint64_t seed = 0;
  bool scaled = false;
  bool train_encoder = true;
  bool train_prototypes = true;
  bool train_scale = true;
  std::vector<std::size_t> frozen_rows;  // prototype rows kept fixed
};

struct TrainingLog {
  std::vector<double> epoch_loss;  // mean minibatch loss per epoch
};

/// Minibatch SGD on the prototype cross-entropy. Prototypes are re-normalized
/// and s clamped after every step.
TrainingLog fit_prototypes(const std::vector<TrainingUnit>& units, Encoder& encoder,
                           PrototypeTable& table, const std::vector<std::size_t>& subset,
                           const FitOptions& options);

struct Step1Config {
  std::size_t epochs = 100;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;  // examples per step; 0 means full batch
  std::uint64_t seed = 0;
};

/// Unscaled prototype learning over the predefined classes named in the
/// examples' labels. Every label must be present in the table.
TrainingLog train_step1(const std::vector<LabeledExample>& examples, Encoder& encoder,
                        PrototypeTable& table, const Step1Config& config);

}  // namespace muco
