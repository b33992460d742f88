#pragma once

// Joint training over labeled source batches and unlabeled target batches,
// pseudo-labelling, checkpoints and the adversarial baseline schedule.

#include "foal/adversarial.hpp"
#include "foal/config.hpp"
#include "foal/eval.hpp"
#include "foal/model.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <random>

namespace foal {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// AdamW with decoupled weight decay; one learning rate per parameter group.
class AdamW {
 public:
  struct Slot {
    ad::Matrix m;
    ad::Matrix v;
    long t = 0;
  };
  struct Rates {
    double encoder = 5e-5;
    double classifier = 1e-3;
    double discriminator = 1e-3;
    double of(ad::ParamGroup g) const;
  };

  explicit AdamW(double weight_decay = 0.01, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<ad::Parameter*>& params, const Rates& rates);

  std::map<std::string, Slot>& slots() { return slots_; }
  const std::map<std::string, Slot>& slots() const { return slots_; }

 private:
  double weight_decay_, beta1_, beta2_, eps_;
  std::map<std::string, Slot> slots_;
};

struct PseudoLabel {
  int label = 0;
  double confidence = 0.0;
};

/// Argmax class (lowest index on ties) and its probability.
PseudoLabel pseudo_label(const Eigen::RowVectorXd& probs);

struct PseudoLabels {
  std::vector<int> phrase_rows;     // rows into SentenceForward::spans
  std::vector<PseudoLabel> phrase;  // aligned with phrase_rows
  std::vector<PseudoLabel> pair;    // aligned with SentenceForward::pairs
};

PseudoLabels assign_pseudo_labels(const SentenceForward& f);
/// Target-domain feature banks for one sentence, every candidate included.
std::pair<FeatureBank, FeatureBank> assign_pseudo_labels(Model& model, const Sentence& target_sentence);

struct LoaderState {
  std::vector<int> source_order;
  std::size_t source_cursor = 0;
  std::vector<int> target_order;
  std::size_t target_cursor = 0;
  int epoch = 0;
};

/// Everything a checkpoint holds.
struct TrainState {
  RunConfig config;
  Model model;
  AdamW optimizer;
  std::optional<Discriminator> discriminator;
  long step = 0;
  long generator_steps = 0;
  long discriminator_steps = 0;
  std::mt19937_64 rng;
  LoaderState loader;
  double selection_f1 = -1.0;

  explicit TrainState(const RunConfig& c);

  std::vector<ad::Parameter*> all_parameters();
  AdamW::Rates rates() const;
};

struct StepMetrics {
  long step = 0;
  std::string kind = "joint";  // joint | generator | discriminator
  double l_aste = 0.0;
  double l_contra = 0.0;
  double l_domain = 0.0;
  double l_total = 0.0;
  std::size_t contrastive_terms = 0;
  double lr_encoder = 0.0;
  double lr_classifier = 0.0;
};

nlohmann::json to_json(const StepMetrics& m);

using Batch = std::vector<const Sentence*>;

/// Summed span and pair NLL of a labeled batch, recorded on `tape`.
ad::Var batch_aste_loss(ad::Tape& tape, Model& model, const Batch& batch, std::vector<SentenceForward>* forwards = nullptr);

struct Objective {
  ad::Var aste;
  ad::Var contra;
  ad::Var total;  // aste + lambda * contra, or aste alone when contrastive is off
  std::size_t contrastive_terms = 0;
};

/// Records the joint loss of one source/target batch pair on `tape`.
/// Target features carry pseudo-labels from the same forward pass.
Objective build_objective(ad::Tape& tape, Model& model, const Batch& source_batch, const Batch& target_batch,
                          const Hyperparams& hp, bool use_contrastive = true);

/// One joint update (or one adversarial schedule step when the config
/// enables the baseline). Throws TrainingError on a non-finite loss.
StepMetrics train_step(TrainState& state, const Batch& source_batch, const Batch& target_batch);

/// Adversarial schedule step: alpha generator steps, then one discriminator step.
StepMetrics at_train_step(TrainState& state, const Batch& source_batch, const Batch& target_batch);

// ---- checkpoints ----------------------------------------------------------

nlohmann::json checkpoint_json(const TrainState& state);
TrainState restore_checkpoint(const nlohmann::json& doc);
void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

// ---- training loop ----------------------------------------------------------

struct TrainOptions {
  std::ostream* metrics_log = nullptr;  // one JSON record per step
  std::ostream* progress = nullptr;
  std::string checkpoint_dir;           // empty: keep checkpoints in memory only
  std::optional<TrainState> resume;
};

struct TrainResult {
  TrainState best;   // best by selection F1, or the final state without selection
  TrainState last;
  std::vector<double> selection_history;
};

long planned_steps(const TrainConfig& cfg, std::size_t source_sentences);

TrainResult train(const TransferPair& pair, const RunConfig& config, TrainOptions opts = {});

}  // namespace foal
