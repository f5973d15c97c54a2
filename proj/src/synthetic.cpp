#include "rpl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rpl/error.hpp"
#include "rpl/rng.hpp"

namespace rpl {

void SceneConfig::validate() const {
  auto fail = [](const char* field, const char* why) {
    throw Error(ErrorKind::Config, std::string("scene.") + field + ": " + why);
  };
  if (class_count == 0) fail("class_count", "must be positive");
  if (!(class_skew >= 0.0)) fail("class_skew", "must be >= 0");
  if (!(scene_width > 0.0)) fail("scene_width", "must be positive");
  if (!(scene_height > 0.0)) fail("scene_height", "must be positive");
  if (objects_min > objects_max) fail("objects_min", "must not exceed objects_max");
  if (!(box_size_mean > 0.0)) fail("box_size_mean", "must be positive");
  if (box_size_mean >= std::min(scene_width, scene_height)) fail("box_size_mean", "must be smaller than the scene");
  if (!(box_size_spread >= 0.0)) fail("box_size_spread", "must be >= 0");
  if (!(class_size_spread >= 0.0)) fail("class_size_spread", "must be >= 0");
  if (proposals_per_object == 0) fail("proposals_per_object", "must be positive");
  if (!(proposal_jitter >= 0.0)) fail("proposal_jitter", "must be >= 0");
  if (!(hard_fraction >= 0.0 && hard_fraction <= 1.0)) fail("hard_fraction", "must lie in [0,1]");
  if (!(hard_jitter_scale >= 1.0)) fail("hard_jitter_scale", "must be >= 1");
  if (embed_dim == 0) fail("embed_dim", "must be positive");
  if (!(prototype_scale > 0.0)) fail("prototype_scale", "must be positive");
  if (!(foreground_scale >= 0.0)) fail("foreground_scale", "must be >= 0");
  if (!(object_noise >= 0.0)) fail("object_noise", "must be >= 0");
  if (!(feature_noise >= 0.0)) fail("feature_noise", "must be >= 0");
  if (!(offset_scale > 0.0)) fail("offset_scale", "must be positive");
  if (!(offset_noise >= 0.0)) fail("offset_noise", "must be >= 0");
  if (!(hard_offset_noise >= 0.0)) fail("hard_offset_noise", "must be >= 0");
  if (!(domain_shift >= 0.0)) fail("domain_shift", "must be >= 0");
  if (!(target_extra_noise >= 0.0)) fail("target_extra_noise", "must be >= 0");
}

std::vector<double> class_weights(const SceneConfig& config) {
  std::vector<double> w(config.class_count);
  double total = 0.0;
  for (std::size_t c = 0; c < w.size(); ++c) {
    w[c] = std::pow(static_cast<double>(c + 1), -config.class_skew);
    total += w[c];
  }
  for (auto& v : w) v /= total;
  return w;
}

SyntheticDataset::SyntheticDataset(SceneConfig config, Dataset source, Dataset target_train, Dataset target_test,
                                   std::vector<FrameTruth> target_train_truth)
    : config_(std::move(config)),
      source_(std::move(source)),
      target_train_(std::move(target_train)),
      target_test_(std::move(target_test)),
      target_train_truth_(std::move(target_train_truth)) {
  target_train_.ground_truth.reset();
}

namespace {

struct DomainModel {
  std::vector<std::vector<double>> prototypes;  // per class, including the shared part
  std::vector<double> shift;
  std::vector<double> class_scale;
};

DomainModel make_domain_model(const SceneConfig& cfg) {
  auto rng = substream(cfg.seed, "prototypes");
  std::normal_distribution<double> normal(0.0, 1.0);
  DomainModel m;
  auto draw = [&](double scale) {
    std::vector<double> v(cfg.embed_dim);
    for (auto& x : v) x = scale * normal(rng);
    return v;
  };
  auto scaled_direction = [&](double length) {
    auto v = draw(1.0);
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (auto& x : v) x *= length / norm;
    return v;
  };
  const auto shared = scaled_direction(cfg.foreground_scale);
  for (std::size_t c = 0; c < cfg.class_count; ++c) {
    auto p = draw(cfg.prototype_scale);
    for (std::size_t k = 0; k < p.size(); ++k) p[k] += shared[k];
    m.prototypes.push_back(std::move(p));
  }
  m.shift = scaled_direction(cfg.domain_shift);
  for (std::size_t c = 0; c < cfg.class_count; ++c) m.class_scale.push_back(std::exp(cfg.class_size_spread * normal(rng)));
  return m;
}

struct SplitSpec {
  const char* name;
  std::size_t frames;
  bool target;
};

class SceneSampler {
 public:
  SceneSampler(const SceneConfig& cfg, const DomainModel& model, std::mt19937_64& rng, bool target)
      : cfg_(cfg), model_(model), rng_(rng), target_(target) {
    const auto w = class_weights(cfg);
    classes_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }

  void sample(Frame& frame, FrameTruth& truth) {
    std::uniform_int_distribution<std::size_t> count(cfg_.objects_min, cfg_.objects_max);
    const std::size_t objects = count(rng_);
    for (std::size_t o = 0; o < objects; ++o) truth.push_back(sample_object());

    std::bernoulli_distribution hard(cfg_.hard_fraction);
    std::normal_distribution<double> normal(0.0, 1.0);
    appearance_.clear();
    for (const auto& g : truth) {
      auto a = model_.prototypes[g.class_id];
      for (std::size_t k = 0; k < a.size(); ++k) {
        a[k] += cfg_.object_noise * normal(rng_);
        // The target domain changes how objects look, not the clutter.
        if (target_) a[k] += model_.shift[k];
      }
      appearance_.push_back(std::move(a));
    }
    for (const auto& g : truth) {
      const bool is_hard = hard(rng_);
      const double jitter = cfg_.proposal_jitter * (is_hard ? cfg_.hard_jitter_scale : 1.0);
      const double off_noise = is_hard ? cfg_.hard_offset_noise : cfg_.offset_noise;
      for (std::size_t k = 0; k < cfg_.proposals_per_object; ++k) {
        add_proposal(frame, jitter_box(g.box, jitter), truth, off_noise);
      }
    }
    for (std::size_t k = 0; k < cfg_.background_proposals; ++k) {
      add_proposal(frame, random_box(), truth, cfg_.offset_noise);
    }
  }

 private:
  GroundTruthBox sample_object() {
    GroundTruthBox g;
    g.class_id = classes_(rng_);
    const BBox size_box = random_size(cfg_.box_size_mean * model_.class_scale[g.class_id]);
    g.box = place(size_box.width(), size_box.height());
    return g;
  }

  BBox random_size(double mean) {
    std::normal_distribution<double> n(0.0, cfg_.box_size_spread);
    const double limit = 0.9 * std::min(cfg_.scene_width, cfg_.scene_height);
    const double w = std::clamp(mean * std::exp(n(rng_)), 1.0, limit);
    const double h = std::clamp(mean * std::exp(n(rng_)), 1.0, limit);
    return {0.0, 0.0, w, h};
  }

  BBox place(double w, double h) {
    std::uniform_real_distribution<double> ux(0.0, cfg_.scene_width - w);
    std::uniform_real_distribution<double> uy(0.0, cfg_.scene_height - h);
    const double x = ux(rng_), y = uy(rng_);
    return {x, y, x + w, y + h};
  }

  BBox random_box() {
    const BBox s = random_size(cfg_.box_size_mean);
    return place(s.width(), s.height());
  }

  BBox jitter_box(const BBox& g, double jitter) {
    std::normal_distribution<double> n(0.0, jitter);
    RegressionTarget t{{n(rng_), n(rng_), n(rng_), n(rng_)}};
    return decode_offsets(g, t);
  }

  void add_proposal(Frame& frame, const BBox& box, const FrameTruth& truth, double off_noise) {
    std::normal_distribution<double> normal(0.0, 1.0);
    double quality = 0.0;
    const GroundTruthBox* owner = nullptr;
    const std::vector<double>* look = nullptr;
    for (std::size_t o = 0; o < truth.size(); ++o) {
      const double v = iou(box, truth[o].box);
      if (v > quality) {
        quality = v;
        owner = &truth[o];
        look = &appearance_[o];
      }
    }

    // Background proposals carry only noise; object proposals see the
    // object's appearance in proportion to how well they cover it.
    std::vector<double> x(cfg_.feature_dim());
    for (std::size_t k = 0; k < cfg_.embed_dim; ++k) {
      const double object = look ? (*look)[k] : 0.0;
      x[k] = quality * object + cfg_.feature_noise * normal(rng_);
      if (target_) x[k] += cfg_.target_extra_noise * normal(rng_);
    }
    const RegressionTarget t = owner ? encode_offsets(box, owner->box) : RegressionTarget{};
    for (std::size_t k = 0; k < 4; ++k) {
      x[cfg_.embed_dim + k] = cfg_.offset_scale * t.offsets[k] + off_noise * normal(rng_);
    }

    const std::size_t index = frame.boxes.size();
    frame.boxes.push_back(ScoredBox::from_distribution(box, ClassDistribution::uniform(cfg_.class_count), index));
    frame.features.push_back(std::move(x));
  }

  const SceneConfig& cfg_;
  const DomainModel& model_;
  std::mt19937_64& rng_;
  bool target_;
  std::discrete_distribution<std::size_t> classes_;
  std::vector<std::vector<double>> appearance_;
};

Dataset make_split(const SceneConfig& cfg, const DomainModel& model, const ClassCatalog& catalog,
                   const SplitSpec& spec) {
  auto rng = substream(cfg.seed, spec.name);
  SceneSampler sampler(cfg, model, rng, spec.target);
  Dataset d;
  d.catalog = catalog;
  d.ground_truth.emplace();
  for (std::size_t i = 0; i < spec.frames; ++i) {
    Frame f;
    f.frame_id = std::string(spec.name) + "_" + std::to_string(i);
    FrameTruth truth;
    sampler.sample(f, truth);
    d.frames.push_back(std::move(f));
    d.ground_truth->push_back(std::move(truth));
  }
  return d;
}

}  // namespace

SyntheticDataset generate_dataset(const SceneConfig& config) {
  config.validate();
  const DomainModel model = make_domain_model(config);
  const ClassCatalog catalog = ClassCatalog::numbered(config.class_count);
  Dataset source = make_split(config, model, catalog, {"source", config.source_frames, false});
  Dataset train = make_split(config, model, catalog, {"target_train", config.target_train_frames, true});
  Dataset test = make_split(config, model, catalog, {"target_test", config.target_test_frames, true});
  std::vector<FrameTruth> hidden = std::move(*train.ground_truth);
  train.ground_truth.reset();
  return SyntheticDataset(config, std::move(source), std::move(train), std::move(test), std::move(hidden));
}

DetectorParams initial_params(std::size_t classes, std::size_t feature_dim, double scale, std::uint64_t seed) {
  auto rng = substream(seed, "init");
  std::normal_distribution<double> normal(0.0, scale);
  DetectorParams p(classes, feature_dim);
  for (auto& v : p.values()) v = normal(rng);
  return p;
}

DetectorParams pretrain_source(const Dataset& source, const PretrainConfig& config) {
  if (!source.ground_truth) throw Error(ErrorKind::InvalidArgument, "pretraining needs source ground truth");
  if (config.batch_size == 0) throw Error(ErrorKind::Config, "pretrain.batch_size: must be positive");
  DetectorParams params = initial_params(source.catalog.size(), source.feature_dim(), config.init_scale, config.seed);
  if (config.epochs == 0 || source.frames.empty()) return params;

  std::vector<TrainingExample> examples;
  examples.reserve(source.frames.size());
  for (std::size_t i = 0; i < source.frames.size(); ++i) {
    const Frame& f = source.frames[i];
    examples.push_back({&f, f.features, build_targets(f, (*source.ground_truth)[i], {}, config.targets)});
  }

  auto rng = substream(config.seed, "pretrain");
  const std::span<const TrainingExample> all(examples);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(examples.begin(), examples.end(), rng);
    for (std::size_t start = 0; start < examples.size(); start += config.batch_size) {
      const auto batch = all.subspan(start, std::min(config.batch_size, examples.size() - start));
      const ObjectiveResult r = objective_and_gradient(params, batch);
      if (!r.loss.finite())
        throw Error(ErrorKind::Numeric, "pretraining diverged in epoch " + std::to_string(epoch));
      params = student_step(params, r.gradient, config.learning_rate);
    }
  }
  return params;
}

}  // namespace rpl
