// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "model.hpp"

#include <cmath>

#include "config.hpp"
#include "errors.hpp"
#include "json.hpp"

namespace mmie {

void ModelConfig::validate() const {
  text.validate();
  image.validate();
  attn.validate();
  if (image.levels() != text.num_layers)
    throw ConfigError("model: backbone levels (" + std::to_string(image.levels()) +
                      ") must equal text encoder layers (" + std::to_string(text.num_layers) + ")");
  if (latent_dim < 1) throw ConfigError("model: latent_dim must be >= 1");
  if (num_entity_types < 1) throw ConfigError("model: num_entity_types must be >= 1");
  if (num_relation_types < 2) throw ConfigError("model: num_relation_types must be >= 2");
}

ModelConfig ModelConfig::from_config(const KeyValueConfig& c) {
  ModelConfig m;
  m.task = parse_task(c.get_string("task", "NER"));
  auto geti = [&](const char* key, int fallback) { return static_cast<int>(c.get_int(key, fallback)); };
  m.text.vocab_size = geti("vocab_size", m.text.vocab_size);
  m.text.d_model = geti("d_model", m.text.d_model);
  m.text.num_layers = geti("num_layers", m.text.num_layers);
  m.text.num_heads = geti("text_heads", m.text.num_heads);
  m.text.max_len = geti("max_len", m.text.max_len);
  m.text.ffn_dim = geti("ffn_dim", m.text.ffn_dim);
  m.text.dropout = c.get_double("text_dropout", m.text.dropout);
  m.image.in_channels = geti("channels", m.image.in_channels);
  m.image.channels = c.get_int_list("image_channels", m.image.channels);
  m.image.kernel_sizes = c.get_int_list("kernel_sizes", std::vector<int>(m.image.channels.size(), 3));
  m.image.pooled_dim = geti("pooled_dim", m.image.pooled_dim);
  m.image.image_size = geti("image_size", m.image.image_size);
  m.image.object_size = geti("object_size", m.image.object_size);
  m.attn.num_heads = geti("attn_heads", m.attn.num_heads);
  m.attn.attention_dim = geti("attn_dim", m.attn.attention_dim);
  m.attn.dropout = c.get_double("attn_dropout", m.attn.dropout);
  m.attn.delta = c.get_double("sampling_ratio", m.attn.delta);
  m.attn.Delta = c.get_double("composition_ratio", m.attn.Delta);
  m.attn.beta_alpha = c.get_double("beta_alpha", m.attn.beta_alpha);
  m.latent_dim = geti("latent_dim", m.latent_dim);
  m.num_entity_types = geti("num_entity_types", m.num_entity_types);
  m.num_relation_types = geti("num_relation_types", m.num_relation_types);
  m.crf_constraints = c.get_bool("crf_constraints", m.crf_constraints);
  m.init_seed = static_cast<std::uint64_t>(c.get_int("init_seed", c.get_int("seed", 1)));
  return m;
}

std::string ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["task"] = task_name(task);
  j["vocab_size"] = text.vocab_size;
  j["d_model"] = text.d_model;
  j["num_layers"] = text.num_layers;
  j["text_heads"] = text.num_heads;
  j["max_len"] = text.max_len;
  j["ffn_dim"] = text.ffn_dim;
  j["text_dropout"] = text.dropout;
  j["channels"] = image.in_channels;
  j["image_channels"] = image.channels;
  j["kernel_sizes"] = image.kernel_sizes;
  j["pooled_dim"] = image.pooled_dim;
  j["image_size"] = image.image_size;
  j["object_size"] = image.object_size;
  j["attn_heads"] = attn.num_heads;
  j["attn_dim"] = attn.attention_dim;
  j["attn_dropout"] = attn.dropout;
  j["sampling_ratio"] = attn.delta;
  j["composition_ratio"] = attn.Delta;
  j["beta_alpha"] = attn.beta_alpha;
  j["latent_dim"] = latent_dim;
  j["num_entity_types"] = num_entity_types;
  j["num_relation_types"] = num_relation_types;
  j["crf_constraints"] = crf_constraints;
  j["init_seed"] = init_seed;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelConfig m;
    m.task = parse_task(j.at("task").get<std::string>());
    m.text.vocab_size = j.at("vocab_size");
    m.text.d_model = j.at("d_model");
    m.text.num_layers = j.at("num_layers");
    m.text.num_heads = j.at("text_heads");
    m.text.max_len = j.at("max_len");
    m.text.ffn_dim = j.at("ffn_dim");
    m.text.dropout = j.at("text_dropout");
    m.image.in_channels = j.at("channels");
    m.image.channels = j.at("image_channels").get<std::vector<int>>();
    m.image.kernel_sizes = j.at("kernel_sizes").get<std::vector<int>>();
    m.image.pooled_dim = j.at("pooled_dim");
    m.image.image_size = j.at("image_size");
    m.image.object_size = j.at("object_size");
    m.attn.num_heads = j.at("attn_heads");
    m.attn.attention_dim = j.at("attn_dim");
    m.attn.dropout = j.at("attn_dropout");
    m.attn.delta = j.at("sampling_ratio");
    m.attn.Delta = j.at("composition_ratio");
    m.attn.beta_alpha = j.at("beta_alpha");
    m.latent_dim = j.at("latent_dim");
    m.num_entity_types = j.at("num_entity_types");
    m.num_relation_types = j.at("num_relation_types");
    m.crf_constraints = j.at("crf_constraints");
    m.init_seed = j.at("init_seed");
    return m;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng init(cfg_.init_seed);
  backbone_ = std::make_unique<ImageBackbone>(cfg_.image, params_, init);
  text_ = std::make_unique<TextEncoder>(cfg_.text, params_, init);
  prompts_ = std::make_unique<PromptBuilder>(cfg_.image.channels, cfg_.text.d_model, params_, init);
  prior_ = std::make_unique<GaussianHead>("semantic.prior", cfg_.text.d_model, cfg_.latent_dim, params_, init);
  posterior_ =
      std::make_unique<GaussianHead>("semantic.posterior", cfg_.image.pooled_dim, cfg_.latent_dim, params_, init);
  attention_ = std::make_unique<BatchAttention>(cfg_.attn, cfg_.sample_dim(), params_, init);
  if (cfg_.task == Task::NER)
    crf_ = std::make_unique<CrfHead>(cfg_.text.d_model, cfg_.num_tags(), cfg_.crf_constraints, params_, init);
  else
    relation_ = std::make_unique<RelationHead>(cfg_.text.d_model, cfg_.num_relation_types, params_, init);
}

void Model::check_sample(const Sample& s) const {
  if (s.task != cfg_.task)
    throw ShapeError("sample " + s.id + " is a " + task_name(s.task) + " sample; model expects " +
                     task_name(cfg_.task));
  if (s.task == Task::NER) {
    for (int t : s.ner_labels)
      if (t < 0 || t >= cfg_.num_tags())
        throw ShapeError("sample " + s.id + ": tag id " + std::to_string(t) + " outside the tag set");
  } else if (s.relation < 0 || s.relation >= cfg_.num_relation_types) {
    throw ShapeError("sample " + s.id + ": relation id " + std::to_string(s.relation) + " out of range");
  }
}

SampleEncoding Model::encode(const Sample& s, const ForwardContext& ctx) const {
  check_sample(s);
  SampleEncoding e;
  const ObjectFeatures features = backbone_->encode_objects(s.objects);
  e.prompts = prompts_->build(features);
  e.states = text_->encode(s.tokens, e.prompts.levels, ctx);
  e.image_embedding = backbone_->encode_image(s.image);
  e.prior = textual_prior(*prior_, e.states);
  e.posterior = visual_posterior(*posterior_, e.image_embedding);
  e.semantic = semantic_loss(e.prior, e.posterior);
  return e;
}

BatchEmbeddings Model::batch_embeddings(std::span<const Sample* const> batch,
                                        std::span<const SampleEncoding> encodings) const {
  BatchEmbeddings h;
  h.token_level = cfg_.task == Task::NER;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Sample& s = *batch[i];
    const ag::Var& states = encodings[i].states;
    BatchRow row;
    if (h.token_level) {
      row.rep = states;
      row.pooled = ag::mean_rows(states);
      row.length = static_cast<int>(states.rows());
      row.target = HardSeq{s.ner_labels};
    } else {
      row.rep = RelationHead::pair_vector(states, s.head, s.tail);
      row.pooled = row.rep;
      row.length = 1;
      row.target = HardClass{s.relation};
    }
    h.rows.push_back(std::move(row));
  }
  return h;
}

ag::Var Model::row_loss(const BatchRow& row) const {
  if (crf_) return crf_->normalized_nll(row.rep, row.target);
  return relation_->loss(row.rep, row.target);
}

ag::Var Model::batch_loss(std::span<const Sample* const> batch, const LossOptions& opts,
                          const ForwardContext& ctx, LossBreakdown* breakdown) const {
  if (batch.empty()) throw ShapeError("batch_loss: empty batch");
  std::vector<SampleEncoding> enc;
  enc.reserve(batch.size());
  for (const Sample* s : batch) enc.push_back(encode(*s, ctx));

  const BatchEmbeddings h = batch_embeddings(batch, enc);
  const BatchEmbeddings hat =
      ctx.train && opts.use_attnmixup ? attn_mixup(*attention_, cfg_.attn, h, ctx) : eval_passthrough(h);

  std::vector<ag::Var> task_terms;
  task_terms.reserve(hat.size());
  for (const auto& row : hat.rows) task_terms.push_back(row_loss(row));
  std::vector<ag::Var> sem_terms;
  sem_terms.reserve(enc.size());
  for (const auto& e : enc) sem_terms.push_back(e.semantic);

  const ag::Var task = ag::mean_all(ag::concat_rows(task_terms));
  const ag::Var sem = ag::mean_all(ag::concat_rows(sem_terms));
  const double lambda = opts.use_semantic_loss ? opts.lambda_sem : 0.0;
  ag::Var total = total_loss(task, sem, lambda);
  if (!std::isfinite(total.scalar()))
    throw NumericError("non-finite loss (task " + std::to_string(task.scalar()) + ", semantic " +
                       std::to_string(sem.scalar()) + ")");
  if (breakdown) {
    breakdown->total = total.scalar();
    breakdown->task = task.scalar();
    breakdown->semantic = sem.scalar();
    breakdown->training_rows = hat.size();
  }
  return total;
}

std::vector<Prediction> Model::predict(std::span<const Sample* const> batch) const {
  ag::NoGradGuard no_grad;
  const ForwardContext ctx = ForwardContext::eval();
  std::vector<SampleEncoding> enc;
  enc.reserve(batch.size());
  for (const Sample* s : batch) enc.push_back(encode(*s, ctx));
  const BatchEmbeddings h = batch_embeddings(batch, enc);
  const BatchEmbeddings& hat = eval_passthrough(h);

  std::vector<Prediction> out;
  out.reserve(batch.size());
  for (const auto& row : hat.rows) {
    Prediction p;
    if (crf_) {
      p.scores = crf_->emissions(row.rep).value();
      p.tags = crf_->decode(row.rep);
    } else {
      p.scores = relation_->logits(row.rep).value();
      p.relation = relation_->predict(row.rep);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace mmie
