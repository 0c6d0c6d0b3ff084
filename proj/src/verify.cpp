// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "verify.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>

#include "attnmixup.hpp"
#include "crf.hpp"
#include "errors.hpp"
#include "intrafusion.hpp"
#include "json.hpp"
#include "model.hpp"
#include "synthgen.hpp"

namespace mmie {

namespace {

using json = nlohmann::ordered_json;

std::uint64_t case_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer so neighbouring (seed, index) pairs decorrelate
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + index + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Tracks the largest deviation seen by one check.
class Tracker {
 public:
  Tracker(std::string name, std::string metric, double tolerance) {
    r_.name = std::move(name);
    r_.metric = std::move(metric);
    r_.tolerance = tolerance;
  }

  // `within` overrides the default "deviation <= tolerance" test.
  void observe(double deviation, const std::function<json()>& describe, std::optional<bool> within = {}) {
    ++r_.cases;
    const bool ok = within ? *within : deviation <= r_.tolerance;
    if (std::isnan(deviation)) deviation = std::numeric_limits<double>::infinity();
    // The report keeps the first failing case, or the worst case when all pass.
    if (!ok && r_.passed) {
      r_.passed = false;
      r_.worst_case = describe().dump();
    } else if (ok && r_.passed && (r_.cases == 1 || deviation > r_.worst)) {
      r_.worst_case = describe().dump();
    }
    r_.worst = std::max(r_.worst, deviation);
  }

  CheckResult result() const { return r_; }

 private:
  CheckResult r_;
};

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------- crf-oracle

double brute_score(const crf::Potentials& p, const std::vector<int>& y) {
  double s = p.start(y[0]) + p.end(y.back());
  for (std::size_t i = 0; i < y.size(); ++i) {
    s += p.emissions(Eigen::Index(i), y[i]);
    if (i > 0) s += p.transitions(y[i - 1], y[i]);
  }
  return s;
}

// Calls fn on every tag sequence of length n over L tags.
void enumerate(int n, int L, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> y(static_cast<std::size_t>(n), 0);
  while (true) {
    fn(y);
    int pos = n - 1;
    while (pos >= 0 && ++y[static_cast<std::size_t>(pos)] == L) y[static_cast<std::size_t>(pos--)] = 0;
    if (pos < 0) return;
  }
}

std::vector<CheckResult> crf_oracle(std::uint64_t seed) {
  constexpr int kCases = 200;
  Tracker nll_check("nll_vs_enumeration", "max |nll - brute force nll|", 1e-8);
  Tracker viterbi_check("viterbi_vs_enumeration", "max |viterbi score - brute force max|", 1e-8);
  Tracker norm_check("normalization", "max |sum_y exp(-nll(y)) - 1|", 1e-6);
  for (int c = 0; c < kCases; ++c) {
    const std::uint64_t cs = case_seed(seed, std::uint64_t(c));
    Rng rng(cs);
    const int n = rng.integer(1, 4);
    const int L = rng.integer(1, 4);
    crf::Potentials p;
    p.emissions.resize(n, L);
    p.transitions.resize(L, L);
    p.start.resize(L);
    p.end.resize(L);
    for (Eigen::Index i = 0; i < p.emissions.size(); ++i) p.emissions.data()[i] = rng.normal(0.0, 2.0);
    for (Eigen::Index i = 0; i < p.transitions.size(); ++i) p.transitions.data()[i] = rng.normal(0.0, 2.0);
    for (int i = 0; i < L; ++i) {
      p.start(i) = rng.normal(0.0, 2.0);
      p.end(i) = rng.normal(0.0, 2.0);
    }
    std::vector<int> target(static_cast<std::size_t>(n));
    for (auto& t : target) t = rng.integer(0, L - 1);

    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> scores;
    enumerate(n, L, [&](const std::vector<int>& y) {
      const double s = brute_score(p, y);
      scores.push_back(s);
      best = std::max(best, s);
    });
    double z = 0.0;
    for (double s : scores) z += std::exp(s - best);
    const double log_z = best + std::log(z);

    auto describe = [&] {
      return json{{"case", c},         {"case_seed", cs},
                  {"n", n},            {"L", L},
                  {"emissions", matrix_json(p.emissions)},
                  {"transitions", matrix_json(p.transitions)},
                  {"start", matrix_json(p.start)},
                  {"end", matrix_json(p.end)},
                  {"target", target}};
    };

    nll_check.observe(std::abs(crf::nll(p, target) - (log_z - brute_score(p, target))), describe);
    const std::vector<int> path = crf::viterbi(p);
    viterbi_check.observe(std::abs(brute_score(p, path) - best), describe);
    double total = 0.0;
    enumerate(n, L, [&](const std::vector<int>& y) { total += std::exp(-crf::nll(p, y)); });
    norm_check.observe(std::abs(total - 1.0), describe);
  }
  return {nll_check.result(), viterbi_check.result(), norm_check.result()};
}

// ---------------------------------------------------------------- grad-check

ModelConfig tiny_model(Task task, std::uint64_t seed) {
  ModelConfig m;
  m.task = task;
  m.text.vocab_size = 64;
  m.text.d_model = 8;
  m.text.num_layers = 2;
  m.text.num_heads = 2;
  m.text.ffn_dim = 16;
  m.image.channels = {4, 6};
  m.image.kernel_sizes = {3, 3};
  m.image.pooled_dim = 8;
  m.image.image_size = 8;
  m.image.object_size = 4;
  m.attn.num_heads = 2;
  m.latent_dim = 4;
  m.num_entity_types = 2;
  m.num_relation_types = 4;
  m.init_seed = seed;
  return m;
}

std::vector<Sample> tiny_batch(Task task, std::uint64_t seed) {
  CorpusSpec s;
  s.task = task;
  s.vocab_size = 64;
  s.num_entity_types = 2;
  s.num_relation_types = 4;
  s.num_train = 4;
  s.num_val = 1;
  s.num_test = 1;
  s.seed = seed;
  s.min_tokens = 5;
  s.max_tokens = 7;
  s.image_size = 8;
  s.object_size = 4;
  return generate_corpus(s).train;
}

CheckResult grad_check_task(Task task, std::uint64_t seed) {
  constexpr int kSamples = 50;
  constexpr double kStep = 1e-5;
  constexpr double kResolution = 1e-10;
  const std::uint64_t model_seed = case_seed(seed, task == Task::NER ? 11 : 12);
  Model model(tiny_model(task, model_seed));
  const std::vector<Sample> samples = tiny_batch(task, model_seed);
  std::vector<const Sample*> batch;
  for (const auto& s : samples) batch.push_back(&s);
  const LossOptions opts{0.5, true, true};
  const std::uint64_t forward_seed = case_seed(model_seed, 1);

  // Each evaluation replays the same dropout masks, mixup pairs and lambdas.
  auto loss_value = [&]() {
    ag::NoGradGuard no_grad;
    Rng rng(forward_seed);
    return model.batch_loss(batch, opts, ForwardContext::training(rng)).scalar();
  };
  {
    Rng rng(forward_seed);
    model.params().zero_grad();
    ag::backward(model.batch_loss(batch, opts, ForwardContext::training(rng)));
  }

  Tracker check(std::string("gradient_") + (task == Task::NER ? "ner" : "re"),
                "max |analytic - numeric| / max(|analytic|, |numeric|)", 1e-4);
  Rng pick(case_seed(seed, task == Task::NER ? 21 : 22));
  const auto& entries = model.params().entries();
  for (int c = 0; c < kSamples; ++c) {
    // Tensor first, then element, so small tensors are not starved.
    const std::size_t t = pick.index(entries.size());
    ag::Var param = entries[t].second;
    const auto e = static_cast<Eigen::Index>(pick.index(static_cast<std::size_t>(param.value().size())));
    const double analytic = param.node()->has_grad() ? param.node()->grad.data()[e] : 0.0;
    const double original = param.value().data()[e];
    param.mutable_value().data()[e] = original + kStep;
    const double up = loss_value();
    param.mutable_value().data()[e] = original - kStep;
    const double down = loss_value();
    param.mutable_value().data()[e] = original;
    const double numeric = (up - down) / (2.0 * kStep);
    // Below kResolution the central difference is rounding noise, so both
    // values are read as zero (e.g. start scores of masked I- tags).
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    const double rel = scale < kResolution ? 0.0 : std::abs(analytic - numeric) / scale;
    check.observe(rel, [&] {
      return json{{"task", task_name(task)}, {"model_seed", model_seed}, {"forward_seed", forward_seed},
                  {"parameter", entries[t].first}, {"element", e}, {"analytic", analytic},
                  {"numeric", numeric}, {"step", kStep}};
    });
  }
  return check.result();
}

std::vector<CheckResult> grad_check(std::uint64_t seed) {
  return {grad_check_task(Task::NER, seed), grad_check_task(Task::RE, seed)};
}

// ---------------------------------------------------------------- kl-mc

GaussianParams random_gaussian(int k, Rng& rng) {
  Matrix mean(1, k);
  Matrix logvar(1, k);
  for (int i = 0; i < k; ++i) {
    mean(0, i) = rng.normal(0.0, 0.5);
    logvar(0, i) = rng.uniform(-0.5, 0.5);
  }
  return {ag::constant(mean), ag::constant(logvar)};
}

double log_density(const RowVector& z, const Matrix& mean, const Matrix& logvar) {
  constexpr double kLog2Pi = 1.8378770664093453;
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double d = z(i) - mean(0, i);
    s += -0.5 * (kLog2Pi + logvar(0, i) + d * d / std::exp(logvar(0, i)));
  }
  return s;
}

std::vector<CheckResult> kl_mc(std::uint64_t seed) {
  constexpr int kPairs = 20;
  constexpr int kDim = 8;
  constexpr int kDraws = 1000000;
  Tracker self("kl_self", "max |KL(p || p)|", 1e-12);
  Tracker mc("kl_vs_monte_carlo", "max |closed form - Monte-Carlo estimate|", 1e-2);
  for (int c = 0; c < kPairs; ++c) {
    const std::uint64_t cs = case_seed(seed, std::uint64_t(c));
    Rng rng(cs);
    const GaussianParams p = random_gaussian(kDim, rng);
    const GaussianParams q = random_gaussian(kDim, rng);
    auto describe = [&] {
      return json{{"case", c},
                  {"case_seed", cs},
                  {"mean_p", matrix_json(p.mean.value())},
                  {"logvar_p", matrix_json(p.logvar.value())},
                  {"mean_q", matrix_json(q.mean.value())},
                  {"logvar_q", matrix_json(q.logvar.value())},
                  {"draws", kDraws}};
    };
    self.observe(std::abs(semantic_loss(p, p).scalar()), describe);
    self.observe(std::abs(semantic_loss(q, q).scalar()), describe);

    const double closed = semantic_loss(p, q).scalar();
    const Matrix& mp = p.mean.value();
    const Matrix& lp = p.logvar.value();
    const Matrix& mq = q.mean.value();
    const Matrix& lq = q.logvar.value();
    RowVector z(kDim);
    double acc = 0.0;
    for (int s = 0; s < kDraws; ++s) {
      for (int i = 0; i < kDim; ++i) z(i) = mp(0, i) + std::exp(0.5 * lp(0, i)) * rng.normal();
      acc += log_density(z, mp, lp) - log_density(z, mq, lq);
    }
    mc.observe(std::abs(closed - acc / kDraws), describe);
  }
  return {self.result(), mc.result()};
}

// ---------------------------------------------------------------- attn-props

BatchEmbeddings random_batch(std::size_t b, int dim, bool token_level, Rng& rng) {
  BatchEmbeddings h;
  h.token_level = token_level;
  for (std::size_t i = 0; i < b; ++i) {
    BatchRow row;
    const int n = token_level ? rng.integer(2, 6) : 1;
    Matrix m(n, dim);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.normal();
    row.rep = ag::constant(m);
    row.pooled = token_level ? ag::mean_rows(row.rep) : row.rep;
    row.length = n;
    if (token_level)
      row.target = HardSeq{std::vector<int>(static_cast<std::size_t>(n), static_cast<int>(i % 3))};
    else
      row.target = HardClass{static_cast<int>(i % 3)};
    h.rows.push_back(std::move(row));
  }
  return h;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

std::vector<CheckResult> attn_props(std::uint64_t seed) {
  constexpr int kDim = 8;
  constexpr double kDeltas[] = {0.0, 0.4, 0.6, 0.8, 1.0};
  Tracker rows_check("attention_row_sums", "max |sum_j alpha_ij - 1|", 1e-6);
  Tracker size_check("composed_size", "max ||H-hat| - (B + floor(Delta B) + floor((1 - Delta) B))|", 0.0);
  Tracker hull_check("mixup_convexity", "max distance outside the segment between the mixed pair", 1e-12);
  Tracker vicinal_check("vicinal_extremes", "max |H-tilde - H| at delta = 1 and |H-tilde - H*| at delta = 0",
                        0.0);

  for (int variant = 0; variant < 2; ++variant) {
    const bool token_level = variant == 1;
    ParamStore store;
    Rng init(case_seed(seed, 100 + std::uint64_t(variant)));
    AttnMixupConfig cfg;
    cfg.num_heads = 2;
    BatchAttention attention(cfg, kDim, store, init);

    for (std::size_t b = 2; b <= 64; ++b) {
      for (double Delta : kDeltas) {
        const std::uint64_t cs = case_seed(seed, 1000 * b + std::uint64_t(Delta * 10) + 100000 * variant);
        Rng rng(cs);
        const BatchEmbeddings h = random_batch(b, kDim, token_level, rng);
        AttnMixupConfig run = cfg;
        run.Delta = Delta;
        auto describe = [&] {
          return json{{"token_level", token_level}, {"B", b}, {"Delta", Delta}, {"case_seed", cs}};
        };

        std::vector<Matrix> weights;
        const BatchEmbeddings h_star = attention(h, ForwardContext::eval(), &weights);
        double worst_row = 0.0;
        bool nonnegative = true;
        for (const Matrix& w : weights) {
          worst_row = std::max(worst_row, (w.rowwise().sum().array() - 1.0).abs().maxCoeff());
          nonnegative = nonnegative && (w.array() >= 0.0).all();
        }
        rows_check.observe(worst_row, describe, worst_row <= 1e-6 && nonnegative);

        Rng train_rng(cs ^ 1);
        const BatchEmbeddings hat = attn_mixup(attention, run, h, ForwardContext::training(train_rng));
        const double expected = double(b + floor_share(Delta, b) + floor_share(1.0 - Delta, b));
        size_check.observe(std::abs(double(hat.size()) - expected), describe);

        Rng mix_rng(cs ^ 2);
        std::vector<MixupRecord> records;
        const BatchEmbeddings synthetic = mixup_synthesize(h, run.beta_alpha, mix_rng, std::nullopt, &records);
        for (std::size_t k = 0; k < synthetic.size(); ++k) {
          const MixupRecord& r = records[k];
          const BatchRow& xi = h.rows[r.i];
          const BatchRow& xj = h.rows[r.j];
          const Matrix& out = synthetic.rows[k].rep.value();
          const Eigen::Index n = out.rows();
          Matrix a = Matrix::Zero(n, kDim);
          Matrix c = Matrix::Zero(n, kDim);
          a.topRows(xi.length) = xi.rep.value().topRows(xi.length);
          c.topRows(xj.length) = xj.rep.value().topRows(xj.length);
          double outside = 0.0;
          for (Eigen::Index e = 0; e < out.size(); ++e) {
            const double lo = std::min(a.data()[e], c.data()[e]);
            const double hi = std::max(a.data()[e], c.data()[e]);
            outside = std::max({outside, lo - out.data()[e], out.data()[e] - hi});
          }
          const double recon = max_abs_diff(out, r.lambda * a + (1.0 - r.lambda) * c);
          const bool ok = r.i != r.j && r.lambda >= 0.0 && r.lambda <= 1.0 &&
                          n == std::max(xi.length, xj.length) && recon <= 1e-12 && outside <= 1e-12;
          hull_check.observe(std::max(outside, recon), [&] {
            json d = describe();
            d["row"] = k;
            d["i"] = r.i;
            d["j"] = r.j;
            d["lambda"] = r.lambda;
            return d;
          }, ok);
        }

        for (double delta : {0.0, 1.0}) {
          Rng vrng(cs ^ 3);
          const BatchEmbeddings tilde = vicinal_sampling_set(h, h_star, delta, vrng);
          const BatchEmbeddings& expect = delta == 1.0 ? h : h_star;
          double worst = 0.0;
          for (std::size_t i = 0; i < b; ++i)
            worst = std::max(worst, max_abs_diff(tilde.rows[i].rep.value(), expect.rows[i].rep.value()));
          vicinal_check.observe(worst, [&] {
            json d = describe();
            d["delta"] = delta;
            return d;
          });
        }
      }
    }
  }
  return {rows_check.result(), size_check.result(), hull_check.result(), vicinal_check.result()};
}

}  // namespace

bool SuiteReport::passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

std::string SuiteReport::to_json(int indent) const {
  json j;
  j["suite"] = suite;
  j["passed"] = passed();
  j["seed"] = seed;
  j["seconds"] = seconds;
  json list = json::array();
  for (const auto& c : checks) {
    json o;
    o["name"] = c.name;
    o["passed"] = c.passed;
    o["metric"] = c.metric;
    o["worst"] = c.worst;
    o["tolerance"] = c.tolerance;
    o["cases"] = c.cases;
    o[c.passed ? "worst_case" : "failing_case"] = json::parse(c.worst_case);
    list.push_back(std::move(o));
  }
  j["checks"] = std::move(list);
  return j.dump(indent);
}

const std::vector<std::string>& verification_suites() {
  static const std::vector<std::string> names{"crf-oracle", "grad-check", "kl-mc", "attn-props"};
  return names;
}

SuiteReport run_suite(const std::string& suite, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  SuiteReport report;
  report.suite = suite;
  report.seed = seed;
  if (suite == "crf-oracle")
    report.checks = crf_oracle(seed);
  else if (suite == "grad-check")
    report.checks = grad_check(seed);
  else if (suite == "kl-mc")
    report.checks = kl_mc(seed);
  else if (suite == "attn-props")
    report.checks = attn_props(seed);
  else
    throw ConfigError("unknown verification suite: " + suite);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace mmie
