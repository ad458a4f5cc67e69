// Copyright 2026 The vslab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vslab/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "vslab/error.hpp"
#include "vslab/losses.hpp"
#include "vslab/ops.hpp"
#include "vslab/optim.hpp"

namespace vslab::train {

using nn::HeadId;
using nn::ModelParams;
using nn::ParamGroup;
using nn::Tensor;
using nn::Var;

namespace {

constexpr std::array<std::string_view, 6> kRegimeNames{"lsd-only",   "comb",           "vanilla-switch",
                                                       "cnn-switch", "implicit-switch", "meta-switch"};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t head_index(HeadId h) { return static_cast<std::size_t>(h); }

void check_finite(double v, const std::string& where) {
  if (!std::isfinite(v)) throw DivergenceDetected("non-finite loss during " + where);
}

// Fisher-Yates on [0, n) driven by a dedicated stream.
std::vector<std::size_t> shuffled(std::size_t n, Rng rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

std::vector<DatasetKind> origins_of(std::span<const Sample* const> samples) {
  std::vector<DatasetKind> out;
  out.reserve(samples.size());
  for (const Sample* s : samples) out.push_back(s->origin);
  return out;
}

Var head_loss(const Var& out, HeadId h, std::span<const Sample* const> samples) {
  if (h == HeadId::Cls) return nn::cls_loss(out, origins_of(samples));
  return nn::pose_loss(out, nn::label_tensor(samples));
}

int image_size_of(std::span<const Sample* const> samples) {
  if (samples.empty()) throw EmptyDataset("no training samples");
  return samples.front()->width;
}

std::vector<Var> as_vars(const ModelParams& p, std::span<const ParamGroup> trainable) {
  const auto specs = nn::param_specs(p.config);
  std::vector<Var> vars;
  vars.reserve(p.values.size());
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const bool train = std::find(trainable.begin(), trainable.end(), specs[i].group) != trainable.end();
    vars.push_back(train ? Var::leaf(p.values[i]) : Var::constant(p.values[i]));
  }
  return vars;
}

std::vector<const Sample*> gather(std::span<const Sample* const> pool, std::span<const std::size_t> idx) {
  std::vector<const Sample*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(pool[i]);
  return out;
}

}  // namespace

std::string_view to_string(Regime r) { return kRegimeNames[static_cast<std::size_t>(r)]; }

std::optional<Regime> parse_regime(std::string_view s) {
  for (std::size_t i = 0; i < kRegimeNames.size(); ++i) {
    if (kRegimeNames[i] == s) return static_cast<Regime>(i);
  }
  return std::nullopt;
}

std::size_t model_count(Regime r) {
  switch (r) {
    case Regime::VanillaSwitch:
      return 2;
    case Regime::CnnSwitch:
      return 3;
    default:
      return 1;
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !(fine_learning_rate > 0.0)) throw InvalidArgument("learning rates must be positive");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("weight decay must be non-negative");
  if (epochs_main < 0 || epochs_fine < 0) throw InvalidArgument("epoch counts must be non-negative");
  if (batch_size < 1) throw InvalidArgument("batch size must be positive");
  if (!(beta >= 0.0)) throw InvalidArgument("beta must be non-negative");
  if (!(clip_norm > 0.0)) throw InvalidArgument("clip norm must be positive");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw InvalidArgument("holdout fraction must be in (0, 1)");
}

void MamlConfig::validate() const {
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  if (!(beta_meta > 0.0)) throw InvalidArgument("beta_meta must be positive");
  if (k_shot < 1) throw InvalidArgument("k_shot must be at least 1");
  if (iterations < 0) throw InvalidArgument("iterations must be non-negative");
  if (log_every < 1) throw InvalidArgument("log_every must be at least 1");
}

TrainConfig desk_config() {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.fine_learning_rate = 1e-4;
  c.epochs_main = 8;
  c.epochs_fine = 2;
  return c;
}

MamlConfig desk_maml_config() {
  MamlConfig m;
  m.beta_meta = 0.1;
  m.iterations = 600;
  return m;
}

bool TrainedBundle::operator==(const TrainedBundle& o) const {
  if (regime != o.regime || models != o.models || threshold != o.threshold || log.size() != o.log.size()) return false;
  // Bitwise comparison so NaN entries of inactive heads compare equal.
  auto same = [](double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; };
  for (std::size_t i = 0; i < log.size(); ++i) {
    const LogRow& a = log[i];
    const LogRow& b = o.log[i];
    if (a.phase != b.phase || a.epoch != b.epoch || a.clipped != b.clipped || !same(a.total, b.total) ||
        a.s_hat.size() != b.s_hat.size()) {
      return false;
    }
    for (std::size_t k = 0; k < 3; ++k) {
      if (!same(a.head_loss[k], b.head_loss[k])) return false;
    }
    for (std::size_t k = 0; k < a.s_hat.size(); ++k) {
      if (!same(a.s_hat[k], b.s_hat[k])) return false;
    }
  }
  return true;
}

std::vector<const Sample*> sample_pointers(std::span<const Dataset* const> datasets) {
  std::vector<const Sample*> out;
  for (const Dataset* d : datasets) {
    for (const Sample& s : d->samples) out.push_back(&s);
  }
  return out;
}

ModelParams train_supervised(std::span<const Dataset* const> datasets, std::span<const HeadId> heads,
                             const TrainConfig& cfg, std::uint64_t seed, std::vector<LogRow>* log) {
  cfg.validate();
  if (heads.empty()) throw InvalidArgument("no active heads");
  const std::vector<const Sample*> pool = sample_pointers(datasets);
  nn::NetConfig net = cfg.net;
  net.image_size = image_size_of(pool);

  const Rng root = Rng(seed).split("train");
  ModelParams p = nn::init_params(net, root.split("init").next_u64(), heads);
  for (HeadId h : heads) {
    if (h != HeadId::Cls) nn::zero_final_layer(p, h);
  }
  p.norm = nn::compute_norm_stats(pool);
  const bool balanced = heads.size() > 1;
  if (balanced) p.balance.s_hat.assign(heads.size(), 0.0);

  std::vector<ParamGroup> groups{ParamGroup::Trunk};
  for (HeadId h : heads) groups.push_back(nn::group_of(h));
  std::vector<std::size_t> which;
  for (ParamGroup g : groups) {
    for (std::size_t i : p.indices(g)) which.push_back(i);
  }
  std::sort(which.begin(), which.end());

  // Balance scales ride along as one extra tensor after the network's.
  std::vector<Tensor> state = p.values;
  const std::size_t s_index = state.size();
  if (balanced) {
    state.emplace_back(nn::Shape{static_cast<int>(heads.size()), 1, 1, 1}, 0.0);
    which.push_back(s_index);
  }
  nn::AdamW opt(state, {.weight_decay = cfg.weight_decay});

  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  const int total_epochs = cfg.epochs_main + cfg.epochs_fine;
  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    const bool main_phase = epoch < cfg.epochs_main;
    const double lr = main_phase ? cfg.learning_rate : cfg.fine_learning_rate;
    const std::vector<std::size_t> order = shuffled(pool.size(), root.split("shuffle").split(std::uint64_t(epoch)));

    std::array<double, 3> sums{0.0, 0.0, 0.0};
    double total_sum = 0.0;
    std::size_t seen = 0;
    int clipped = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
      const std::size_t len = std::min(batch, order.size() - b0);
      const std::vector<const Sample*> samples = gather(pool, std::span(order).subspan(b0, len));
      const nn::PairBatch pb = nn::make_batch(samples, p.norm);

      std::vector<Var> vars;
      vars.reserve(state.size());
      for (std::size_t i = 0; i < s_index; ++i) {
        const bool train = std::binary_search(which.begin(), which.end(), i);
        vars.push_back(train ? Var::leaf(state[i]) : Var::constant(state[i]));
      }
      const Var features = nn::encode(net, vars, pb);
      std::vector<Var> losses;
      for (HeadId h : heads) losses.push_back(head_loss(nn::head_output(net, vars, features, h), h, samples));
      Var total = losses.front();
      if (balanced) {
        vars.push_back(Var::leaf(state[s_index]));
        total = nn::loss_autobalance(losses, vars.back());
      }
      check_finite(total.item(), "supervised training");

      std::vector<Var> wrt;
      for (std::size_t i : which) wrt.push_back(vars[i]);
      std::vector<Var> g = nn::gradients(total, wrt);
      std::vector<Tensor> grads(state.size());
      std::vector<Tensor> gl;
      for (Var& v : g) gl.push_back(v.value());
      if (nn::clip_global_norm(gl, cfg.clip_norm) > cfg.clip_norm) ++clipped;
      for (std::size_t k = 0; k < which.size(); ++k) grads[which[k]] = std::move(gl[k]);
      opt.step(state, grads, which, lr);

      for (std::size_t k = 0; k < heads.size(); ++k) sums[head_index(heads[k])] += losses[k].item() * double(len);
      total_sum += total.item() * static_cast<double>(len);
      seen += len;
    }

    if (log != nullptr) {
      LogRow row{main_phase ? "main" : "fine", epoch, {kNaN, kNaN, kNaN}, {}, total_sum / double(seen), clipped};
      for (HeadId h : heads) row.head_loss[head_index(h)] = sums[head_index(h)] / double(seen);
      if (balanced) row.s_hat = state[s_index].values();
      log->push_back(std::move(row));
    }
  }

  for (std::size_t i = 0; i < s_index; ++i) p.values[i] = state[i];
  if (balanced) p.balance.s_hat = state[s_index].values();
  return p;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_halves(std::size_t n) {
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i) (i < n / 2 ? out.first : out.second).push_back(i);
  return out;
}

std::vector<Tensor> inner_adapt(std::span<const Tensor> theta, const nn::Closure& inner, double alpha) {
  const std::vector<Tensor> g = nn::grad(theta, inner);
  std::vector<Tensor> out;
  out.reserve(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    Tensor t = theta[i];
    for (std::size_t k = 0; k < t.size(); ++k) t[k] -= alpha * g[i][k];
    out.push_back(std::move(t));
  }
  return out;
}

MetaStep meta_objective(std::span<const Tensor> theta, std::span<const double> s_hat, std::span<const MetaTask> tasks,
                        double alpha, bool first_order) {
  if (s_hat.size() != tasks.size()) throw LengthMismatch("one balance scale per task required");
  if (!(alpha >= 0.0)) throw InvalidArgument("alpha must be non-negative");
  std::vector<Var> leaves;
  leaves.reserve(theta.size() + 1);
  for (const Tensor& t : theta) leaves.push_back(Var::leaf(t));
  const Var s = Var::leaf(Tensor({static_cast<int>(s_hat.size()), 1, 1, 1}, std::vector<double>(s_hat.begin(), s_hat.end())));

  std::vector<Var> outer;
  for (const MetaTask& task : tasks) {
    const std::vector<Var> g = nn::gradients(task.inner_loss(leaves), leaves, !first_order);
    std::vector<Var> adapted;
    adapted.reserve(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      adapted.push_back(nn::ops::sub(leaves[i], nn::ops::scale(g[i], alpha)));
    }
    outer.push_back(task.outer_loss(adapted));
  }
  const Var objective = nn::loss_autobalance(outer, s);

  std::vector<Var> wrt = leaves;
  wrt.push_back(s);
  const std::vector<Var> g = nn::gradients(objective, wrt);
  MetaStep step;
  for (std::size_t i = 0; i < theta.size(); ++i) step.theta_grad.push_back(g[i].value());
  step.s_grad = g.back().value().values();
  for (const Var& l : outer) step.outer_losses.push_back(l.item());
  step.objective = objective.item();
  return step;
}

void apply_meta_step(std::span<Tensor> theta, std::span<double> s_hat, const MetaStep& step, double beta_meta) {
  if (theta.size() != step.theta_grad.size() || s_hat.size() != step.s_grad.size()) {
    throw LengthMismatch("meta step does not match parameters");
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    for (std::size_t k = 0; k < theta[i].size(); ++k) theta[i][k] -= beta_meta * step.theta_grad[i][k];
  }
  for (std::size_t k = 0; k < s_hat.size(); ++k) s_hat[k] -= beta_meta * step.s_grad[k];
}

ModelParams maml_train(const Dataset& lsd, const Dataset& ssd, const MamlConfig& mcfg, const TrainConfig& cfg,
                       std::vector<LogRow>* log) {
  mcfg.validate();
  cfg.validate();
  if (lsd.size() < 2 || ssd.size() < 2) throw EmptyDataset("each dataset needs at least two samples to split");
  const std::array<const Dataset*, 2> both{&lsd, &ssd};
  const std::vector<const Sample*> pool = sample_pointers(both);
  nn::NetConfig net = cfg.net;
  net.image_size = image_size_of(pool);

  const Rng root = Rng(cfg.master_seed).split("maml");
  ModelParams p = nn::init_params(net, root.split("init").next_u64(), nn::kAllHeads);
  nn::zero_final_layer(p, HeadId::RegLSD);
  nn::zero_final_layer(p, HeadId::RegSSD);
  p.norm = nn::compute_norm_stats(pool);
  p.balance.s_hat.assign(3, 0.0);

  // Inner and meta pools per task. The Cls task draws from both datasets.
  auto halves = [](const Dataset& d) {
    auto [a, b] = split_halves(d.size());
    std::pair<std::vector<const Sample*>, std::vector<const Sample*>> out;
    for (std::size_t i : a) out.first.push_back(&d.samples[i]);
    for (std::size_t i : b) out.second.push_back(&d.samples[i]);
    return out;
  };
  const auto lsd_halves = halves(lsd);
  const auto ssd_halves = halves(ssd);
  std::vector<const Sample*> cls_inner = lsd_halves.first;
  cls_inner.insert(cls_inner.end(), ssd_halves.first.begin(), ssd_halves.first.end());
  std::vector<const Sample*> cls_meta = lsd_halves.second;
  cls_meta.insert(cls_meta.end(), ssd_halves.second.begin(), ssd_halves.second.end());

  struct TaskPools {
    HeadId head;
    const std::vector<const Sample*>* inner;
    const std::vector<const Sample*>* meta;
  };
  const std::array<TaskPools, 3> pools{TaskPools{HeadId::RegLSD, &lsd_halves.first, &lsd_halves.second},
                                       TaskPools{HeadId::RegSSD, &ssd_halves.first, &ssd_halves.second},
                                       TaskPools{HeadId::Cls, &cls_inner, &cls_meta}};

  auto draw = [&](const std::vector<const Sample*>& from, Rng rng) {
    std::vector<const Sample*> out;
    out.reserve(static_cast<std::size_t>(mcfg.k_shot));
    for (int k = 0; k < mcfg.k_shot; ++k) out.push_back(from[rng.below(from.size())]);
    return out;
  };
  auto closure = [&](HeadId head, std::vector<const Sample*> samples) -> nn::Closure {
    auto batch = std::make_shared<nn::PairBatch>(nn::make_batch(samples, p.norm));
    return [net, head, batch, samples = std::move(samples)](std::span<const Var> params) {
      return head_loss(nn::forward(net, params, *batch, head), head, samples);
    };
  };

  std::array<double, 3> window{0.0, 0.0, 0.0};
  double window_total = 0.0;
  int window_len = 0;
  int clipped = 0;
  for (int it = 0; it < mcfg.iterations; ++it) {
    const Rng it_rng = root.split("iteration").split(std::uint64_t(it));
    std::vector<MetaTask> tasks;
    for (std::size_t t = 0; t < pools.size(); ++t) {
      const Rng trng = it_rng.split(std::uint64_t(t));
      tasks.push_back({closure(pools[t].head, draw(*pools[t].inner, trng.split("inner"))),
                       closure(pools[t].head, draw(*pools[t].meta, trng.split("meta")))});
    }
    MetaStep step = meta_objective(p.values, p.balance.s_hat, tasks, mcfg.alpha, mcfg.first_order);
    check_finite(step.objective, "meta training");
    if (nn::clip_global_norm(step.theta_grad, cfg.clip_norm) > cfg.clip_norm) ++clipped;
    apply_meta_step(p.values, p.balance.s_hat, step, mcfg.beta_meta);

    for (std::size_t t = 0; t < 3; ++t) window[t] += step.outer_losses[t];
    window_total += step.objective;
    ++window_len;
    if (window_len == mcfg.log_every || it + 1 == mcfg.iterations) {
      if (log != nullptr) {
        LogRow row{"meta", it + 1, {}, p.balance.s_hat, window_total / window_len, clipped};
        for (std::size_t t = 0; t < 3; ++t) row.head_loss[t] = window[t] / window_len;
        log->push_back(std::move(row));
      }
      window = {0.0, 0.0, 0.0};
      window_total = 0.0;
      window_len = 0;
      clipped = 0;
    }
  }
  return p;
}

ModelParams finetune_heads(const ModelParams& params, const Dataset& lsd, const Dataset& ssd, const TrainConfig& cfg,
                           std::vector<LogRow>* log, FinetuneReport* report) {
  cfg.validate();
  ModelParams p = params;
  if (cfg.epochs_fine == 0) return p;

  // Tail of each dataset is held out; the rest trains.
  auto split = [&](const Dataset& d) {
    const std::size_t hold =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(double(d.size()) * cfg.holdout_fraction)), 1,
                                d.size() > 1 ? d.size() - 1 : 1);
    std::pair<std::vector<const Sample*>, std::vector<const Sample*>> out;
    for (std::size_t i = 0; i < d.size(); ++i) (i + hold < d.size() ? out.first : out.second).push_back(&d.samples[i]);
    return out;
  };
  if (lsd.size() < 2 || ssd.size() < 2) throw EmptyDataset("finetuning needs at least two samples per dataset");
  const auto lsd_split = split(lsd);
  const auto ssd_split = split(ssd);

  // The trunk is frozen, so pooled features are computed once.
  const std::vector<Var> consts = as_vars(p, {});
  auto features_of = [&](const std::vector<const Sample*>& samples) {
    nn::NoGradGuard guard;
    const int f = p.config.feature_dim();
    Tensor out({static_cast<int>(samples.size()), f, 1, 1});
    const std::size_t chunk = 64;
    for (std::size_t b0 = 0; b0 < samples.size(); b0 += chunk) {
      const std::size_t len = std::min(chunk, samples.size() - b0);
      const Tensor part =
          nn::encode(p.config, consts, nn::make_batch(std::span(samples).subspan(b0, len), p.norm)).value();
      std::copy(part.values().begin(), part.values().end(), out.data() + b0 * std::size_t(f));
    }
    return out;
  };
  auto rows_of = [](const Tensor& feats, std::span<const std::size_t> idx) {
    const int f = feats.dim(1);
    Tensor out({static_cast<int>(idx.size()), f, 1, 1});
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::copy_n(feats.data() + idx[r] * std::size_t(f), f, out.data() + r * std::size_t(f));
    }
    return out;
  };

  const Rng root = Rng(cfg.master_seed).split("finetune");
  for (HeadId h : nn::kAllHeads) {
    if (!p.has(nn::group_of(h))) continue;
    std::vector<const Sample*> train;
    std::vector<const Sample*> hold;
    auto append = [](std::vector<const Sample*>& dst, const std::vector<const Sample*>& src) {
      dst.insert(dst.end(), src.begin(), src.end());
    };
    if (h != HeadId::RegSSD) {
      append(train, lsd_split.first);
      append(hold, lsd_split.second);
    }
    if (h != HeadId::RegLSD) {
      append(train, ssd_split.first);
      append(hold, ssd_split.second);
    }
    const Tensor train_feats = features_of(train);
    const Var hold_feats = Var::constant(features_of(hold));

    const std::vector<std::size_t> which = p.indices(nn::group_of(h));
    std::vector<Tensor> state = p.values;
    nn::AdamW opt(state, {.weight_decay = cfg.weight_decay});

    auto holdout_loss = [&](const std::vector<Tensor>& values) {
      nn::NoGradGuard guard;
      std::vector<Var> vars;
      for (const Tensor& t : values) vars.push_back(Var::constant(t));
      return head_loss(nn::head_output(p.config, vars, hold_feats, h), h, hold).item();
    };
    double best = holdout_loss(state);
    const double before = best;
    std::vector<Tensor> best_values = state;

    for (int epoch = 0; epoch < cfg.epochs_fine; ++epoch) {
      const std::vector<std::size_t> order =
          shuffled(train.size(), root.split(std::uint64_t(head_index(h))).split(std::uint64_t(epoch)));
      double sum = 0.0;
      int clipped = 0;
      for (std::size_t b0 = 0; b0 < order.size(); b0 += std::size_t(cfg.batch_size)) {
        const std::size_t len = std::min(std::size_t(cfg.batch_size), order.size() - b0);
        const std::span<const std::size_t> idx = std::span(order).subspan(b0, len);
        const std::vector<const Sample*> samples = gather(train, idx);
        std::vector<Var> vars;
        for (std::size_t i = 0; i < state.size(); ++i) {
          const bool trainable = std::find(which.begin(), which.end(), i) != which.end();
          vars.push_back(trainable ? Var::leaf(state[i]) : Var::constant(state[i]));
        }
        const Var loss = head_loss(nn::head_output(p.config, vars, Var::constant(rows_of(train_feats, idx)), h), h, samples);
        check_finite(loss.item(), "head finetuning");
        std::vector<Var> wrt;
        for (std::size_t i : which) wrt.push_back(vars[i]);
        std::vector<Var> g = nn::gradients(loss, wrt);
        std::vector<Tensor> gl;
        for (Var& v : g) gl.push_back(v.value());
        if (nn::clip_global_norm(gl, cfg.clip_norm) > cfg.clip_norm) ++clipped;
        std::vector<Tensor> grads(state.size());
        for (std::size_t k = 0; k < which.size(); ++k) grads[which[k]] = std::move(gl[k]);
        opt.step(state, grads, which, cfg.fine_learning_rate);
        sum += loss.item() * double(len);
      }
      const double held = holdout_loss(state);
      if (held < best) {
        best = held;
        best_values = state;
      }
      if (log != nullptr) {
        LogRow row{"finetune-" + std::string(nn::to_string(h)), epoch, {kNaN, kNaN, kNaN}, {}, held, clipped};
        row.head_loss[head_index(h)] = sum / double(train.size());
        log->push_back(std::move(row));
      }
    }
    for (std::size_t i : which) p.values[i] = best_values[i];
    if (report != nullptr) {
      report->holdout_before[head_index(h)] = before;
      report->holdout_after[head_index(h)] = best;
    }
  }
  return p;
}

std::vector<ValidationState> validation_states(std::span<const Dataset* const> datasets) {
  std::vector<ValidationState> out;
  for (const Dataset* d : datasets) {
    for (const Sample& s : d->samples) {
      out.push_back({photometric_mse(s.reference_image(), s.current_image()), s.origin == DatasetKind::SSD});
    }
  }
  return out;
}

double balanced_accuracy(std::span<const ValidationState> states, double threshold) {
  std::size_t pos = 0, neg = 0, tp = 0, tn = 0;
  for (const ValidationState& s : states) {
    const bool predict_ssd = s.mse < threshold;
    if (s.use_ssd) {
      ++pos;
      tp += predict_ssd ? 1 : 0;
    } else {
      ++neg;
      tn += predict_ssd ? 0 : 1;
    }
  }
  if (pos == 0 && neg == 0) throw EmptyValidation("no validation states");
  if (pos == 0) return double(tn) / double(neg);
  if (neg == 0) return double(tp) / double(pos);
  return 0.5 * (double(tp) / double(pos) + double(tn) / double(neg));
}

double calibrate_vanilla_threshold(std::span<const ValidationState> states, std::span<const double> candidates) {
  if (states.empty()) throw EmptyValidation("no validation states");
  if (!candidates.empty()) {
    double best_t = candidates.front();
    double best = balanced_accuracy(states, best_t);
    for (double t : candidates.subspan(1)) {
      const double a = balanced_accuracy(states, t);
      if (a > best) {
        best = a;
        best_t = t;
      }
    }
    return best_t;
  }

  std::vector<ValidationState> sorted(states.begin(), states.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.mse < b.mse; });
  std::size_t pos = 0, neg = 0;
  for (const auto& s : sorted) (s.use_ssd ? pos : neg)++;
  auto score = [&](std::size_t tp, std::size_t below_neg) {
    const double tpr = pos ? double(tp) / double(pos) : 0.0;
    const double tnr = neg ? double(neg - below_neg) / double(neg) : 0.0;
    if (pos == 0) return tnr;
    if (neg == 0) return tpr;
    return 0.5 * (tpr + tnr);
  };

  // Threshold below everything, then one per gap, then above everything.
  double best_t = sorted.front().mse - 1.0;
  double best = score(0, 0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    (sorted[i].use_ssd ? tp : fp)++;
    if (i + 1 < sorted.size() && sorted[i + 1].mse == sorted[i].mse) continue;
    const double t = i + 1 < sorted.size() ? 0.5 * (sorted[i].mse + sorted[i + 1].mse) : sorted[i].mse + 1.0;
    const double a = score(tp, fp);
    if (a > best) {
      best = a;
      best_t = t;
    }
  }
  return best_t;
}

TrainedBundle build_bundle(Regime regime, const Dataset* lsd, const Dataset* ssd, const TrainConfig& cfg,
                           const MamlConfig& mcfg) {
  auto need = [](const Dataset* d, const char* what) {
    if (d == nullptr || d->samples.empty()) throw EmptyDataset(std::string(what) + " dataset required");
    return d;
  };
  const Rng seeds = Rng(cfg.master_seed).split("model");
  auto seed_for = [&](std::uint64_t role) { return seeds.split(role).next_u64(); };

  TrainedBundle b;
  b.regime = regime;
  const std::array<HeadId, 1> reg_lsd{HeadId::RegLSD};
  const std::array<HeadId, 1> reg_ssd{HeadId::RegSSD};
  const std::array<HeadId, 1> cls{HeadId::Cls};
  switch (regime) {
    case Regime::LsdOnly: {
      const std::array<const Dataset*, 1> ds{need(lsd, "LSD")};
      b.models.push_back(train_supervised(ds, reg_lsd, cfg, seed_for(0), &b.log));
      break;
    }
    case Regime::Comb: {
      const std::array<const Dataset*, 2> ds{need(lsd, "LSD"), need(ssd, "SSD")};
      b.models.push_back(train_supervised(ds, reg_lsd, cfg, seed_for(0), &b.log));
      break;
    }
    case Regime::VanillaSwitch:
    case Regime::CnnSwitch: {
      const std::array<const Dataset*, 1> dl{need(lsd, "LSD")};
      const std::array<const Dataset*, 1> dsd{need(ssd, "SSD")};
      const std::array<const Dataset*, 2> both{lsd, ssd};
      b.models.push_back(train_supervised(dl, reg_lsd, cfg, seed_for(0), &b.log));
      b.models.push_back(train_supervised(dsd, reg_ssd, cfg, seed_for(1), &b.log));
      if (regime == Regime::VanillaSwitch) {
        b.threshold = calibrate_vanilla_threshold(validation_states(both));
      } else {
        b.models.push_back(train_supervised(both, cls, cfg, seed_for(2), &b.log));
      }
      break;
    }
    case Regime::ImplicitSwitch: {
      const std::array<const Dataset*, 2> ds{need(lsd, "LSD"), need(ssd, "SSD")};
      const std::array<HeadId, 2> heads{HeadId::RegLSD, HeadId::Cls};
      b.models.push_back(train_supervised(ds, heads, cfg, seed_for(0), &b.log));
      break;
    }
    case Regime::MetaSwitch: {
      TrainConfig c = cfg;
      c.master_seed = seed_for(0);
      const ModelParams meta = maml_train(*need(lsd, "LSD"), *need(ssd, "SSD"), mcfg, c, &b.log);
      b.models.push_back(finetune_heads(meta, *lsd, *ssd, c, &b.log));
      break;
    }
  }
  return b;
}

std::string log_csv(std::span<const LogRow> log) {
  std::size_t s_count = 0;
  for (const LogRow& r : log) s_count = std::max(s_count, r.s_hat.size());
  std::ostringstream out;
  out << std::setprecision(17);
  out << "phase,epoch,loss_reg_lsd,loss_reg_ssd,loss_cls";
  for (std::size_t k = 0; k < s_count; ++k) out << ",s_hat_" << k;
  out << ",total,clipped_batches\n";
  auto cell = [&](double v) {
    if (std::isnan(v)) return;
    out << v;
  };
  for (const LogRow& r : log) {
    out << r.phase << ',' << r.epoch;
    for (double v : r.head_loss) {
      out << ',';
      cell(v);
    }
    for (std::size_t k = 0; k < s_count; ++k) {
      out << ',';
      if (k < r.s_hat.size()) cell(r.s_hat[k]);
    }
    out << ',';
    cell(r.total);
    out << ',' << r.clipped << '\n';
  }
  return out.str();
}

}  // namespace vslab::train
