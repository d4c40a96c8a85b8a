// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli/commands.hpp"
#include "dsm/attacks.hpp"
#include "dsm/augment.hpp"
#include "dsm/evalharness.hpp"
#include "dsm/faceverify.hpp"
#include "dsm/gradient.hpp"
#include "dsm/labeling.hpp"
#include "dsm/math.hpp"
#include "dsm/synthetic.hpp"
#include "dsm/training.hpp"

using namespace dsm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

/// Collects named tolerance checks; remembers the worst one.
class Checks {
public:
  void near(double got, double want, double tol, const std::string& what) {
    const double err = std::abs(got - want);
    ++count_;
    if (!(err <= tol) && failure_.empty()) failure_ = what + fmt(": got %.17g want %.17g", got, want);
    worst_ = std::max(worst_, std::isfinite(err) ? err : INFINITY);
  }
  void truth(bool ok, const std::string& what) {
    ++count_;
    if (!ok && failure_.empty()) failure_ = what;
  }
  Outcome outcome(const std::string& what) const {
    if (!failure_.empty()) return {false, failure_};
    return {true, fmt("%d checks on %s, worst abs error %.2e", count_, what.c_str(), worst_)};
  }

private:
  int count_ = 0;
  double worst_ = 0.0;
  std::string failure_;
};

// ---------------------------------------------------------------- 1

Outcome exact_math() {
  Checks c;
  Rng rng(1, "exact-math");
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(9));
    std::vector<double> z(k);
    for (double& v : z) v = rng.uniform(-8, 8);
    const double zmax = *std::max_element(z.begin(), z.end());
    double norm = 0.0;
    for (double v : z) norm += std::exp(v - zmax);
    const LabelDistribution p = softmax(z);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
      c.near(p[i], std::exp(z[i] - zmax) / norm, 1e-12, "softmax");
      sum += p[i];
    }
    c.near(sum, 1.0, 1e-12, "softmax sums to one");
    const int y = static_cast<int>(rng.below(k));
    const double lse = zmax + std::log(norm);
    c.near(cross_entropy(labeling::one_hot(y, k), p), lse - z[y], 1e-9, "one-hot cross-entropy");

    // soft targets: -sum t log p = lse - t.z, gradient (p - t) / n
    std::vector<double> t(k);
    double tsum = 0.0;
    for (double& v : t) tsum += v = rng.uniform();
    double tz = 0.0;
    for (int i = 0; i < k; ++i) tz += (t[i] /= tsum) * z[i];
    const Tensor logits({2, k}, [&] { auto v = z; v.insert(v.end(), z.begin(), z.end()); return v; }());
    Tensor targets({2, k});
    for (int i = 0; i < k; ++i) targets.at(0, i) = t[i], targets.at(1, i) = i == y;
    const auto lg = softmax_cross_entropy(logits, targets);
    c.near(lg.loss, 0.5 * ((lse - tz) + (lse - z[y])), 1e-9, "batch cross-entropy");
    for (int i = 0; i < k; ++i) {
      c.near(lg.grad.at(0, i), (p[i] - t[i]) / 2, 1e-12, "cross-entropy gradient");
      c.near(lg.grad.at(1, i), (p[i] - (i == y)) / 2, 1e-12, "cross-entropy gradient");
    }

    const double gamma = rng.uniform(0, 0.5);
    const auto s = labeling::smooth_label(y, k, gamma);
    for (int i = 0; i < k; ++i) c.near(s[i], i == y ? 1 - gamma : gamma / (k - 1), 1e-12, "label smoothing");
    const auto oh = labeling::one_hot(y, k);
    for (int i = 0; i < k; ++i) c.truth(oh[i] == (i == y ? 1.0 : 0.0), "one-hot");

    const int y2 = static_cast<int>(rng.below(k));
    const double lam = rng.uniform();
    const auto pl = augment::pseudo_label(lam, y, y2, k);
    for (int i = 0; i < k; ++i)
      c.near(pl[i], lam * (i == y) + (1 - lam) * (i == y2), 1e-12, "mixed pseudo label");

    std::multiset<double> before(p.probs().begin(), p.probs().end());
    const auto sh = labeling::shuffle_dark(p, y, rng);
    const auto rv = labeling::reverse_dark(p, y);
    c.truth(sh[y] == p[y] && rv[y] == p[y], "shuffled/reversed keep the true-class mass");
    c.truth(std::multiset<double>(sh.probs().begin(), sh.probs().end()) == before &&
                std::multiset<double>(rv.probs().begin(), rv.probs().end()) == before,
            "shuffled/reversed permute the dark mass");
  }

  // CutMix: reported lambda is one minus the pasted area fraction, and the mask reproduces the mix
  const ImageShape shape{3, 12, 10};
  Tensor xa({16, 3, 12, 10}), xb({16, 3, 12, 10});
  for (double& v : xa.values()) v = rng.uniform();
  for (double& v : xb.values()) v = rng.uniform();
  for (double alpha : {0.1, 1.0, 4.0}) {
    const auto mix = augment::cutmix(ImageBatch(xa), ImageBatch(xb), alpha, rng);
    for (int n = 0; n < 16; ++n) {
      double kept = 0.0;
      for (int h = 0; h < shape.height; ++h)
        for (int w = 0; w < shape.width; ++w) kept += mix.mask.at(n, 0, h, w);
      c.near(mix.lambda[n], kept / (shape.height * shape.width), 1e-12, "CutMix lambda equals kept area");
      for (int ch = 0; ch < 3; ++ch)
        for (int h = 0; h < shape.height; ++h)
          for (int w = 0; w < shape.width; ++w) {
            const double m = mix.mask.at(n, ch, h, w);
            c.truth(m == 0.0 || m == 1.0, "CutMix mask is binary");
            c.near(mix.mixed.pixels().at(n, ch, h, w), m * xa.at(n, ch, h, w) + (1 - m) * xb.at(n, ch, h, w), 1e-15,
                   "CutMix blend");
          }
    }
    for (int t = 0; t < 100; ++t) {
      const double lam0 = rng.uniform();
      const auto box = augment::cutmix_box(shape.height, shape.width, lam0, rng);
      c.truth(box.top >= 0 && box.left >= 0 && box.bottom <= shape.height && box.right <= shape.width,
              "CutMix box inside the image");
    }
  }

  // L-infinity projection
  Tensor x0({4, 3, 8, 8}), xadv({4, 3, 8, 8});
  for (double& v : x0.values()) v = rng.uniform();
  for (double& v : xadv.values()) v = rng.uniform(-0.5, 1.5);
  for (double eps : {0.0, 4.0 / 255, 16.0 / 255, 0.5}) {
    const Tensor pr = attacks::clip_project(xadv, x0, eps);
    bool inside = true, exact = true;
    for (std::size_t i = 0; i < pr.size(); ++i) {
      inside &= std::abs(pr[i] - x0[i]) <= eps + 1e-15 && pr[i] >= 0.0 && pr[i] <= 1.0;
      exact &= pr[i] == std::clamp(xadv[i], std::max(0.0, x0[i] - eps), std::min(1.0, x0[i] + eps));
    }
    c.truth(inside, "projection stays in the ball and the pixel range");
    c.truth(exact, "projection is the elementwise clamp");
    const Tensor again = attacks::clip_project(pr, x0, eps);
    c.truth(std::equal(again.values().begin(), again.values().end(), pr.values().begin()), "projection is idempotent");
  }
  return c.outcome("softmax, cross-entropy, labels, CutMix and projection");
}

// ---------------------------------------------------------------- 2

Outcome gradients() {
  Checks c;
  const ImageShape shape{3, 8, 8};
  Rng rng(2, "fd");
  Tensor x({3, 3, 8, 8});
  for (double& v : x.values()) v = rng.uniform(0.05, 0.95);
  const Tensor targets = one_hot_rows(std::vector<int>{0, 2, 1}, 4);
  int checked = 0;
  for (const char* arch : {"conv_a", "conv_b", "mlp"}) {
    Rng init(7, arch);
    Model m = make_model(arch, shape, 4, init);
    const auto loss_at = [&](const Tensor& in) { return softmax_cross_entropy(m.logits(in), targets).loss; };
    const ForwardTrace trace = m.forward(x);
    const auto lg = softmax_cross_entropy(trace.logits(), targets);
    Gradients grads = m.zero_gradients();
    const Tensor gx = m.backward(trace, &lg.grad, nullptr, &grads);
    auto params = m.parameters();
    for (int t = 0; t < 20; ++t) {
      // input coordinate
      const std::size_t i = rng.below(x.size());
      Tensor xp = x, xm = x;
      xp[i] += 1e-5;
      xm[i] -= 1e-5;
      const double fdx = (loss_at(xp) - loss_at(xm)) / 2e-5;
      // parameter coordinate
      const std::size_t p = rng.below(params.size());
      const std::size_t j = rng.below(params[p]->value.size());
      const double saved = params[p]->value[j];
      params[p]->value[j] = saved + 1e-5;
      const double lp = loss_at(x);
      params[p]->value[j] = saved - 1e-5;
      const double lm = loss_at(x);
      params[p]->value[j] = saved;
      const double fdp = (lp - lm) / 2e-5;
      for (auto [fd, an, what] : {std::tuple{fdx, gx[i], "input"}, std::tuple{fdp, grads[p][j], "parameter"}}) {
        if (std::abs(fd) < 1e-8 && std::abs(an) < 1e-8) continue;  // inactive ReLU
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
        c.truth(rel < 1e-3, fmt("%s %s gradient: analytic %.9g vs central difference %.9g", arch, what, an, fd));
        c.near(rel, 0.0, 1e-3, "relative error");
        ++checked;
      }
    }
  }
  return c.outcome(fmt("%d input/parameter coordinates of conv_a, conv_b, mlp (relative error)", checked));
}

// ---------------------------------------------------------------- 3

bool same_bits(const ImageBatch& a, const ImageBatch& b) {
  const auto& x = a.pixels().values();
  const auto& y = b.pixels().values();
  return x.size() == y.size() && std::equal(x.begin(), x.end(), y.begin());
}

Outcome reductions() {
  Checks c;
  const ImageShape shape{3, 12, 12};
  Rng rng(3, "reductions");
  Tensor xt({8, 3, 12, 12});
  for (double& v : xt.values()) v = rng.uniform();
  const ImageBatch x(xt);
  std::vector<int> y(8);
  for (int& v : y) v = static_cast<int>(rng.below(5));
  for (const char* arch : {"conv_a", "conv_b", "mlp"}) {
    Rng init(11, arch);
    const Model m = make_model(arch, shape, 5, init);
    for (double eps : {2.0 / 255, 16.0 / 255}) {
      attacks::AttackConfig cfg;
      cfg.epsilon = eps;
      cfg.beta = eps;
      cfg.mu = 0.0;
      cfg.iterations = 1;
      c.truth(same_bits(attacks::mi_fgsm(m, x, {y, std::nullopt}, cfg).adversarial,
                        attacks::fgsm(m, x, y, eps).adversarial),
              fmt("%s: one-step momentum-free MI-FGSM differs from FGSM", arch));
    }
    attacks::AttackConfig cfg;
    cfg.transform_prob = 0.0;
    Rng r1(5, "di");
    const auto di = attacks::mdi2_fgsm(m, x, {y, std::nullopt}, cfg, r1);
    const auto mi = attacks::mi_fgsm(m, x, {y, std::nullopt}, cfg);
    c.truth(same_bits(di.adversarial, mi.adversarial) && di.grad_norm_trace == mi.grad_norm_trace,
            fmt("%s: M-DI2-FGSM without transforms differs from MI-FGSM", arch));
    const Model* one[] = {&m};
    Rng r2(5, "di"), r3(5, "di");
    c.truth(same_bits(attacks::mi_fgsm(one, x, {y, std::nullopt}, cfg).adversarial, mi.adversarial),
            fmt("%s: singleton ensemble differs from the model (MI)", arch));
    cfg.transform_prob = 0.7;
    c.truth(same_bits(attacks::mdi2_fgsm(one, x, {y, std::nullopt}, cfg, r2).adversarial,
                      attacks::mdi2_fgsm(m, x, {y, std::nullopt}, cfg, r3).adversarial),
            fmt("%s: singleton ensemble differs from the model (M-DI2)", arch));
  }
  Tensor emb({6, 8}), w({5, 8});
  for (double& v : emb.values()) v = rng.uniform(-1, 1);
  for (double& v : w.values()) v = rng.uniform(-1, 1);
  const std::vector<int> labels{0, 1, 2, 3, 4, 0};
  for (double s : {1.0, 30.0, 64.0}) {
    Tensor g0e, g0w;
    const double plain = face::cosine_margin_loss(emb, w, labels, {face::MarginKind::plain_softmax, s, 0.0}, &g0e, &g0w);
    // reference: mean cross-entropy of s * cos
    double ref = 0.0;
    for (int i = 0; i < 6; ++i) {
      std::vector<double> z(5);
      for (int k = 0; k < 5; ++k)
        z[k] = s * cosine_similarity(emb.row(i), w.row(k));
      const double zmax = *std::max_element(z.begin(), z.end());
      double norm = 0.0;
      for (double v : z) norm += std::exp(v - zmax);
      ref += zmax + std::log(norm) - z[labels[i]];
    }
    c.near(plain, ref / 6, 1e-9, "cosine softmax loss");
    for (auto kind : {face::MarginKind::am_softmax, face::MarginKind::aaml}) {
      Tensor ge, gw;
      c.near(face::cosine_margin_loss(emb, w, labels, {kind, s, 0.0}, &ge, &gw), plain, 1e-12,
             "zero-margin loss equals plain");
      for (std::size_t i = 0; i < ge.size(); ++i) c.near(ge[i], g0e[i], 1e-12, "zero-margin embedding gradient");
      for (std::size_t i = 0; i < gw.size(); ++i) c.near(gw[i], g0w[i], 1e-12, "zero-margin weight gradient");
    }
  }
  return c.outcome("FGSM, MI, M-DI2, singleton ensembles, zero margins");
}

// ---------------------------------------------------------------- 4 to 8: classification transfer

ToyDataConfig toy_data() {
  ToyDataConfig d;
  d.noise = 0.1;
  d.distractor_max = 0.7;
  d.train_per_class = 60;
  return d;
}

training::TrainConfig train_config(std::uint64_t seed) {
  training::TrainConfig c;
  c.epochs = 40;
  c.learning_rate = 0.02;
  c.decay_epochs = {20, 33};
  c.seed = seed;
  return c;
}

/// Surrogates train with lighter augmentation than the teacher and victims: no
/// translation, only occasional rescaling and a longer schedule, so mixing is their main regularizer.
training::TrainConfig surrogate_config(std::uint64_t seed) {
  training::TrainConfig c = train_config(seed);
  c.epochs = 80;
  c.decay_epochs = {40, 66};
  c.crop_pad = 0;
  c.rescale_prob = 0.2;
  return c;
}

constexpr double kEpsilon = 8.0 / 255;
constexpr int kAttackSamples = 250;
const std::uint64_t kSeeds[] = {1, 2, 3};

eval::AttackSpec spec(eval::Optimizer opt) {
  eval::AttackSpec s{opt, {}};
  s.config.epsilon = kEpsilon;
  s.config.beta = kEpsilon / 8;
  return s;
}

struct Variant {
  std::string arch;
  augment::MixKind mix;
  labeling::LabelKind label;
  double alpha = 1.0;
};

const std::map<std::string, Variant>& variants() {
  using MK = augment::MixKind;
  using LK = labeling::LabelKind;
  static const std::map<std::string, Variant> v{
      {"normal", {"conv_a", MK::none, LK::one_hot}},
      {"dark", {"conv_a", MK::none, LK::dark}},
      {"shuffled", {"conv_a", MK::none, LK::dark_shuffled}},
      {"reversed", {"conv_a", MK::none, LK::dark_reversed}},
      {"cutmix-onehot", {"conv_a", MK::cutmix, LK::one_hot}},
      {"cutmix-dark", {"conv_a", MK::cutmix, LK::dark}},
      {"dark-conv_b", {"conv_b", MK::none, LK::dark}},
      {"dark-conv_c", {"conv_c", MK::none, LK::dark}},
  };
  return v;
}

/// Data, teacher and held-out victims of one seed; surrogates train on first use.
class Lab {
public:
  explicit Lab(std::uint64_t seed) : seed_(seed) {
    Rng drng(seed, "data");
    const Dataset all = make_toy_dataset(toy_data(), drng);
    train_ = all.split(Split::train);
    const Dataset test = all.split(Split::test);
    std::vector<int> rows(kAttackSamples);
    std::iota(rows.begin(), rows.end(), 0);
    attack_set_ = test.subset(rows);

    Rng tinit(seed, "teacher");
    teacher_ = std::make_unique<Model>(make_model("conv_a", train_.shape(), train_.classes(), tinit));
    training::train_normal(*teacher_, train_, train_config(seed ^ 0x7ea));
    const char* archs[] = {"conv_b", "conv_c", "mlp", "conv_a"};
    for (int i = 0; i < 4; ++i) {
      Rng vinit = Rng(seed, "victim").fork(archs[i], i);
      victims_.push_back(std::make_unique<Model>(make_model(archs[i], train_.shape(), train_.classes(), vinit)));
      training::train_normal(*victims_.back(), train_, train_config(seed * 1000 + 10 + i));
      oracles_.emplace_back(fmt("%s#%d", archs[i], i), *victims_.back());
    }
  }

  std::uint64_t seed() const { return seed_; }
  const Model& teacher() const { return *teacher_; }
  const Dataset& train() const { return train_; }
  const Dataset& attack_set() const { return attack_set_; }
  const std::vector<eval::VictimOracle>& victims() const { return oracles_; }

  const Model& surrogate(const std::string& name) {
    auto it = surrogates_.find(name);
    if (it != surrogates_.end()) return *it->second;
    const Variant& v = variants().at(name);
    // same initialization and training stream as the alpha sweep, so variants differ only in what they learn from
    Rng init(seed_, "sweep-student");
    auto m = std::make_unique<Model>(make_model(v.arch, train_.shape(), train_.classes(), init));
    training::TrainConfig cfg = surrogate_config(seed_);
    cfg.mix = v.mix;
    cfg.label = v.label;
    cfg.alpha = v.alpha;
    training::train_dsm(*m, teacher_.get(), train_, cfg);
    return *surrogates_.emplace(name, std::move(m)).first->second;
  }

  /// Mean transfer success over the victims, in percent.
  double transfer(const std::vector<std::string>& members, eval::Optimizer opt = eval::Optimizer::mi_fgsm) {
    eval::Surrogate s{"s", {}};
    for (const auto& n : members) s.members.push_back(&surrogate(n));
    const eval::AttackSpec a[] = {spec(opt)};
    const std::uint64_t one[] = {seed_};
    return 100.0 * eval::run_matrix({&s, 1}, oracles_, attack_set_, a, one).mean_transfer("s");
  }

private:
  std::uint64_t seed_;
  Dataset train_, attack_set_;
  std::unique_ptr<Model> teacher_;
  std::vector<std::unique_ptr<Model>> victims_;
  std::vector<eval::VictimOracle> oracles_;
  std::map<std::string, std::unique_ptr<Model>> surrogates_;
};

std::vector<std::unique_ptr<Lab>>& labs() {
  static std::vector<std::unique_ptr<Lab>> l;
  if (l.empty())
    for (auto s : kSeeds) l.push_back(std::make_unique<Lab>(s));
  return l;
}

/// Per-seed values and their mean for one surrogate configuration.
std::vector<double> per_seed(const std::vector<std::string>& members, eval::Optimizer opt = eval::Optimizer::mi_fgsm) {
  std::vector<double> v;
  for (auto& lab : labs()) v.push_back(lab->transfer(members, opt));
  return v;
}

std::string show(const std::vector<double>& v) {
  std::string s = fmt("%.1f [", mean(v));
  for (std::size_t i = 0; i < v.size(); ++i) s += fmt(i ? " %.1f" : "%.1f", v[i]);
  return s + "]";
}

Outcome dark_knowledge() {
  const auto normal = per_seed({"normal"}), dark = per_seed({"dark"}), shuffled = per_seed({"shuffled"}),
             reversed = per_seed({"reversed"});
  const double gain = mean(dark) - mean(normal);
  const bool ok = gain >= 3.0 && mean(shuffled) <= mean(normal) + 1.0 && mean(reversed) <= mean(normal) + 1.0;
  return {ok, fmt("MI-FGSM mean transfer over 4 victims, %%: normal %s, dark %s (%+.1f, need >= +3), "
                  "shuffled %s, reversed %s (need <= normal + 1)",
                  show(normal).c_str(), show(dark).c_str(), gain, show(shuffled).c_str(), show(reversed).c_str())};
}

Outcome mixing() {
  const auto normal = per_seed({"normal"}), dark = per_seed({"dark"}), cm1 = per_seed({"cutmix-onehot"}),
             cmd = per_seed({"cutmix-dark"});
  const double hurt = mean(cm1) - mean(normal), help = mean(cmd) - mean(dark);
  return {hurt < 0.0 && help >= 2.0,
          fmt("CutMix+one-hot %s vs normal %s (%+.1f, need < 0); CutMix+dark %s vs dark %s (%+.1f, need >= +2)",
              show(cm1).c_str(), show(normal).c_str(), hurt, show(cmd).c_str(), show(dark).c_str(), help)};
}

Outcome ensemble() {
  const std::vector<std::string> names{"dark", "dark-conv_b", "dark-conv_c"};
  double best = -1.0;
  std::string singles;
  for (const auto& n : names) {
    const auto v = per_seed({n});
    best = std::max(best, mean(v));
    singles += n + " " + show(v) + ", ";
  }
  const auto ens = per_seed(names);
  return {mean(ens) >= best + 2.0,
          fmt("%sensemble %s (%+.1f over the best single, need >= +2)", singles.c_str(), show(ens).c_str(),
              mean(ens) - best)};
}

Outcome alpha_sweep() {
  const double alphas[] = {0.1, 1.0, 4.0};
  std::vector<double> curve(3, 0.0);
  for (auto& lab : labs()) {
    eval::SweepSetup s;
    s.teacher = &lab->teacher();
    s.student_architecture = "conv_a";
    s.train = &lab->train();
    s.eval = &lab->attack_set();
    s.victims = lab->victims();
    s.train_config = surrogate_config(lab->seed());
    s.attack = spec(eval::Optimizer::mi_fgsm);
    const std::uint64_t one[] = {lab->seed()};
    const auto points = eval::sweep_alpha(s, alphas, one);
    for (std::size_t i = 0; i < points.size(); ++i) curve[i] += 100.0 * points[i].success / std::size(kSeeds);
  }
  const double base = mean(per_seed({"dark"}));
  const auto [lo, hi] = std::minmax_element(curve.begin(), curve.end());
  const bool ok = *lo > base && *hi - *lo <= 5.0;
  return {ok, fmt("CutMix dark surrogate at alpha 0.1/1/4: %.1f/%.1f/%.1f vs no-mixing %.1f (all must exceed); "
                  "spread %.1f (need <= 5)",
                  curve[0], curve[1], curve[2], base, *hi - *lo)};
}

Outcome optimizers() {
  const auto f = per_seed({"dark"}, eval::Optimizer::fgsm), mi = per_seed({"dark"}, eval::Optimizer::mi_fgsm),
             md = per_seed({"dark"}, eval::Optimizer::mdi2_fgsm);
  bool ok = true;
  for (std::size_t i = 0; i < f.size(); ++i) ok &= md[i] >= mi[i] - 1.0 && mi[i] >= f[i] - 1.0;
  return {ok, fmt("dark surrogate, per seed must satisfy M-DI2 >= MI >= FGSM with 1 point slack: "
                  "FGSM %s, MI %s, M-DI2 %s",
                  show(f).c_str(), show(mi).c_str(), show(md).c_str())};
}

// ---------------------------------------------------------------- 9: faces

Outcome faces() {
  constexpr int kIds = 20, kPer = 40;
  std::vector<eval::Cell> cells;
  std::vector<std::string> victim_ids;
  for (auto seed : kSeeds) {
    Rng rng(seed, "face");
    face::IdentityDataConfig dcfg;
    dcfg.families = 5;
    const auto ids = face::build_toy_identity_dataset(kIds, kPer, rng, dcfg);
    const Dataset train = ids.data.split(Split::train);
    training::TrainConfig tc;
    tc.epochs = 15;
    tc.learning_rate = 0.05;
    tc.decay_epochs = {};
    std::vector<std::unique_ptr<Model>> models;
    auto make = [&](const char* arch, const std::string& role) {
      Rng init = Rng(seed, "face-init").fork(role);
      models.push_back(std::make_unique<Model>(make_model(arch, ids.data.shape(), kIds, init)));
      return models.back().get();
    };
    auto train_seed = [&](const std::string& role) { return Rng(seed, "face-train").fork(role).next_u64(); };
    auto classifier = [&](const char* arch, const std::string& role, face::MarginKind kind) {
      Model* m = make(arch, role);
      auto c = tc;
      c.seed = train_seed(role);
      face::train_face_classifier(*m, train, face::MarginLossConfig::defaults(kind), c);
      return m;
    };
    const Model* teacher = classifier("face_a", "teacher", face::MarginKind::plain_softmax);
    // both surrogates share initialization and batch order; only the labels differ
    const Model* normal = classifier("face_a", "surrogate", face::MarginKind::plain_softmax);
    Model* dsm = make("face_a", "surrogate");
    {
      auto c = tc;
      c.seed = train_seed("surrogate");
      c.label = labeling::LabelKind::dark;
      training::train_dsm(*dsm, teacher, train, c);
    }
    std::vector<face::FaceVictim> victims;
    const std::tuple<const char*, face::MarginKind> vz[] = {{"face_b", face::MarginKind::am_softmax},
                                                             {"face_c", face::MarginKind::aaml},
                                                             {"face_mlp", face::MarginKind::plain_softmax},
                                                             {"face_a", face::MarginKind::am_softmax}};
    for (const auto& [arch, kind] : vz) {
      const std::string id = std::string(arch) + "/" + face::to_string(kind);
      const Model* v = classifier(arch, id, kind);
      victims.push_back({id, v, face::calibrate_threshold(*v, ids.data, ids.protocol).tau});
      if (seed == kSeeds[0]) victim_ids.push_back(id);
    }
    const face::FaceSurrogate sur[] = {{"normal", {normal}}, {"dsm", {dsm}}};
    attacks::AttackConfig ac;
    ac.epsilon = 8.0 / 255;
    ac.iterations = 20;
    const std::uint64_t one[] = {seed};
    auto c = face::run_face_matrix(sur, victims, ids.data, ids.protocol, ac, one);
    cells.insert(cells.end(), c.begin(), c.end());
  }
  auto rate = [&](const std::string& sur, const std::string& vic, const std::string& obj) {
    std::vector<double> v;
    for (const auto& c : cells)
      if (c.surrogate == sur && c.victim == vic && c.objective == obj) v.push_back(100.0 * c.success_rate());
    return mean(v);
  };
  bool white = true;
  std::string detail = "white-box";
  for (const char* s : {"normal", "dsm"})
    for (const char* obj : {"embedding_dodge", "embedding_impersonate"}) {
      const double r = rate(s, eval::kWhiteBox, obj);
      white &= r >= 90.0;
      detail += fmt(" %s/%s %.1f", s, obj + 10, r);
    }
  detail += " (need >= 90); transfer gain dsm-normal dodge/impersonate:";
  int winning = 0;
  for (const auto& v : victim_ids) {
    const double gd = rate("dsm", v, "embedding_dodge") - rate("normal", v, "embedding_dodge");
    const double gi = rate("dsm", v, "embedding_impersonate") - rate("normal", v, "embedding_impersonate");
    winning += gd >= 3.0 && gi >= 3.0;
    detail += fmt(" %s %+.1f/%+.1f", v.c_str(), gd, gi);
  }
  detail += fmt(" (%d victims with both >= +3, need >= 2)", winning);
  return {white && winning >= 2, detail};
}

// ---------------------------------------------------------------- 10

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility() {
  using cli::Command;
  using cli::Json;
  const fs::path root = fs::temp_directory_path() / "dsm_acceptance_manifests";
  fs::remove_all(root);
  const Json toy = Json::parse(R"({"classes": 6, "groups": 3, "train_per_class": 20, "test_per_class": 10})");
  auto data = [&](const char* split) { return Json{{"source", "toy"}, {"split", split}, {"toy", toy}}; };
  auto dir = [&](const std::string& n) { return (root / n).string(); };
  auto ckpt = [&](const std::string& n) { return (root / n / "model.ckpt").string(); };

  const std::vector<std::pair<Command, Json>> runs{
      {Command::train, {{"seed", 4}, {"data", data("train")}, {"model", {{"arch", "conv_a"}}},
                        {"train", {{"epochs", 3}}}, {"out_dir", dir("teacher")}}},
      {Command::train, {{"seed", 5}, {"data", data("train")}, {"model", {{"arch", "mlp"}}},
                        {"train", {{"epochs", 2}, {"eps_r_255", 4}}}, {"out_dir", dir("victim")}}},
      {Command::distill, {{"seed", 6}, {"data", data("train")}, {"model", {{"arch", "conv_b"}}},
                          {"teacher", {{"checkpoint", ckpt("teacher")}}}, {"train", {{"epochs", 2}}},
                          {"out_dir", dir("student")}}},
      {Command::attack, {{"data", data("test")},
                         {"surrogates", {{{"id", "student"}, {"members", {{{"checkpoint", ckpt("student")}}}}}}},
                         {"attack", {{"objective", "targeted_logit"}, {"iterations", 5}}},
                         {"out_dir", dir("attack")}}},
      {Command::eval, {{"data", data("test")}, {"seeds", {1, 2}},
                       {"surrogates", {{{"id", "student"}, {"members", {{{"checkpoint", ckpt("student")}}}}},
                                       {{"id", "pair"}, {"members", {{{"checkpoint", ckpt("student")}},
                                                                     {{"checkpoint", ckpt("teacher")}}}}}}},
                       {"victims", {{{"id", "victim"}, {"checkpoint", ckpt("victim")}}}},
                       {"attacks", {{{"optimizer", "fgsm"}}, {{"optimizer", "mdi2_fgsm"}, {"epsilon_255", 8}}}},
                       {"out_dir", dir("eval")}}},
      {Command::sweep_alpha, {{"data", data("train")}, {"eval_data", data("test")}, {"model", {{"arch", "mlp"}}},
                              {"teacher", {{"checkpoint", ckpt("teacher")}}}, {"seeds", {1}},
                              {"victims", {{{"id", "victim"}, {"checkpoint", ckpt("victim")}}}},
                              {"train", {{"epochs", 1}}}, {"out_dir", dir("sweep")}}},
      {Command::face_train, {{"model", {{"arch", "face_mlp"}}}, {"face", {{"identities", 6}, {"per_identity", 8},
                                                                        {"loss", "am_softmax"}}},
                             {"train", {{"epochs", 2}}}, {"out_dir", dir("face")}}},
      {Command::face_attack, {{"face", {{"identities", 6}, {"per_identity", 8}}}, {"seeds", {1}},
                              {"surrogates", {{{"id", "s"}, {"members", {{{"checkpoint", ckpt("face")}}}}}}},
                              {"victims", {{{"id", "v"}, {"checkpoint", ckpt("face")}}}},
                              {"attack", {{"iterations", 3}}}, {"out_dir", dir("face_attack")}}},
      {Command::report, {{"report", {{"input", (root / "eval" / "report.csv").string()}, {"format", "json"}}},
                         {"out_dir", dir("report")}}},
  };
  int compared = 0;
  std::ostringstream chatter;  // the commands' progress lines
  struct Restore {
    std::streambuf* saved;
    ~Restore() { std::cout.rdbuf(saved); }
  } restore{std::cout.rdbuf(chatter.rdbuf())};
  try {
    for (const auto& [cmd, doc] : runs) cli::run_command(cmd, cli::resolve_config(cmd, doc));
    for (const auto& [cmd, doc] : runs) {
      const fs::path first = doc["out_dir"].get<std::string>();
      const fs::path again = first.string() + "_rerun";
      const Json manifest = cli::load_config_file(first / "manifest.json", cmd);
      const auto artifacts =
          cli::run_command(cmd, cli::resolve_config(cmd, manifest, {std::nullopt, again.string(), {}, {}}));
      for (const auto& a : artifacts) {
        if (slurp(first / a) != slurp(again / a))
          return {false, fmt("%s: %s differs after re-running its manifest", cli::to_string(cmd).c_str(),
                             a.string().c_str())};
        ++compared;
      }
    }
  } catch (const std::exception& e) {
    return {false, std::string("pipeline failed: ") + e.what()};
  }
  fs::remove_all(root);
  return {true, fmt("%zu commands re-run from their manifests, %d artifacts byte-identical", runs.size(), compared)};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "exact math", 60, exact_math},
      {2, "finite-difference gradients", 120, gradients},
      {3, "reductions", 120, reductions},
      {4, "dark knowledge beats one-hot", 1800, dark_knowledge},
      {5, "mixing helps only with dark labels", 2700, mixing},
      {6, "surrogate ensemble", 900, ensemble},
      {7, "CutMix alpha insensitivity", 3600, alpha_sweep},
      {8, "optimizer ordering", 1800, optimizers},
      {9, "face verification", 1800, faces},
      {10, "manifest reproducibility", 600, reproducibility},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failed = 0;
  double total = 0.0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.contains(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    total += secs;
    const bool in_time = secs <= c.limit_seconds;
    if (!in_time) o.detail += fmt("; over the %.0f s limit", c.limit_seconds);
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s criterion %d (%s) [%.1f s]: %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d failed, %.1f s total\n", failed, total);
  return failed ? 1 : 0;
}
