#include "cetn/selfcheck.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "cetn/losses.hpp"
#include "cetn/metrics.hpp"
#include "cetn/model.hpp"
#include "cetn/rng.hpp"

namespace cetn {

namespace {

Mat random_mat(Rng& rng, int r, int c, double lo = -2.0, double hi = 2.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

/// Dense reference for the denominator-only loss, straight from its ratio
/// definition: mean_i -log( exp(1/tau) / sum_j exp(cos(V'_i, V''_j)/tau) ).
double do_infonce_reference(const Mat& vp, const Mat& vpp, double tau) {
  const int b = static_cast<int>(vp.rows());
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    double denom = 0.0;
    for (int j = 0; j < b; ++j) {
      const double na = vp.row(i).norm(), nb = vpp.row(j).norm();
      const double sim = na < 1e-12 || nb < 1e-12 ? 0.0 : vp.row(i).dot(vpp.row(j)) / (na * nb);
      denom += std::exp(sim / tau);
    }
    total += -std::log(std::exp(1.0 / tau) / denom);
  }
  return total / b;
}

double pairwise_auc_reference(const std::vector<double>& s, const std::vector<uint8_t>& y) {
  double hits = 0.0;
  long long pairs = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      ++pairs;
      if (s[i] > s[j]) hits += 1.0;
      else if (s[i] == s[j]) hits += 0.5;
    }
  }
  return hits / static_cast<double>(pairs);
}

/// leaky_relu with its adjoint deliberately run at the wrong slope; the
/// finite-difference harness must flag it.
Var corrupted_leaky_relu(Var v) {
  Tape& t = *v.tape();
  const Mat& x = v.value();
  Mat y = (x.array() > 0).select(x, x * 0.01);
  const int vid = v.id();
  return t.emplace(std::move(y), v.shape(), "corrupted_leaky_relu",
                   [vid](Tape& tp, const Mat& g, const Mat&) {
                     const Mat& x = tp.value_of(vid);
                     tp.accumulate(vid, Mat((x.array() > 0).select(g, g * 0.02)));
                   });
}

struct Runner {
  SelfCheckReport& report;
  std::ostream* out;

  void add(const std::string& name, bool ok, double worst, const std::string& detail = "") {
    report.checks.push_back({name, ok, worst, detail});
    report.ok = report.ok && ok;
    if (out) {
      (*out) << (ok ? "pass" : "FAIL") << "  " << name;
      if (worst > 0.0) (*out) << "  (worst " << worst << ")";
      if (!detail.empty()) (*out) << "  " << detail;
      (*out) << '\n';
    }
  }
};

void check_op_gradients(Runner& r) {
  Rng rng(0x0bf1c5);
  using Case = std::pair<const char*, GraphBuilder>;
  const std::vector<Case> cases = {
      {"matmul", [](Tape& t, const std::vector<Var>& p) { return sum(matmul(p[0], p[1])); }},
      {"matmul_nt", [](Tape& t, const std::vector<Var>& p) { return sum(matmul(p[0], p[2], false, true)); }},
      {"matmul_tn", [](Tape& t, const std::vector<Var>& p) { return sum(matmul(p[0], p[2], true, false)); }},
      {"add", [](Tape& t, const std::vector<Var>& p) { return sum(mul(add(p[0], p[2]), p[0])); }},
      {"sub", [](Tape& t, const std::vector<Var>& p) { return sum(mul(sub(p[0], p[2]), p[2])); }},
      {"mul", [](Tape& t, const std::vector<Var>& p) { return sum(mul(p[0], p[2])); }},
      {"div", [](Tape& t, const std::vector<Var>& p) { return sum(div(p[0], p[6])); }},
      {"scalar_broadcast", [](Tape& t, const std::vector<Var>& p) {
         return sum(add(mul(p[0], p[3]), div(p[3], p[6])));
       }},
      {"leaky_relu", [](Tape& t, const std::vector<Var>& p) { return sum(leaky_relu(p[0])); }},
      {"relu", [](Tape& t, const std::vector<Var>& p) { return sum(mul(relu(p[0]), p[2])); }},
      {"tanh", [](Tape& t, const std::vector<Var>& p) { return sum(tanh(p[0])); }},
      {"sigmoid", [](Tape& t, const std::vector<Var>& p) { return sum(sigmoid(p[0])); }},
      {"log", [](Tape& t, const std::vector<Var>& p) { return sum(log(p[6])); }},
      {"exp", [](Tape& t, const std::vector<Var>& p) { return sum(exp(p[0])); }},
      {"sqrt", [](Tape& t, const std::vector<Var>& p) { return sum(sqrt(p[6])); }},
      {"scale_offset", [](Tape& t, const std::vector<Var>& p) {
         return sum(offset(scale(p[0], -1.7), 0.3));
       }},
      {"reduce_rows", [](Tape& t, const std::vector<Var>& p) { return sum(mul(sum(p[0], 0), p[4])); }},
      {"reduce_cols", [](Tape& t, const std::vector<Var>& p) { return sum(mean(p[0], 1)); }},
      {"concat", [](Tape& t, const std::vector<Var>& p) {
         return sum(mul(concat({p[0], p[2]}, 1), concat({p[2], p[0]}, 1)));
       }},
      {"add_rowvec", [](Tape& t, const std::vector<Var>& p) {
         return sum(mul(add_rowvec(p[0], p[4]), p[2]));
       }},
      {"sub_colvec", [](Tape& t, const std::vector<Var>& p) {
         return sum(mul(sub_colvec(p[0], p[5]), p[2]));
       }},
      {"div_colvec", [](Tape& t, const std::vector<Var>& p) {
         return sum(mul(div_colvec(p[0], p[5]), p[2]));
       }},
      {"logsumexp_rows", [](Tape& t, const std::vector<Var>& p) {
         return sum(logsumexp_rows(p[0]));
       }},
      {"lookup", [](Tape& t, const std::vector<Var>& p) {
         Batch b;
         b.fields = 1;
         b.batch_size = 4;
         b.indices = {0, 1, 0, 1};
         b.labels.assign(4, 0);
         Var e = lookup(std::vector<Var>{p[1]}, b, static_cast<int>(p[1].value().cols()));
         return sum(mul(e, e));
       }},
      {"pairwise_ep", [](Tape& t, const std::vector<Var>& p) {
         Var e = concat({p[0], p[2]}, 1);
         return sum(mul(pairwise_ep(e, 2, static_cast<int>(p[0].value().cols())),
                        pairwise_ep(e, 2, static_cast<int>(p[0].value().cols()))));
       }},
      {"pairwise_ip", [](Tape& t, const std::vector<Var>& p) {
         Var e = concat({p[0], p[2]}, 1);
         Var ip = pairwise_ip(e, 2, static_cast<int>(p[0].value().cols()));
         return sum(mul(ip, ip));
       }},
  };

  double worst = 0.0;
  const char* worst_op = "";
  int checks = 0;
  bool ok = true;
  for (int sweep = 0; sweep < 5; ++sweep) {
    const int m = 2 + static_cast<int>(rng.below(3));
    const int k = 2 + static_cast<int>(rng.below(3));
    const int n = 2 + static_cast<int>(rng.below(3));
    const std::vector<Mat> params = {
        random_mat(rng, m, k),           random_mat(rng, k, n),
        random_mat(rng, m, k),           random_mat(rng, 1, 1, 0.5, 2.0),
        random_mat(rng, 1, k),           random_mat(rng, m, 1, 0.5, 2.0),
        random_mat(rng, m, k, 0.1, 2.0),
    };
    const std::vector<std::string> names = {"A", "B", "C", "s", "rv", "cv", "pos"};
    for (const auto& [op, builder] : cases) {
      auto rep = grad_check(builder, params, names, 1e-6, 1e-4);
      if (rep.worst > worst) {
        worst = rep.worst;
        worst_op = op;
      }
      ok = ok && rep.ok;
      ++checks;
    }
  }
  r.add("op gradients vs central differences (" + std::to_string(checks) + " randomized checks)",
        ok, worst, std::string("worst op: ") + worst_op);
}

void check_reference_gradients(Runner& r) {
  {
    Mat x(1, 1);
    x << 1.5;
    auto rep = grad_check(
        [](Tape& t, const std::vector<Var>& p) { return mul(p[0], p[0]); }, {x}, {"x"},
        1e-6, 1e-8);
    r.add("quadratic gradient", rep.ok, rep.worst);
  }
  {
    Rng rng(0x100);
    Mat z = random_mat(rng, 1, 1, -1.5, 1.5);
    std::vector<uint8_t> y = {1};
    auto rep = grad_check(
        [&y](Tape& t, const std::vector<Var>& p) { return logloss_op(sigmoid(p[0]), y); },
        {z}, {"logit"}, 1e-6, 1e-6);
    r.add("logloss head gradient", rep.ok, rep.worst);
  }
  {
    Rng rng(0x200);
    Mat vp = random_mat(rng, 3, 5), vpp = random_mat(rng, 3, 5);
    auto rep = grad_check(
        [](Tape& t, const std::vector<Var>& p) { return do_infonce(p[0], p[1], 0.2); },
        {vp, vpp}, {"vp", "vpp"}, 1e-6, 1e-5);
    r.add("do-infonce gradient (batch of 3)", rep.ok, rep.worst);
  }
  {
    // negative control: a corrupted adjoint must be caught
    Rng rng(0x300);
    Mat x = random_mat(rng, 3, 3);
    auto rep = grad_check(
        [](Tape& t, const std::vector<Var>& p) { return sum(corrupted_leaky_relu(p[0])); },
        {x}, {"x"}, 1e-6, 1e-4);
    r.add("corrupted slope is detected (negative control)", !rep.ok, rep.worst);
  }
}

void check_full_model_gradient(Runner& r) {
  ModelConfig cfg;
  cfg.embedding_dim = 3;
  cfg.value_dim = 4;
  cfg.hidden_dims = {6, 5};
  Model m(cfg, {"f0", "f1", "f2"}, {4, 3, 5}, 20240809);

  Batch b;
  b.fields = 3;
  b.batch_size = 4;
  b.indices = {0, 1, 2, 3, 2, 4, 1, 0, 3, 2, 1, 0};
  b.labels = {1, 0, 1, 0};

  LossWeights w;
  w.alpha = 0.25;
  w.beta_ep = 0.3;
  w.beta_ip = 0.15;

  Rng noise_rng(77);
  const auto noise = m.draw_noise(&noise_rng);
  std::vector<Mat> values;
  std::vector<std::string> names;
  for (size_t i = 0; i < m.params().size(); ++i) {
    values.push_back(m.params().at(static_cast<int>(i)).value);
    names.push_back(m.params().at(static_cast<int>(i)).name);
  }
  auto rep = grad_check(
      [&](Tape& t, const std::vector<Var>& leaves) {
        return total_loss(m.forward_from_leaves(t, leaves, b, noise), b.labels, w,
                          m.config())
            .total;
      },
      values, names, 1e-6, 1e-4);
  std::string worst_name;
  for (const auto& e : rep.entries) {
    if (e.max_rel_err == rep.worst) worst_name = e.name;
  }
  r.add("full model loss gradient on a 4-instance batch (" +
            std::to_string(m.param_count_actual()) + " parameters)",
        rep.ok, rep.worst, "worst: " + worst_name);
}

void check_loss_identities(Runner& r) {
  Rng rng(0x400);
  double worst_ratio = 0.0, worst_diff = 0.0, worst_decomp = 0.0;
  bool ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const int b = 2 + static_cast<int>(rng.below(15));
    const int d = 2 + static_cast<int>(rng.below(30));
    const double tau = 0.1 + 0.9 * rng.uniform();
    Mat vp = random_mat(rng, b, d), vpp = random_mat(rng, b, d);
    Tape t;
    const double ours = do_infonce(t.leaf(vp), t.leaf(vpp), tau).value()(0, 0);
    const double ref = do_infonce_reference(vp, vpp, tau);
    worst_ratio = std::max(worst_ratio, std::abs(ours - ref));

    const double info = infonce(t.leaf(vp), t.leaf(vpp), tau).value()(0, 0);
    double mean_diag = 0.0;
    for (int i = 0; i < b; ++i) {
      mean_diag += vp.row(i).dot(vpp.row(i)) / (vp.row(i).norm() * vpp.row(i).norm());
    }
    mean_diag /= b;
    worst_diff = std::max(worst_diff, std::abs((ours - info) - (mean_diag - 1.0) / tau));
  }
  ok = worst_ratio < 1e-10 && worst_diff < 1e-10;
  r.add("do-infonce ratio form == stabilized form (100 batches)", worst_ratio < 1e-10,
        worst_ratio);
  r.add("do-infonce - infonce difference identity", worst_diff < 1e-10, worst_diff);

  ModelConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    const int b = 3 + static_cast<int>(rng.below(6));
    Tape t;
    ForwardResult fwd;
    fwd.logit = t.leaf(random_mat(rng, b, 1));
    fwd.prob = sigmoid(fwd.logit);
    for (int s = 0; s < 3; ++s) {
      fwd.space_v[s] = t.leaf(random_mat(rng, b, 4));
      fwd.space_v_pre[s] = fwd.space_v[s];
    }
    std::vector<uint8_t> y;
    for (int i = 0; i < b; ++i) y.push_back(static_cast<uint8_t>(rng.below(2)));
    LossWeights w;
    w.alpha = rng.uniform(0, 0.5);
    w.beta_ep = rng.uniform(0, 0.8);
    w.beta_ip = rng.uniform(0, 0.8);
    LossBreakdown out = total_loss(fwd, y, w, cfg);
    const double recon = out.ctr_v + w.alpha * out.cl_v + w.beta_ep * out.cos_ep_v +
                         w.beta_ip * out.cos_ip_v;
    worst_decomp = std::max(worst_decomp, std::abs(out.total_v - recon));
  }
  r.add("total loss decomposition identity", worst_decomp < 1e-12, worst_decomp);
  (void)ok;
}

void check_product_identities(Runner& r) {
  Rng rng(0x500);
  double worst = 0.0;
  bool count_ok = true;
  for (int trial = 0; trial < 30; ++trial) {
    const int f = 2 + static_cast<int>(rng.below(7));
    const int d = 1 + static_cast<int>(rng.below(8));
    const int b = 1 + static_cast<int>(rng.below(6));
    count_ok = count_ok &&
               product_pairs(f).size() == static_cast<size_t>(f) * (f + 1) / 2;
    Mat e = random_mat(rng, b, f * d);
    Tape t;
    Var ev = t.leaf(e);
    Mat ep = pairwise_ep(ev, f, d).value();
    Mat ip = pairwise_ip(ev, f, d).value();
    for (int p = 0; p < static_cast<int>(product_pairs(f).size()); ++p) {
      for (int row = 0; row < b; ++row) {
        worst = std::max(worst, std::abs(ep.block(row, p * d, 1, d).sum() - ip(row, p)));
      }
    }
  }
  r.add("hadamard block sums equal inner products", worst < 1e-12, worst);
  r.add("pair count is f(f+1)/2", count_ok, 0.0);

  bool bounds_ok = true;
  for (int trial = 0; trial < 30; ++trial) {
    Mat e = random_mat(rng, 4, 12);
    Mat delta = draw_perturbation(rng, 4, 3, trial % 2 == 0);
    Tape t;
    Var p = perturb(t.leaf(e), delta);
    Mat diff = p.value() - e;
    bounds_ok = bounds_ok && diff.cwiseAbs().maxCoeff() < 1.0 &&
                ((diff.array() * e.array()) >= 0.0).all();
  }
  r.add("perturbation bound and sign consistency", bounds_ok, 0.0);
}

void check_auc_oracle(Runner& r) {
  Rng rng(0x600);
  double worst = 0.0;
  for (int trial = 0; trial < 8; ++trial) {
    const size_t n = 100 + rng.below(1901);
    const int levels = trial < 4 ? 3 : 50;  // heavy ties in half the trials
    std::vector<double> s(n);
    std::vector<uint8_t> y(n);
    for (size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(levels)) / levels;
      y[i] = rng.uniform() < 0.35;
    }
    y[0] = 1;
    y[1] = 0;
    worst = std::max(worst, std::abs(auc(s, y) - pairwise_auc_reference(s, y)));
  }
  r.add("rank AUC equals pairwise oracle (to 2000 rows, heavy ties)", worst < 1e-12, worst);
}

}  // namespace

SelfCheckReport run_selfcheck(std::ostream* out) {
  SelfCheckReport report;
  const auto t0 = std::chrono::steady_clock::now();
  Runner r{report, out};

  check_op_gradients(r);
  check_reference_gradients(r);
  check_full_model_gradient(r);
  check_loss_identities(r);
  check_product_identities(r);
  check_auc_oracle(r);

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (out) {
    (*out) << (report.ok ? "all checks passed" : "CHECKS FAILED") << " in "
           << report.seconds << " s\n";
  }
  return report;
}

}  // namespace cetn
