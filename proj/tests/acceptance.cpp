// Acceptance runner: prints one PASS/FAIL line per criterion. The exit code is
// non-zero when a criterion could not be evaluated, and with --strict also when
// any criterion fails.
//
//   acceptance [--work DIR] [--only 1,2,...] [--strict]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "warp/cli/commands.hpp"
#include "warp/dynamics/generators.hpp"
#include "warp/evalkit/diagnostics.hpp"
#include "warp/evalkit/metrics.hpp"
#include "warp/gradengine/fdcheck.hpp"
#include "warp/trainer/losses.hpp"
#include "warp/trainer/train.hpp"
#include "warp/warpcell/scan.hpp"

using namespace warp;
using namespace warp::testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string sci(double v, int digits = 4) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Property criteria

Outcome mode_equivalence() {
  RngStream rng(101, 0);
  double worst = 0.0;
  std::size_t models = 0;
  while (models < 50) {
    const std::size_t d_x = 1 + rng.below(4);
    const std::size_t width = 1 + rng.below(4), depth = 1 + rng.below(3);
    const auto init = rng.below(2) ? warpcell::InitMode::hypernet : warpcell::InitMode::direct;
    warpcell::WarpModel m(small_spec(d_x, 1 + rng.below(2), width, depth, init), rng.next_u64());
    if (m.d_theta() > 32) continue;
    randomize(m, rng.next_u64());
    const std::size_t steps = 2 + rng.below(63);
    const Matrix x = random_inputs(rng, steps, d_x, rng.uniform(0.5, 2.0));
    const auto conv = warpcell::conv_forward(m, x).states;
    const auto rec = warpcell::scan_recurrent(m, x, {}).states;
    for (std::size_t i = 0; i < conv.size(); ++i) worst = std::max(worst, std::abs(conv.flat()[i] - rec.flat()[i]));
    ++models;
  }
  return {worst <= 1e-8, "max |conv - recurrent| = " + sci(worst) + " over 50 models"};
}

dynamics::Dataset tiny_data(dynamics::System sys, std::uint64_t seed) {
  dynamics::GenSpec g;
  g.system = sys;
  g.n_train = 4;
  g.n_test = 2;
  g.steps = 8;
  g.context = sys == dynamics::System::spirals ? 8 : 1;
  g.seed = seed;
  return dynamics::generate(g).train;
}

Outcome gradient_fidelity() {
  using rootnet::OutputKind;
  using trainer::LossKind;
  using trainer::TrainMode;
  struct Combo {
    OutputKind head;
    LossKind loss;
    dynamics::System sys;
  };
  const std::vector<Combo> combos{
      {OutputKind::point, LossKind::mse, dynamics::System::msd},
      {OutputKind::gaussian, LossKind::nll, dynamics::System::lv},
      {OutputKind::point, LossKind::cce, dynamics::System::spirals},
      {OutputKind::sine_phase, LossKind::mse, dynamics::System::sine},
      {OutputKind::msd_expm, LossKind::mse, dynamics::System::msd},
  };
  RngStream rng(202, 0);
  double worst = 0.0;
  std::set<std::string> seen;
  for (std::size_t k = 0; k < 20; ++k) {
    const Combo& c = combos[k % combos.size()];
    const bool cls = c.loss == LossKind::cce;
    const auto data = tiny_data(c.sys, k);
    const auto init = (k / combos.size()) % 2 ? warpcell::InitMode::hypernet : warpcell::InitMode::direct;
    warpcell::ModelSpec s = small_spec(data.d_x, data.d_y, 2 + rng.below(2), 1 + rng.below(2), init);
    s.head.output = c.head;
    s.root.out_dim = rootnet::head_arity(c.head, data.d_y);
    if (!cls && k % 3 == 0) s.head.squash = rootnet::Squash::dynamic_tanh;
    warpcell::WarpModel m(s, k);
    randomize(m, 500 + k);
    trainer::TrainConfig cfg;
    cfg.loss = c.loss;
    cfg.seed = k;
    if (!cls) {
      const std::size_t mode = rng.below(3);
      cfg.mode = mode == 0 ? TrainMode::recurrent_non_ar : mode == 1 ? TrainMode::recurrent_ar
                                                                     : TrainMode::convolutional;
      cfg.p_forcing = 0.5;
    }
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const auto br = trainer::batch_loss(m, data, idx, cfg, 1, true);
    const auto rep = grad::finite_diff_check(
        [&] { return trainer::batch_loss(m, data, idx, cfg, 1, false).loss; }, m.params(), br.grads);
    if (rep.checked + rep.kinks != m.params().scalar_count()) return {false, "coordinate count mismatch"};
    worst = std::max(worst, rep.max_rel_error);
    seen.insert(std::string(to_string(c.head)) + "/" + std::string(trainer::to_string(c.loss)) + "/" +
                std::string(warpcell::to_string(init)));
  }
  return {worst <= 1e-4, "max relative error " + sci(worst) + " over 20 losses, " + std::to_string(seen.size()) +
                             " head/loss/init combinations"};
}

Outcome fixed_point() {
  RngStream rng(303, 0);
  double worst = 0.0;
  for (auto init : {warpcell::InitMode::direct, warpcell::InitMode::hypernet})
    for (int k = 0; k < 5; ++k) {
      warpcell::WarpModel m(small_spec(2, 2, 8, 2, init), rng.next_u64());
      const auto r = warpcell::scan_recurrent(m, random_inputs(rng, 50, 2, 10.0), {});
      for (double v : evalkit::successive_norms(r.states)) worst = std::max(worst, v);
    }
  return {worst == 0.0, "max successive-difference norm " + sci(worst) + " over 10 fresh models"};
}

Outcome repeat_copy_structure() {
  using namespace dynamics;
  std::size_t checks = 0, failures = 0;
  auto expect = [&](bool ok) {
    ++checks;
    failures += !ok;
  };
  const auto lv = gen_lv(20, Split::train, 256, 7);
  for (const auto& seq : lv.seqs) {
    Matrix in(256, 2);
    for (std::size_t k = 0; k < 256; ++k)
      for (std::size_t j = 0; j < 2; ++j) in(k, j) = seq(k, j);
    const Matrix t = repeat_copy_lv(in);
    const std::size_t seg = kCopySegment + kCopyDelimiter;
    for (std::size_t k = 0; k < 256; ++k) {
      const bool value = k < 3 * seg - kCopyDelimiter && k % seg < kCopySegment;
      for (std::size_t j = 0; j < 2; ++j) expect(value ? t(k, j) == in(k % seg, j) : t(k, j) == kCopyFill);
    }
  }
  const auto sp = gen_spirals(500, 9);
  for (std::size_t i = 0; i < sp.seqs.size(); ++i) expect((signed_area(sp.seqs[i]) > 0.0) == (sp.labels[i] == 1));
  return {failures == 0, std::to_string(checks - failures) + " of " + std::to_string(checks) + " generator checks hold"};
}

Outcome metric_analytics() {
  const Matrix y{{0.3, -1.2}, {2.0, 0.0}};
  const double b = evalkit::bpd(y, y, Matrix(2, 2, 1.0));
  const double c = trainer::loss_cce(0, numkit::Vector{0.0, 0.0});
  const double m = evalkit::mape(Matrix{{2.0}}, Matrix{{1.0}}).value;
  const bool ok = std::abs(b - 1.325748) <= 1e-6 && std::abs(c - std::numbers::ln2) <= 1e-12 && m == 50.0;
  return {ok, "bpd " + sci(b, 10) + ", uniform cce " + sci(c, 15) + ", mape " + sci(m, 10)};
}

// ---------------------------------------------------------------------------
// Desk-scale runs

struct RunResult {
  bool ok = false;
  std::string error;
  double seconds = 0.0;
  std::map<std::string, double> metrics;
  std::string loss_csv, eval_csv;
  bool finite_losses = true;
};

RunResult run_preset(const std::string& preset, const fs::path& dir) {
  RunResult r;
  cli::CommandOptions o;
  o.preset = preset;
  o.out = dir;
  o.force = true;
  const auto t0 = Clock::now();
  std::ostringstream log, err;
  for (const char* cmd : {"generate", "train", "eval"}) {
    if (cli::run_command(cmd, o, log, err) != cli::kOk) {
      r.error = preset + " " + cmd + ": " + err.str();
      while (!r.error.empty() && r.error.back() == '\n') r.error.pop_back();
      return r;
    }
  }
  r.seconds = seconds_since(t0);
  const cli::ExperimentPaths p{dir};
  r.loss_csv = slurp(p.loss_csv());
  r.eval_csv = slurp(p.eval_csv());
  const auto losses = read_csv(p.loss_csv());
  for (std::size_t i = 1; i < losses.size(); ++i) r.finite_losses &= std::isfinite(std::stod(losses[i][1]));
  const auto table = read_csv(p.eval_csv());
  for (const auto& row : table)
    if (!row.empty() && row[0] == "ALL")
      for (std::size_t k = 1; k < row.size(); ++k) r.metrics[table[0][k]] = row[k] == "NA" ? NAN : std::stod(row[k]);
  r.ok = true;
  return r;
}

class DeskRuns {
 public:
  explicit DeskRuns(fs::path root) : root_(std::move(root)) {}

  const RunResult& get(const std::string& preset, const std::string& pass = "first") {
    const std::string key = pass + "/" + preset;
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      std::cout << "  running " << preset << " (" << pass << " pass)" << std::endl;
      it = cache_.emplace(key, run_preset(preset, root_ / pass / preset)).first;
    }
    return it->second;
  }

  fs::path dir(const std::string& preset, const std::string& pass = "first") const { return root_ / pass / preset; }

 private:
  fs::path root_;
  std::map<std::string, RunResult> cache_;
};

std::string failed_run(const RunResult& a, const RunResult& b) { return !a.ok ? a.error : b.error; }

Outcome sine_run(DeskRuns& runs) {
  const auto& w = runs.get("desk-sine");
  const auto& p = runs.get("desk-sine-phys");
  if (!w.ok || !p.ok) return {false, failed_run(w, p)};
  const double mw = w.metrics.at("mse"), mp = p.metrics.at("mse");
  const bool ok = mw <= 5e-3 && mp < mw && w.seconds <= 1800 && p.seconds <= 1800 && w.finite_losses &&
                  p.finite_losses;
  return {ok, "test MSE WARP " + sci(mw) + " (reference 2.77e-4, ratio " + sci(mw / 2.77e-4) + "), WARP-Phys " +
                  sci(mp) + " (reference 0.62e-4, ratio " + sci(mp / 0.62e-4) + "); train+eval " +
                  sci(w.seconds) + " s and " + sci(p.seconds) + " s"};
}

Outcome msd_run(DeskRuns& runs) {
  const auto& w = runs.get("desk-msd");
  const auto& p = runs.get("desk-msd-phys");
  if (!w.ok || !p.ok) return {false, failed_run(w, p)};
  const double mw = w.metrics.at("mse"), mp = p.metrics.at("mse");
  const bool ok = mw <= 5e-2 && mp <= 0.5 * mw && w.seconds + p.seconds <= 7200 && w.finite_losses &&
                  p.finite_losses;
  return {ok, "forecast-window MSE WARP " + sci(mw) + " (reference 0.94e-2), WARP-Phys " + sci(mp) +
                  " (reference 0.03e-2), ratio " + sci(mp / mw) + "; " + sci(w.seconds + p.seconds) + " s"};
}

Outcome spirals_run(DeskRuns& runs) {
  const auto& r = runs.get("desk-spirals");
  if (!r.ok) return {false, r.error};
  const double acc = r.metrics.at("accuracy");
  return {acc >= 0.97 && r.seconds <= 1800 && r.finite_losses,
          "test accuracy " + sci(100.0 * acc) + "% (reference 99.96%); " + sci(r.seconds) + " s"};
}

Outcome theta_tau(DeskRuns& runs) {
  const auto& w = runs.get("desk-msd");
  if (!w.ok) return {false, w.error};
  cli::CommandOptions o;
  o.preset = "desk-msd";
  o.out = runs.dir("desk-msd");
  std::ostringstream log, err;
  if (cli::run_command("analyze", o, log, err) != cli::kOk) return {false, "analyze: " + err.str()};
  const auto table = read_csv(cli::ExperimentPaths{*o.out}.analysis() / "theta_tau.csv");
  std::size_t strong = 0, total = 0;
  for (std::size_t i = 1; i < table.size(); ++i, ++total) strong += std::abs(std::stod(table[i][1])) >= 0.5;
  const double frac = total ? double(strong) / double(total) : 0.0;
  return {frac >= 0.25, std::to_string(strong) + " of " + std::to_string(total) + " coordinates (" +
                            sci(100.0 * frac) + "%) have |r| >= 0.5"};
}

Outcome determinism(DeskRuns& runs) {
  std::size_t same = 0, total = 0;
  std::string diverging;
  for (const char* preset : {"desk-sine", "desk-sine-phys", "desk-msd", "desk-msd-phys", "desk-spirals"}) {
    const auto& a = runs.get(preset);
    const auto& b = runs.get(preset, "rerun");
    if (!a.ok || !b.ok) return {false, failed_run(a, b)};
    ++total;
    if (a.loss_csv == b.loss_csv && a.eval_csv == b.eval_csv &&
        slurp(cli::ExperimentPaths{runs.dir(preset)}.last_checkpoint()) ==
            slurp(cli::ExperimentPaths{runs.dir(preset, "rerun")}.last_checkpoint()))
      ++same;
    else
      diverging += std::string(diverging.empty() ? "" : ", ") + preset;
  }
  std::string detail = std::to_string(same) + " of " + std::to_string(total) +
                       " runs reproduce loss traces, metrics and checkpoints byte for byte";
  if (!diverging.empty()) detail += " (differs: " + diverging + ")";
  return {same == total, detail};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = "acceptance_runs";
  std::set<int> only;
  bool strict = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::istringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else if (a == "--strict") {
      strict = true;
    } else {
      std::cerr << "usage: acceptance [--work DIR] [--only 1,2,...] [--strict]\n";
      return 2;
    }
  }

  DeskRuns runs(work);
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "mode equivalence", 10, mode_equivalence},
      {2, "gradient fidelity", 60, gradient_fidelity},
      {3, "initialization fixed point", 1, fixed_point},
      {4, "SINE small desk run", 0, [&] { return sine_run(runs); }},
      {5, "MSD desk run", 0, [&] { return msd_run(runs); }},
      {6, "spirals classification", 0, [&] { return spirals_run(runs); }},
      {7, "repeat-copy and spirals structure", 0, repeat_copy_structure},
      {8, "metric analytics", 0, metric_analytics},
      {9, "theta-tau correlation", 0, [&] { return theta_tau(runs); }},
      {10, "determinism", 0, [&] { return determinism(runs); }},
  };

  int failed = 0, errors = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
      ++errors;
    }
    const double s = seconds_since(t0);
    if (c.budget_s > 0 && s >= c.budget_s) {
      o.pass = false;
      o.detail += "; over the " + sci(c.budget_s) + " s budget";
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ": " << o.detail << " [" << sci(s)
              << " s]" << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria passed"))
            << std::endl;
  return errors || (strict && failed) ? 1 : 0;
}
