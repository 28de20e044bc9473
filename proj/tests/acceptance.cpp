// Acceptance runner: prints one PASS/FAIL line per criterion and writes
// acceptance_summary.json under the work directory.

#include "sticker/checkpoint.hpp"
#include "sticker/cli.hpp"
#include "sticker/lor.hpp"
#include "sticker/metrics.hpp"
#include "sticker/model.hpp"
#include "sticker/objective.hpp"
#include "sticker/synth.hpp"
#include "sticker/tagset.hpp"
#include "sticker/trainer.hpp"

#include "oracles.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace sticker;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

void require(Outcome& o, bool cond, const std::string& what) {
  if (!cond && o.pass) {
    o.pass = false;
    o.detail = what;
  }
}

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "sticker");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out != nullptr) *out = o.str();
  if (code != 0) std::cerr << e.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> read_jsonl(const fs::path& p) {
  std::ifstream in(p);
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

Eigen::MatrixXd random_probs(int n, int m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd p(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) p(i, j) = u(rng);
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

std::vector<std::vector<int>> random_truths(int n, int m, std::mt19937_64& rng) {
  std::vector<std::vector<int>> t(static_cast<std::size_t>(n));
  for (auto& s : t) {
    for (int j = 0; j < m; ++j) {
      if (rng() % 4 == 0) s.push_back(j);
    }
    if (s.empty()) s.push_back(static_cast<int>(rng() % m));
  }
  return t;
}

double max_diff(const metrics::MetricValues& a, const oracle::Metrics& b) {
  return std::max({std::abs(a.cp - b.cp), std::abs(a.cr - b.cr), std::abs(a.cf1 - b.cf1), std::abs(a.op - b.op),
                   std::abs(a.orc - b.orc), std::abs(a.of1 - b.of1)});
}

double max_diff(const metrics::MetricValues& a, const metrics::MetricValues& b) {
  return std::max({std::abs(a.cp - b.cp), std::abs(a.cr - b.cr), std::abs(a.cf1 - b.cf1), std::abs(a.op - b.op),
                   std::abs(a.orc - b.orc), std::abs(a.of1 - b.of1)});
}

// ---- 1 --------------------------------------------------------------------

Outcome metrics_oracle() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const auto p = random_probs(20, 8, rng);
    const auto y = random_truths(20, 8, rng);
    for (int k : {1, 3, 5}) {
      const auto counts = metrics::confusion_counts(metrics::select_topk(p, k), y, 8);
      worst = std::max(worst, max_diff(metrics::aggregate(counts), oracle::metrics(p, y, k, 0)));
    }
    const auto counts = metrics::confusion_counts(metrics::select_threshold(p, 0.5), y, 8);
    worst = std::max(worst, max_diff(metrics::aggregate(counts), oracle::metrics(p, y, 0, 0.5)));
  }
  const double secs = seconds_since(start);
  require(o, worst <= 1e-9, "max deviation " + std::to_string(worst));
  require(o, secs < 10.0, "runtime " + std::to_string(secs) + " s");
  std::ostringstream d;
  d << "200 instances, max |diff| " << worst << ", " << std::fixed << std::setprecision(2) << secs << " s";
  if (o.pass) o.detail = d.str();
  return o;
}

// ---- 2 --------------------------------------------------------------------

Outcome loss_correctness() {
  Outcome o;
  std::mt19937_64 rng(202);
  std::normal_distribution<double> g(0, 2);
  double worst = 0, worst_ce = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const int m = 2 + static_cast<int>(rng() % 10);
    Eigen::MatrixXd x(n, m);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    const auto y = random_truths(n, m, rng);
    const double v = objective::main_loss(ag::constant<double>(x), y).scalar();
    worst = std::max(worst, std::abs(v - oracle::main_loss(x, y)));
    std::vector<int> single;
    std::vector<std::vector<int>> wrapped;
    for (int i = 0; i < n; ++i) {
      single.push_back(static_cast<int>(rng() % m));
      wrapped.push_back({single.back()});
    }
    const double ce = objective::main_loss(ag::constant<double>(x), wrapped).scalar();
    worst_ce = std::max(worst_ce, std::abs(ce - oracle::cross_entropy(x, single)));
  }
  const Eigen::MatrixXd u = Eigen::MatrixXd::Zero(1, 4);
  const double one = objective::main_loss(ag::constant<double>(u), {{1}}).scalar();
  const double two = objective::main_loss(ag::constant<double>(u), {{0, 2}}).scalar();
  require(o, worst <= 1e-7, "oracle deviation " + std::to_string(worst));
  require(o, worst_ce <= 1e-7, "cross-entropy deviation " + std::to_string(worst_ce));
  require(o, std::abs(one - std::log(4.0)) <= 1e-6, "ln 4 case gave " + std::to_string(one));
  require(o, std::abs(two - 2 * std::log(4.0)) <= 1e-6, "2 ln 4 case gave " + std::to_string(two));
  std::ostringstream d;
  d << "100 batches, max |diff| " << worst << ", CE max |diff| " << worst_ce << ", ln4 " << std::setprecision(10)
    << one << ", 2ln4 " << two;
  if (o.pass) o.detail = d.str();
  return o;
}

// ---- 3 --------------------------------------------------------------------

Outcome gradient_check() {
  Outcome o;
  const auto cfg = oracle::tiny_config();
  Model<double> model(cfg);
  const auto batch = oracle::tiny_batch(cfg, 2, 303);
  const auto check = oracle::check_gradients(
      model.parameters(),
      [&] {
        const auto out = model.forward_dual(batch, 17);
        return objective::total_loss(out.logits_reconstructed, out.logits_original, batch.labels).total;
      },
      1e-5);
  double worst = 0;
  std::string worst_name;
  for (const auto& [name, err] : check.relative_error) {
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
  }
  require(o, worst <= 1e-3, "relative error " + std::to_string(worst) + " on " + worst_name);
  for (const char* name : {"lor.mask_token", "lor.pixel_head.weight", "prompt.proj.0.weight", "prompt.proj.1.weight",
                           "prompt.proj.2.weight", "prompt.proj.3.weight"}) {
    require(o, check.analytic_norm.at(name) > 0.0, std::string("zero gradient on ") + name);
  }
  std::ostringstream d;
  d << check.relative_error.size() << " groups, worst relative error " << worst << " (" << worst_name
    << "), |grad mask_token| " << check.analytic_norm.at("lor.mask_token");
  if (o.pass) o.detail = d.str();
  return o;
}

// ---- 4 --------------------------------------------------------------------

Outcome lor_invariants() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 1000 && o.pass; ++t) {
    const int n = 1 + static_cast<int>(rng() % 64);
    double ratio = u(rng);
    while (ratio <= 0.0 || ratio >= 1.0) ratio = u(rng);
    const std::uint64_t seed = rng();
    const auto plan = lor::sample_mask_rounds(n, ratio, seed);
    std::set<int> covered;
    for (const auto& r : plan.rounds) covered.insert(r.begin(), r.end());
    require(o, static_cast<int>(covered.size()) == n, "incomplete coverage at draw " + std::to_string(t));

    const int dim = 3 + static_cast<int>(rng() % 6);
    Eigen::MatrixXd x(n, dim), pred(n, dim);
    for (int i = 0; i < x.size(); ++i) {
      x.data()[i] = u(rng);
      pred.data()[i] = u(rng) * 2 - 1;
    }
    std::vector<std::vector<double>> random_sims, perfect_sims;
    for (const auto& r : plan.rounds) {
      std::vector<double> rs, ps;
      for (int i : r) {
        rs.push_back(lor::patch_similarity(pred.row(i).transpose(), x.row(i).transpose()));
        ps.push_back(lor::patch_similarity(x.row(i).transpose(), x.row(i).transpose()));
      }
      random_sims.push_back(rs);
      perfect_sims.push_back(ps);
    }
    for (double w : lor::renewed_attention(plan, random_sims).weights) {
      require(o, w >= 0.0 && w <= 1.0, "weight " + std::to_string(w) + " outside [0,1]");
    }
    for (double w : lor::renewed_attention(plan, perfect_sims).weights) {
      require(o, std::abs(w) <= 1e-12, "perfect reconstruction gave weight " + std::to_string(w));
    }
    const ag::Matrix<double> xr = x;
    const ag::Matrix<double> token = ag::Matrix<double>::Constant(1, dim, 0.5);
    require(o, lor::corrupt(xr, std::vector<int>{}, token) == xr, "corrupt with empty mask changed the input");
  }
  // The differentiable path of the model obeys the same bounds.
  const auto cfg = oracle::tiny_config();
  Model<double> model(cfg);
  for (int t = 0; t < 20; ++t) {
    const auto batch = oracle::tiny_batch(cfg, 2, static_cast<std::uint64_t>(t));
    const auto w = model.renewed_attention(batch.patches, model.mask_plans(batch, rng())).value();
    require(o, w.minCoeff() >= 0.0 && w.maxCoeff() <= 1.0, "model attention outside [0,1]");
  }
  const double secs = seconds_since(start);
  require(o, secs < 30.0, "runtime " + std::to_string(secs) + " s");
  std::ostringstream d;
  d << "1000 draws, " << std::fixed << std::setprecision(2) << secs << " s";
  if (o.pass) o.detail = d.str();
  return o;
}

// ---- 5 --------------------------------------------------------------------

struct RunRow {
  std::string name;
  bool ok = false;
  json metrics;
  double minutes = 0;
};

Outcome end_to_end(const fs::path& work, json& summary) {
  Outcome o;
  const auto data = work / "e2e_data";
  const auto start = Clock::now();
  fs::remove_all(data);
  require(o, cli({"synth", "--out", data.string(), "--n", "2000", "--tags", "12", "--height", "64", "--width", "64",
                  "--seed", "42"}) == 0,
          "synth failed");
  require(o, cli({"describe", "--data", data.string()}) == 0, "describe failed");
  if (!o.pass) return o;

  const std::vector<std::pair<std::string, std::vector<std::string>>> variants{
      {"full", {}}, {"no_lor", {"--no-lor"}}, {"no_prompt", {"--no-prompt"}}, {"no_penalty", {"--no-penalty"}}};
  std::vector<RunRow> rows;
  for (const auto& [name, flags] : variants) {
    const auto run_start = Clock::now();
    const auto out = work / ("e2e_" + name);
    fs::remove_all(out);
    std::vector<std::string> args{"train", "--data",       data.string(), "--out",    out.string(),
                                  "--seed", "42",          "--epochs",    "20",       "--batch-size",
                                  "8",      "--split",     "0.8",         "0.1",      "0.1"};
    args.insert(args.end(), flags.begin(), flags.end());
    RunRow row;
    row.name = name;
    row.ok = cli(args) == 0;
    row.minutes = seconds_since(run_start) / 60.0;
    if (row.ok) row.metrics = json::parse(slurp(out / "test_report.json"))["metrics"];
    std::cerr << "  " << name << " finished in " << std::fixed << std::setprecision(1) << row.minutes << " min\n";
    rows.push_back(row);
  }
  const double minutes = seconds_since(start) / 60.0;

  std::cout << "\n  Ablation table (test split, top-1 and threshold 0.5)\n";
  std::cout << "  variant      CP      CR      CF1     OP      OR      OF1     | thr CF1  thr OF1  | minutes\n";
  json table = json::array();
  for (const auto& r : rows) {
    std::cout << "  " << std::left << std::setw(11) << r.name << std::right;
    if (!r.ok) {
      std::cout << "  (failed)\n";
      continue;
    }
    const auto& t1 = r.metrics["topk"]["top1"];
    const auto& th = r.metrics["threshold"]["values"];
    std::cout << std::fixed << std::setprecision(2);
    for (const char* key : {"CP", "CR", "CF1", "OP", "OR", "OF1"}) std::cout << std::setw(8) << t1[key].get<double>();
    std::cout << "  | " << std::setw(7) << th["CF1"].get<double>() << "  " << std::setw(7) << th["OF1"].get<double>()
              << "  | " << std::setw(6) << std::setprecision(1) << r.minutes << '\n';
    table.push_back({{"variant", r.name}, {"metrics", r.metrics}, {"minutes", r.minutes}});
  }
  std::cout << '\n';
  summary["ablation_table"] = table;
  summary["e2e_minutes"] = minutes;

  std::ostringstream d;
  d << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    require(o, r.ok, r.name + " run failed");
    if (!r.ok) continue;
    const double cr = r.metrics["topk"]["top1"]["CR"].get<double>();
    const double need = r.name == "full" ? 40.0 : 25.0;
    require(o, cr >= need, r.name + " top-1 CR " + std::to_string(cr) + " < " + std::to_string(need));
    d << r.name << " CR " << cr << ", ";
  }
  require(o, minutes <= 45.0, "runtime " + std::to_string(minutes) + " min > 45");
  d << "total " << std::setprecision(1) << minutes << " min";
  if (o.pass) o.detail = d.str();
  return o;
}

// ---- 6 --------------------------------------------------------------------

trainer::TrainConfig small_train_config() {
  trainer::TrainConfig c;
  c.model.image_height = 32;
  c.model.image_width = 32;
  c.model.patch = 8;
  c.model.d_model = 32;
  c.model.layers = 1;
  c.model.heads = 2;
  c.model.fusion_layers = 1;
  c.model.d_text = 16;
  c.text.dim = 16;
  c.text.layers = 1;
  c.text.heads = 2;
  c.epochs = 2;
  c.batch_size = 8;
  c.lr = 1e-3;
  c.seed = 13;
  return c;
}

struct SmallData {
  trainer::PreparedSplit train, val;
};

SmallData small_data(const trainer::TrainConfig& cfg) {
  GeneratorConfig gen;
  gen.n = 80;
  gen.num_tags = 6;
  gen.height = 32;
  gen.width = 32;
  const auto ds = generate_synthetic(gen, 21);
  adg::StubChatClient client;
  adg::DescriptionCache cache;
  std::vector<StickerImage> stickers;
  for (const auto& it : ds.items) stickers.push_back(it.image);
  adg::describe_all(stickers, client, cache);
  adg::TextEncoder enc(cfg.text);
  const auto parts = split_dataset(ds, {0.7, 0.2, 0.1}, 3);
  return {trainer::prepare(parts[0], cache, enc, cfg.model), trainer::prepare(parts[1], cache, enc, cfg.model)};
}

Outcome penalty_contract(const fs::path& work) {
  Outcome o;
  auto cfg = small_train_config();
  cfg.model.ablations.no_lor = true;
  const auto data = small_data(cfg);
  const auto result = trainer::train(cfg, data.train, data.val, work / "penalty_no_lor");
  long steps = 0;
  for (const auto& line : read_jsonl(result.log_path)) {
    if (!line.contains("step")) continue;
    ++steps;
    require(o, line["penalty"].get<double>() == 0.0, "nonzero penalty at step " + line["step"].dump());
  }
  require(o, steps > 0, "no step lines logged");
  const auto e2e_log = work / "e2e_no_lor" / "train_log.jsonl";
  long e2e_steps = 0;
  if (fs::exists(e2e_log)) {
    for (const auto& line : read_jsonl(e2e_log)) {
      if (!line.contains("step")) continue;
      ++e2e_steps;
      require(o, line["penalty"].get<double>() == 0.0, "nonzero penalty in end-to-end no_lor log");
    }
  }

  std::mt19937_64 rng(606);
  std::normal_distribution<double> g(0, 2);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const int m = 2 + static_cast<int>(rng() % 10);
    Eigen::MatrixXd a(n, m), b(n, m);
    for (int i = 0; i < a.size(); ++i) {
      a.data()[i] = g(rng);
      b.data()[i] = g(rng);
    }
    const auto y = random_truths(n, m, rng);
    const double ab = objective::total_loss(ag::constant<double>(a), ag::constant<double>(b), y).breakdown().penalty;
    const double ba = objective::total_loss(ag::constant<double>(b), ag::constant<double>(a), y).breakdown().penalty;
    worst = std::max(worst, std::abs(ab + ba));
  }
  require(o, worst <= 1e-9, "swap antisymmetry deviation " + std::to_string(worst));
  std::ostringstream d;
  d << steps << " no_lor steps with penalty 0";
  if (e2e_steps > 0) d << " (+" << e2e_steps << " end-to-end steps)";
  d << ", swap max |p(a,b)+p(b,a)| " << worst;
  if (o.pass) o.detail = d.str();
  return o;
}

// ---- 7 --------------------------------------------------------------------

std::vector<std::string> blob_keyword_corpus(std::uint64_t seed) {
  const std::vector<std::vector<std::string>> topics{
      {"cat", "kitten", "meow", "paw", "whisker", "purr", "feline", "tabby"},
      {"happy", "smile", "joy", "laugh", "grin", "cheer", "glad", "delight"},
      {"angry", "rage", "mad", "furious", "shout", "fume", "annoyed", "irate"},
      {"sleep", "tired", "yawn", "nap", "bed", "dream", "snore", "rest"},
      {"food", "eat", "hungry", "snack", "noodle", "cake", "dinner", "yummy"}};
  std::mt19937_64 rng(seed);
  std::vector<std::string> lines;
  for (int i = 0; i < 40; ++i) {
    for (const auto& words : topics) {
      std::string line;
      for (int w = 0; w < 3; ++w) line += (w ? " " : "") + words[rng() % words.size()];
      lines.push_back(line);
    }
  }
  return lines;
}

Outcome tagset_pipeline() {
  Outcome o;
  const auto corpus = tagset::KeywordCorpus::from_lines(blob_keyword_corpus(707), tagset::whitespace_tokenize, {});
  const auto tfidf = tagset::tfidf_features(corpus);
  const auto keyword_elbow = tagset::elbow_search(tfidf.features, 2, 12, 1, 707);
  require(o, keyword_elbow.selected_k >= 4 && keyword_elbow.selected_k <= 6,
          "keyword corpus elbow selected k=" + std::to_string(keyword_elbow.selected_k));
  const auto blobs = oracle::planted_blobs(5, 40, 1.0, 708);
  const auto blob_elbow = tagset::elbow_search(blobs, 2, 12, 1, 708);
  require(o, blob_elbow.selected_k >= 4 && blob_elbow.selected_k <= 6,
          "point blobs elbow selected k=" + std::to_string(blob_elbow.selected_k));

  const std::vector<std::string> universe{"x", "y", "z"};
  const auto subset = [&](int mask) {
    std::set<std::string> s;
    for (int i = 0; i < 3; ++i) {
      if (mask & (1 << i)) s.insert(universe[static_cast<std::size_t>(i)]);
    }
    return s;
  };
  int cases = 0, agree = 0;
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      for (int c = 0; c < 8; ++c) {
        const std::array<std::set<std::string>, 3> triple{subset(a), subset(b), subset(c)};
        ++cases;
        if (tagset::majority_tag(triple).tags == oracle::majority(triple)) ++agree;
      }
    }
  }
  require(o, cases == 512 && agree == 512, "majority agreed on " + std::to_string(agree) + "/512");

  std::vector<int> visited;
  const auto sse = [&](int k) {
    visited.push_back(k);
    return k <= 430 ? 1000.0 - 2.0 * k : 140.0 - 0.001 * k;
  };
  const auto two_phase = tagset::elbow_search(sse, 100, 1000, 100);
  bool confined = two_phase.fine_lo == 400 && two_phase.fine_hi == 500 && !two_phase.fine_curve.empty();
  for (const auto& p : two_phase.fine_curve) confined = confined && p.k >= 400 && p.k <= 500;
  confined = confined && two_phase.selected_k >= 400 && two_phase.selected_k <= 500;
  require(o, confined, "fine phase left the [400, 500] bracket");
  std::ostringstream d;
  d << "keyword blobs k=" << keyword_elbow.selected_k << ", point blobs k=" << blob_elbow.selected_k
    << ", majority 512/512, fine bracket [" << two_phase.fine_lo << ", " << two_phase.fine_hi << "] -> k="
    << two_phase.selected_k;
  if (o.pass) o.detail = d.str();
  return o;
}

// ---- 8 --------------------------------------------------------------------

Outcome determinism(const fs::path& work) {
  Outcome o;
  std::array<fs::path, 2> data{work / "det_data_a", work / "det_data_b"};
  std::array<fs::path, 2> runs{work / "det_run_a", work / "det_run_b"};
  for (std::size_t i = 0; i < 2; ++i) {
    fs::remove_all(data[i]);
    fs::remove_all(runs[i]);
    require(o, cli({"synth", "--out", data[i].string(), "--n", "60", "--tags", "6", "--height", "32", "--width", "32",
                    "--seed", "5"}) == 0,
            "synth failed");
    require(o, cli({"describe", "--data", data[i].string()}) == 0, "describe failed");
    require(o, cli({"train", "--data", data[i].string(), "--out", runs[i].string(), "--seed", "5", "--epochs", "2",
                    "--image-size", "32", "--patch", "8", "--d-model", "32", "--layers", "1", "--heads", "2",
                    "--fusion-layers", "1", "--d-text", "16"}) == 0,
            "train failed");
  }
  if (!o.pass) return o;
  for (const auto* f : {"manifest.jsonl", "vocab.txt", "descriptions.jsonl"}) {
    require(o, slurp(data[0] / f) == slurp(data[1] / f), std::string(f) + " differs between reruns");
  }
  for (const auto& e : fs::directory_iterator(data[0] / "images")) {
    require(o, slurp(e.path()) == slurp(data[1] / "images" / e.path().filename()), "image bytes differ");
  }
  require(o, slurp(runs[0] / "train_log.jsonl") == slurp(runs[1] / "train_log.jsonl"), "train logs differ");
  require(o, slurp(runs[0] / "best.ckpt") == slurp(runs[1] / "best.ckpt"), "checkpoints differ");

  // Save -> load -> evaluate against the in-memory model.
  auto cfg = small_train_config();
  const auto small = small_data(cfg);
  cfg.model.num_tags = small.train.vocabulary.size();
  cfg.model.init_seed = 31;
  Model<float> model(cfg.model);
  trainer::AdamW opt(model.parameters(), 1e-3, 0.01);
  for (int step = 0; step < 10; ++step) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < 8; ++i) idx.push_back((static_cast<std::size_t>(step) * 8 + i) % small.train.examples.size());
    const auto batch = trainer::make_batch(small.train, idx);
    const auto out = model.forward_dual(batch, static_cast<std::uint64_t>(step));
    objective::total_loss(out.logits_reconstructed, out.logits_original, batch.labels).total.backward();
    opt.step();
  }
  const auto before = trainer::evaluate(model, small.val, cfg);
  const auto path = work / "roundtrip.ckpt";
  checkpoint::save(path, model.parameters(), trainer::checkpoint_sidecar(cfg, small.train.vocabulary, 1));
  const auto loaded = trainer::load_model(path);
  const auto after = trainer::evaluate(*loaded.model, small.val, loaded.config);
  double worst = 0;
  for (const auto& [k, v] : before.report.per_k) worst = std::max(worst, max_diff(v, after.report.per_k.at(k)));
  worst = std::max(worst, max_diff(before.report.threshold_mode, after.report.threshold_mode));
  const double prob_diff = (before.probs - after.probs).cwiseAbs().maxCoeff();
  require(o, worst <= 1e-6, "metric drift " + std::to_string(worst) + " after reload");
  std::ostringstream d;
  d << "synth/describe/train reruns byte-identical, reload metric drift " << worst << ", max prob drift " << prob_diff;
  if (o.pass) o.detail = d.str();
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria runner"};
  std::string workdir = "acceptance_run";
  std::vector<int> only;
  app.add_option("--workdir", workdir, "Scratch directory")->capture_default_str();
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  const fs::path work(workdir);
  fs::create_directories(work);

  const auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  json summary;
  const std::vector<std::pair<int, std::string>> names{
      {1, "metrics oracle equivalence"}, {2, "loss correctness"},     {3, "gradient check"},
      {4, "LoR invariants"},             {5, "end-to-end desk run"}, {6, "penalty contract"},
      {7, "tagset pipeline"},            {8, "determinism"}};
  int failures = 0;
  for (const auto& [id, name] : names) {
    if (!wanted(id)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      switch (id) {
        case 1: o = metrics_oracle(); break;
        case 2: o = loss_correctness(); break;
        case 3: o = gradient_check(); break;
        case 4: o = lor_invariants(); break;
        case 5: o = end_to_end(work, summary); break;
        case 6: o = penalty_contract(work); break;
        case 7: o = tagset_pipeline(); break;
        case 8: o = determinism(work); break;
      }
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = seconds_since(start);
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail << " ["
              << std::fixed << std::setprecision(1) << secs << " s]" << std::endl;
    summary["criteria"][std::to_string(id)] = {{"name", name}, {"pass", o.pass}, {"detail", o.detail}, {"seconds", secs}};
    if (!o.pass) ++failures;
  }
  std::ofstream(work / "acceptance_summary.json") << summary.dump(2) << '\n';
  return failures == 0 ? 0 : 1;
}
