// Command-line front end: generate, attack, evaluate, gram, floral, selftest, bench.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mtpr/io.hpp"
#include "mtpr/pipeline.hpp"
#include "mtpr/selftest.hpp"

namespace fs = std::filesystem;
using namespace mtpr;

namespace {

constexpr int kExitRecovery = 1;
constexpr int kExitInput = 2;

void add_param_flags(CLI::App& cmd, ModelParams& p) {
  cmd.add_option("--d", p.d, "pixels per image")->required();
  cmd.add_option("--n-pub", p.n_pub, "public images")->default_val(0);
  cmd.add_option("--n-priv", p.n_priv, "private images")->required();
  cmd.add_option("--k-pub", p.k_pub, "public images per mix")->default_val(0);
  cmd.add_option("--k-priv", p.k_priv, "private images per mix")->required();
  cmd.add_option("--m", p.m, "synthetic images")->required();
  cmd.add_option("--seed", p.seed, "random seed")->default_val(0);
}

fs::path ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

struct AttackFlags {
  std::string method = "threshold";
  std::optional<double> eta;
  std::optional<double> budget_constant;
  int probe = 32;
};

void add_attack_flags(CLI::App& cmd, AttackFlags& f) {
  cmd.add_option("--method", f.method, "public support method")
      ->check(CLI::IsMember({"threshold", "sdp"}))
      ->default_val("threshold");
  cmd.add_option("--eta", f.eta, "Gram rounding eta");
  cmd.add_option("--house-budget", f.budget_constant, "abort floral search past this multiple of the house bound");
  cmd.add_option("--probe-pixels", f.probe, "pixels solved to screen floral candidates")->default_val(32);
}

AttackOptions attack_options(const AttackFlags& f, const ModelParams& p) {
  AttackOptions o;
  o.public_options.method = f.method == "sdp" ? PublicMethod::kSdp : PublicMethod::kThreshold;
  o.eta = f.eta;
  o.probe_pixels = f.probe;
  if (f.budget_constant) {
    o.floral.house_budget = house_budget_formula(static_cast<int>(p.k_priv), p.m, p.n_priv, *f.budget_constant);
  }
  return o;
}

int cmd_generate(const ModelParams& p, const fs::path& out) {
  const Instance inst = generate_instance(p);
  ensure_dir(out);
  write_dataset(out / "data.mtpr", inst.dataset);
  write_truth(out / "truth.mtpt", inst);
  std::cout << "wrote " << (out / "data.mtpr").string() << " and " << (out / "truth.mtpt").string() << '\n';
  return 0;
}

int cmd_attack(const fs::path& in, const fs::path& out, const AttackFlags& flags) {
  const SyntheticDataset data = read_dataset(in);
  const AttackReport report = learn_private_images(DatasetView(data), attack_options(flags, data.params));
  ensure_dir(out);
  write_images(out / "recovered.mtpi", report.recovered);
  write_json(out / "report.json", report_json(report, data.params));
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "recovered " << report.recovered.rows() << " images into " << out.string() << '\n';
  return 0;
}

int cmd_evaluate(const fs::path& report_dir, const fs::path& truth_path, const std::optional<std::string>& out) {
  const Eigen::MatrixXd recovered = read_images(report_dir / "recovered.mtpi");
  const TruthFile truth = read_truth(truth_path);
  const EvaluationResult result = evaluate_recovery(recovered, truth.images, truth.params.n_pub);
  const nlohmann::json j = evaluation_json(result);
  if (out) write_json(*out, j);
  std::cout << j.dump(2) << '\n';
  return result.exact_count == static_cast<int>(recovered.rows()) ? 0 : kExitRecovery;
}

int cmd_gram(const fs::path& in, const fs::path& out, bool private_grid, const AttackFlags& flags) {
  const SyntheticDataset data = read_dataset(in);
  const ModelParams& p = data.params;
  const double eta = flags.eta.value_or(attack_eta(p));
  OverlapMatrix m = gram_extract(data.images, eta, gram_grid(p.k_pub, p.k_priv));
  if (private_grid && p.k_pub > 0) {
    std::vector<SupportEstimate> supports;
    const AttackOptions o = attack_options(flags, p);
    for (Eigen::Index i = 0; i < data.images.rows(); ++i) {
      supports.push_back(learn_public(data.public_view, data.images.row(i).transpose(), p.k_pub, o.public_options));
    }
    m = subtract_public_contribution(m, supports, p);
  }
  write_overlap(out, m);
  std::cout << "wrote " << m.size() << "x" << m.size() << " overlap matrix on grid " << m.grid << '\n';
  return 0;
}

int cmd_floral(const fs::path& in, std::optional<int> k, const std::optional<std::string>& out,
               std::optional<double> budget_constant, std::int64_t n) {
  const OverlapMatrix m = read_overlap(in);
  const int kk = k.value_or(m.grid);
  FloralSearchOptions options;
  if (budget_constant) options.house_budget = house_budget_formula(kk, m.size(), n, *budget_constant);
  const auto found = find_floral_submatrix(m, kk, options);
  if (!found) {
    std::cerr << "no floral submatrix found\n";
    return kExitRecovery;
  }
  const nlohmann::json j = floral_json(*found);
  if (out) write_json(*out, j);
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_bench(const ModelParams& p) {
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point t) { return std::chrono::duration<double>(clock::now() - t).count(); };
  auto t = clock::now();
  const Instance inst = generate_instance(p);
  const double generate = seconds(t);
  t = clock::now();
  const AttackReport report = learn_private_images(DatasetView(inst.dataset));
  const double attack = seconds(t);
  t = clock::now();
  const EvaluationResult ev = evaluate_recovery(report, inst.truth, p.n_pub);
  const double evaluate = seconds(t);

  std::cout << std::left << std::setw(12) << "stage" << std::right << std::setw(12) << "seconds" << '\n';
  auto row = [](const std::string& name, double s) {
    std::cout << std::left << std::setw(12) << name << std::right << std::setw(12) << std::fixed
              << std::setprecision(3) << s << '\n';
  };
  row("generate", generate);
  for (const auto& st : report.timing) row(st.stage, st.seconds);
  row("attack", attack);
  row("evaluate", evaluate);
  std::cout << "exact " << ev.exact_count << " of " << report.recovered.rows() << '\n';
  return ev.exact_count == static_cast<int>(report.recovered.rows()) ? 0 : kExitRecovery;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recovers private images from mixed, sign-erased synthetic images"};
  app.require_subcommand(1);

  ModelParams gen_params;
  std::string gen_out;
  auto* generate = app.add_subcommand("generate", "sample an instance into data.mtpr and truth.mtpt");
  add_param_flags(*generate, gen_params);
  generate->add_option("--out", gen_out, "output directory")->required();

  std::string attack_in;
  std::string attack_out;
  AttackFlags attack_flags;
  auto* attack = app.add_subcommand("attack", "recover k_priv + 2 private images from a dataset file");
  attack->add_option("--in", attack_in, "dataset file")->required();
  attack->add_option("--out", attack_out, "output directory")->required();
  add_attack_flags(*attack, attack_flags);

  std::string eval_report;
  std::string eval_truth;
  std::optional<std::string> eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "match recovered images against the truth file");
  evaluate->add_option("--report", eval_report, "directory written by attack")->required();
  evaluate->add_option("--truth", eval_truth, "truth file")->required();
  evaluate->add_option("--out", eval_out, "write the evaluation JSON here");

  std::string gram_in;
  std::string gram_out;
  bool gram_private = false;
  AttackFlags gram_flags;
  auto* gram = app.add_subcommand("gram", "dump the rounded overlap matrix of a dataset");
  gram->add_option("--in", gram_in, "dataset file")->required();
  gram->add_option("--out", gram_out, "overlap dump")->required();
  gram->add_flag("--private", gram_private, "subtract the public contribution (grid k_priv)");
  gram->add_option("--method", gram_flags.method, "public support method")
      ->check(CLI::IsMember({"threshold", "sdp"}))
      ->default_val("threshold");
  gram->add_option("--eta", gram_flags.eta, "Gram rounding eta");

  std::string floral_in;
  std::optional<int> floral_k;
  std::optional<std::string> floral_out;
  std::optional<double> floral_budget;
  std::int64_t floral_n = 0;
  auto* floral = app.add_subcommand("floral", "find and label a floral submatrix of an overlap dump");
  floral->add_option("--in", floral_in, "overlap dump")->required();
  floral->add_option("--k", floral_k, "subset size (default: the dump's grid)");
  floral->add_option("--out", floral_out, "write the assignment JSON here");
  floral->add_option("--house-budget", floral_budget, "abort past this multiple of the house bound (needs --n)");
  floral->add_option("--n", floral_n, "private image count for the house bound");

  auto* selftest = app.add_subcommand("selftest", "run quick property checks");

  ModelParams bench_params{20000, 0, 30, 0, 2, 1500, 1};
  auto* bench = app.add_subcommand("bench", "time each attack stage on a generated instance");
  bench->add_option("--d", bench_params.d)->default_val(20000);
  bench->add_option("--n-pub", bench_params.n_pub)->default_val(0);
  bench->add_option("--n-priv", bench_params.n_priv)->default_val(30);
  bench->add_option("--k-pub", bench_params.k_pub)->default_val(0);
  bench->add_option("--k-priv", bench_params.k_priv)->default_val(2);
  bench->add_option("--m", bench_params.m)->default_val(1500);
  bench->add_option("--seed", bench_params.seed)->default_val(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen_params, gen_out);
    if (attack->parsed()) return cmd_attack(attack_in, attack_out, attack_flags);
    if (evaluate->parsed()) return cmd_evaluate(eval_report, eval_truth, eval_out);
    if (gram->parsed()) return cmd_gram(gram_in, gram_out, gram_private, gram_flags);
    if (floral->parsed()) return cmd_floral(floral_in, floral_k, floral_out, floral_budget, floral_n);
    if (selftest->parsed()) return run_selftest(std::cout) ? 0 : kExitRecovery;
    if (bench->parsed()) return cmd_bench(bench_params);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return is_input_error(e.code()) ? kExitInput : kExitRecovery;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRecovery;
  }
  return kExitInput;
}
