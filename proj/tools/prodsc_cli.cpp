// Command-line entry point: data generation, training, evaluation, the
// water-filling calculator, phase-diagram CSV emission, property
// verification, and the collapsing-baseline demo.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prodsc/checkpoint.hpp"
#include "prodsc/clustering.hpp"
#include "prodsc/dataio.hpp"
#include "prodsc/theorylab.hpp"
#include "prodsc/trainer.hpp"
#include "prodsc/verify.hpp"

namespace {

std::string g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
  return out;
}

prodsc::Dataset load_features_any(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  char magic[8] = {};
  probe.read(magic, 8);
  if (probe && std::memcmp(magic, prodsc::kFeatureMagic, 8) == 0)
    return prodsc::load_features_binary(path);
  return prodsc::load_features_csv(path);
}

int cmd_gen_data(const std::string& case_tag, std::size_t n, double sigma, std::uint64_t seed,
                 const std::string& out) {
  prodsc::SyntheticSpec spec;
  spec.tag = prodsc::parse_synthetic_case(case_tag);
  spec.points = n;
  spec.sigma = sigma;
  spec.seed = seed;
  prodsc::Dataset ds = prodsc::gen_synthetic(spec);
  prodsc::save_features_binary(ds, out);
  prodsc::save_labels(*ds.labels, out + ".labels");
  std::cout << "wrote " << ds.X.cols() << " samples of dim " << ds.X.rows() << " to " << out
            << " (labels: " << out << ".labels)\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& features_path,
              const std::string& labels_path, const std::string& out_dir) {
  prodsc::TrainConfig cfg = prodsc::load_config(config_path);
  prodsc::Dataset ds = load_features_any(features_path);
  std::optional<prodsc::LabelVector> labels;
  if (!labels_path.empty()) labels = prodsc::load_labels(labels_path, ds.X.cols());
  std::filesystem::create_directories(out_dir);
  prodsc::FitResult res = prodsc::fit(ds.X, labels, cfg, out_dir);
  const prodsc::DiagnosticsRow& last = res.diagnostics.back();
  std::cout << "final epoch " << last.epoch << ": total=" << g9(last.total);
  if (last.acc) std::cout << " acc=" << g9(*last.acc);
  std::cout << "\nwrote " << out_dir << "/diagnostics.csv, config.json, checkpoint.bin\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& features_path,
             const std::string& labels_path, std::string config_path, const std::string& out_dir) {
  if (config_path.empty())
    config_path = (std::filesystem::path(ckpt_path).parent_path() / "config.json").string();
  prodsc::TrainConfig cfg = prodsc::load_config(config_path);
  prodsc::Dataset ds = load_features_any(features_path);
  prodsc::RngState init(cfg.seed);
  prodsc::RngState init_rng = init.split(0);
  prodsc::HeadPair params = prodsc::build_network(cfg, ds.X.rows(), init_rng);
  prodsc::load_checkpoint(params, ckpt_path);
  prodsc::CoefficientMatrix c = prodsc::infer_coefficients(params, ds.X, cfg);
  prodsc::Affinity aff = prodsc::affinity_from(c);
  prodsc::RngState crng(cfg.seed + 17);
  prodsc::LabelVector pred = prodsc::spectral_cluster(aff, cfg.k, crng);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    prodsc::save_matrix_csv(c.C, out_dir + "/c_test.csv");
    prodsc::save_matrix_csv(aff.A, out_dir + "/affinity.csv");
    prodsc::save_labels(pred, out_dir + "/spectral_labels.txt");
  }
  if (!labels_path.empty()) {
    prodsc::LabelVector truth = prodsc::load_labels(labels_path, ds.X.cols());
    std::cout << "acc=" << g9(prodsc::accuracy(pred, truth))
              << " nmi=" << g9(prodsc::nmi(pred, truth))
              << " sre=" << g9(prodsc::sre(c.C, truth)) << "\n";
  } else {
    std::cout << "clustered " << pred.size() << " samples into " << cfg.k
              << " groups (no labels given)\n";
  }
  return 0;
}

int cmd_waterfill(const std::string& lambda_csv, double alpha, double gamma, std::size_t d,
                  std::size_t n) {
  std::vector<double> lam = parse_list(lambda_csv);
  prodsc::WaterfillSolution sol = prodsc::waterfill(lam, alpha, gamma, d, n);
  std::cout << "nu=" << g9(sol.nu) << "\nlambda_G=";
  for (std::size_t i = 0; i < sol.lambda_G.size(); ++i)
    std::cout << (i ? "," : "") << g9(sol.lambda_G[i]);
  std::cout << "\nrank=" << sol.rank << "\n";
  return 0;
}

int cmd_phase_diagram(const std::string& alpha_csv, const std::string& gamma_csv, std::size_t d,
                      std::size_t n, std::uint64_t seed, const std::string& out) {
  // eigenvalue profile of M from one seeded random coefficient matrix
  prodsc::RngState rng(seed);
  prodsc::Matrix c = rng.gaussian_matrix(n, n);
  for (double& v : c.storage()) v *= 0.2;
  const prodsc::Matrix m = prodsc::m_matrix(c);
  prodsc::EigenDecomposition me = prodsc::sym_eigen(m);
  std::ofstream os(out);
  if (!os) throw prodsc::IoFailure("cannot open for writing: " + out);
  os << "alpha,gamma,threshold,min_lambda_G,rank\n";
  for (double alpha : parse_list(alpha_csv)) {
    for (double gamma : parse_list(gamma_csv)) {
      const double thr = prodsc::collapse_threshold(alpha, d, n, me.values.back());
      prodsc::WaterfillSolution sol = prodsc::waterfill(me.values, alpha, gamma, d, n);
      double mn = 1e300;
      for (double v : sol.lambda_G) mn = std::min(mn, v);
      os << g9(alpha) << "," << g9(gamma) << "," << g9(thr) << "," << g9(mn) << "," << sol.rank
         << "\n";
    }
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_verify(const std::string& suite) {
  std::vector<prodsc::CheckResult> results;
  auto want = [&](const std::string& s) { return suite == "all" || suite == s; };
  if (want("alignment")) results.push_back(prodsc::check_alignment_properties());
  if (want("noncollapse")) {
    results.push_back(prodsc::check_waterfill_oracle());
    results.push_back(prodsc::check_nu_residual_and_bound());
    results.push_back(prodsc::check_phase_transition());
    results.push_back(prodsc::check_waterfill_monotonicity());
    results.push_back(prodsc::check_sigma_formula());
  }
  if (want("csc")) results.push_back(prodsc::check_csc_properties());
  if (want("lemma1")) results.push_back(prodsc::check_sedsc_collapse());
  if (want("gradients")) {
    results.push_back(prodsc::check_gradient_suite());
    results.push_back(prodsc::check_sinkhorn_contract());
  }
  bool all_pass = true;
  for (const prodsc::CheckResult& r : results) {
    std::printf("%-40s %s  %s\n", r.name.c_str(), r.pass ? "PASS" : "FAIL", r.detail.c_str());
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

int cmd_sedsc_demo(double gamma, std::uint64_t seed, const std::string& out) {
  prodsc::SyntheticSpec spec;
  spec.seed = seed;
  prodsc::Dataset ds = prodsc::gen_synthetic(spec);
  const std::size_t n = ds.X.cols(), d = ds.X.rows();
  // ridge-regularized self-expression on the raw data:
  // C = (X^T X + gamma I)^{-1} X^T X
  prodsc::Matrix gram = prodsc::multiply_at_b(ds.X, ds.X);
  prodsc::Matrix reg = gram;
  for (std::size_t i = 0; i < n; ++i) reg(i, i) += gamma;
  prodsc::Matrix c = prodsc::solve_spd(reg, gram);
  prodsc::SedscOptimal ref = prodsc::sedsc_optimal_rows(c, d, n);
  prodsc::RngState rng(seed + 1);
  prodsc::SedscDescent run = prodsc::sedsc_minimize(c, d, 50000, rng);
  prodsc::save_matrix_csv(run.Z, out);
  std::cout << "objective=" << g9(run.objective) << " analytic=" << g9(ref.objective) << "\n";
  std::cout << "wrote collapsed representation to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PRO-DSC toolkit: structured representation learning with "
               "self-expressive coefficients, plus theory verifiers"};
  app.require_subcommand(1);

  // gen-data
  std::string gd_case = "two_manifold", gd_out;
  std::size_t gd_n = 100;
  double gd_sigma = 0.05;
  std::uint64_t gd_seed = 0;
  CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--case", gd_case,
                  "two_manifold|two_blob_manifold|two_blobs|crossed_curves");
  gen->add_option("--n", gd_n, "samples per component");
  gen->add_option("--sigma", gd_sigma, "noise level");
  gen->add_option("--seed", gd_seed, "rng seed");
  gen->add_option("--out", gd_out, "output feature file")->required();

  // train
  std::string tr_config, tr_features, tr_labels, tr_out;
  CLI::App* train = app.add_subcommand("train", "Train the model");
  train->add_option("--config", tr_config, "config JSON")->required();
  train->add_option("--features", tr_features, "feature file (binary or CSV)")->required();
  train->add_option("--labels", tr_labels, "ground-truth labels (for diagnostics)");
  train->add_option("--out-dir", tr_out, "output directory")->required();

  // eval
  std::string ev_ckpt, ev_features, ev_labels, ev_config, ev_out;
  CLI::App* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--features", ev_features, "feature file")->required();
  ev->add_option("--labels", ev_labels, "ground-truth labels");
  ev->add_option("--config", ev_config, "config JSON (default: config.json next to checkpoint)");
  ev->add_option("--out-dir", ev_out, "where to write coefficients/affinity/labels");

  // waterfill
  std::string wf_lambda;
  double wf_alpha = 1.0, wf_gamma = 0.1;
  std::size_t wf_d = 2, wf_n = 2;
  CLI::App* wf = app.add_subcommand("waterfill", "Closed-form optimal spectrum");
  wf->add_option("--lambda-m", wf_lambda, "comma-separated eigenvalues of M")->required();
  wf->add_option("--alpha", wf_alpha)->required();
  wf->add_option("--gamma", wf_gamma)->required();
  wf->add_option("--d", wf_d)->required();
  wf->add_option("--n", wf_n)->required();

  // phase-diagram
  std::string pd_alpha, pd_gamma, pd_out;
  std::size_t pd_d = 16, pd_n = 48;
  std::uint64_t pd_seed = 0;
  CLI::App* pd = app.add_subcommand("phase-diagram", "Collapse phase-transition CSV");
  pd->add_option("--alpha-grid", pd_alpha, "comma-separated alphas")->required();
  pd->add_option("--gamma-grid", pd_gamma, "comma-separated gammas")->required();
  pd->add_option("--d", pd_d, "embedding dimension");
  pd->add_option("--n", pd_n, "sample count");
  pd->add_option("--seed", pd_seed, "rng seed for the random instance");
  pd->add_option("--out", pd_out, "output CSV")->required();

  // verify
  std::string vf_suite = "all";
  CLI::App* vf = app.add_subcommand("verify", "Run property suites");
  vf->add_option("--suite", vf_suite, "alignment|noncollapse|csc|lemma1|gradients|all")
      ->check(CLI::IsMember({"alignment", "noncollapse", "csc", "lemma1", "gradients", "all"}));

  // sedsc-demo
  double sd_gamma = 1.0;
  std::uint64_t sd_seed = 0;
  std::string sd_out = "sedsc_collapsed.csv";
  CLI::App* sd = app.add_subcommand("sedsc-demo", "Collapse of the unregularized baseline");
  sd->add_option("--gamma", sd_gamma, "ridge weight for the coefficients")->required();
  sd->add_option("--seed", sd_seed, "rng seed");
  sd->add_option("--out", sd_out, "collapsed representation CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems exit 2, --help exits 0
  }

  try {
    if (*gen) return cmd_gen_data(gd_case, gd_n, gd_sigma, gd_seed, gd_out);
    if (*train) return cmd_train(tr_config, tr_features, tr_labels, tr_out);
    if (*ev) return cmd_eval(ev_ckpt, ev_features, ev_labels, ev_config, ev_out);
    if (*wf) return cmd_waterfill(wf_lambda, wf_alpha, wf_gamma, wf_d, wf_n);
    if (*pd) return cmd_phase_diagram(pd_alpha, pd_gamma, pd_d, pd_n, pd_seed, pd_out);
    if (*vf) return cmd_verify(vf_suite);
    if (*sd) return cmd_sedsc_demo(sd_gamma, sd_seed, sd_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
