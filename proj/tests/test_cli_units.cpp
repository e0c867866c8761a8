#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#ifndef CLI_PATH
#error "CLI_PATH must point at the command-line binary"
#endif

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string out;
};

CmdResult run(const std::string& args) {
  const std::string cmd = std::string(CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult r;
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  REQUIRE(run("").exit_code == 2);
  REQUIRE(run("no-such-command").exit_code == 2);
  REQUIRE(run("waterfill --lambda-m 1,1").exit_code == 2);       // missing required flags
  REQUIRE(run("gen-data --frobnicate x --out f").exit_code == 2);  // unknown flag
  REQUIRE(run("verify --suite bogus").exit_code == 2);
  REQUIRE(run("--help").exit_code == 0);
}

TEST_CASE("runtime failures exit with code 1") {
  CmdResult r = run("train --config missing.json --features missing.bin --out-dir cli_t");
  REQUIRE(r.exit_code == 1);
  REQUIRE(r.out.find("error:") != std::string::npos);
}

TEST_CASE("spectrum calculator prints the closed form") {
  CmdResult r = run("waterfill --lambda-m 1,1 --alpha 1 --gamma 0.1 --d 2 --n 2");
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find("nu=0.4") != std::string::npos);
  REQUIRE(r.out.find("lambda_G=1,1") != std::string::npos);
  REQUIRE(r.out.find("rank=2") != std::string::npos);
}

TEST_CASE("phase diagram emits the grid csv") {
  CmdResult r = run("phase-diagram --alpha-grid 0.2,1 --gamma-grid 0.05,0.5 --out cli_pd.csv");
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp("cli_pd.csv");
  REQUIRE(csv.rfind("alpha,gamma,threshold,min_lambda_G,rank\n", 0) == 0);
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  REQUIRE(lines == 5);  // header + 2x2 grid
}

TEST_CASE("data generation, training and evaluation round trip") {
  REQUIRE(run("gen-data --case two_manifold --n 30 --sigma 0.05 --seed 3 --out cli_feat.bin")
              .exit_code == 0);
  {
    std::ofstream os("cli_cfg.json");
    os << R"({"alpha":"auto","beta":50,"gamma":0.5,"eta":0.005,"batch_size":30,)"
       << R"("feature_dim":3,"prefeature_dim":20,"epochs":4,"warmup_iters":10,)"
       << R"("k":2,"tau":0.1,"sinkhorn_iters":10,"seed":5})";
  }
  CmdResult tr = run(
      "train --config cli_cfg.json --features cli_feat.bin --labels cli_feat.bin.labels "
      "--out-dir cli_run");
  REQUIRE(tr.exit_code == 0);
  REQUIRE(slurp("cli_run/diagnostics.csv").rfind("epoch,l1,l2,l3,total", 0) == 0);

  CmdResult ev = run(
      "eval --checkpoint cli_run/checkpoint.bin --features cli_feat.bin "
      "--labels cli_feat.bin.labels");
  REQUIRE(ev.exit_code == 0);
  REQUIRE(ev.out.find("acc=") != std::string::npos);
  REQUIRE(ev.out.find("nmi=") != std::string::npos);
  REQUIRE(ev.out.find("sre=") != std::string::npos);
}

TEST_CASE("verification and collapse demo subcommands") {
  REQUIRE(run("verify --suite alignment").exit_code == 0);
  CmdResult sd = run("sedsc-demo --gamma 1.0 --out cli_sedsc.csv");
  REQUIRE(sd.exit_code == 0);
  REQUIRE(sd.out.find("objective=") != std::string::npos);
  REQUIRE(!slurp("cli_sedsc.csv").empty());
}
