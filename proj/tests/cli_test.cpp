#include <array>
#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#ifndef GQMI_CLI_PATH
#error "GQMI_CLI_PATH must point at the gqmi binary"
#endif

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(GQMI_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 4096> buf{};
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string tmp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("sample writes deterministic JSONL", "[cli]") {
  const std::string out1 = tmp("gqmi_cli_s1.jsonl");
  const std::string out2 = tmp("gqmi_cli_s2.jsonl");
  const std::string flags = "sample --gen spiral --delta 0.785398 --n 5000 --seed 42 --out ";
  CHECK(run_cli(flags + out1).exit_code == 0);
  CHECK(run_cli(flags + out2).exit_code == 0);
  CHECK(slurp(out1) == slurp(out2));

  std::ifstream in(out1);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 5001);  // metadata + points
  std::remove(out1.c_str());
  std::remove(out2.c_str());
}

TEST_CASE("usage errors exit with code 2", "[cli]") {
  SECTION("parameter outside its range names the range") {
    const RunResult r =
        run_cli("sample --gen spiral --delta -1 --n 10 --seed 1 --out " + tmp("x.jsonl"));
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("[0, pi]") != std::string::npos);
  }
  SECTION("missing generator parameter is named") {
    const RunResult r = run_cli("sample --gen spiral --n 10 --seed 1 --out " + tmp("x.jsonl"));
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("--delta") != std::string::npos);
  }
  SECTION("missing seed") {
    const RunResult r =
        run_cli("sample --gen spiral --delta 1 --n 10 --out " + tmp("x.jsonl"));
    CHECK(r.exit_code == 2);
  }
  SECTION("unknown generator") {
    const RunResult r =
        run_cli("sample --gen warp --n 10 --seed 1 --out " + tmp("x.jsonl"));
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("warp") != std::string::npos);
  }
}

TEST_CASE("estimate emits a full report", "[cli]") {
  const std::string sample_path = tmp("gqmi_cli_est.jsonl");
  REQUIRE(run_cli("sample --gen spiral --delta 1.5707963 --n 30000 --seed 5 --out " +
                  sample_path)
              .exit_code == 0);
  const std::string report_path = tmp("gqmi_cli_est.json");
  const RunResult r =
      run_cli("estimate --in " + sample_path + " --scales 3:5 --out " + report_path);
  REQUIRE(r.exit_code == 0);
  const nlohmann::json rep = nlohmann::json::parse(slurp(report_path));
  CHECK(rep.contains("joint"));
  CHECK(rep.contains("p_marginal"));
  CHECK(rep.contains("phi_marginal"));
  CHECK(rep.contains("mi"));
  CHECK(rep.contains("kl_phi"));
  CHECK(rep["mi"]["I"].is_number());
  CHECK(rep["joint"]["scales"].size() == 3);
  std::remove(sample_path.c_str());
  std::remove(report_path.c_str());
}

TEST_CASE("bits display conversion", "[cli]") {
  const std::string sample_path = tmp("gqmi_cli_bits.jsonl");
  REQUIRE(run_cli("sample --gen spiral --delta 0.785398 --n 50000 --seed 6 --out " +
                  sample_path)
              .exit_code == 0);
  const std::string nats_path = tmp("gqmi_cli_nats.json");
  const std::string bits_path = tmp("gqmi_cli_bits.json");
  REQUIRE(run_cli("estimate --in " + sample_path + " --scales 3:5 --out " + nats_path)
              .exit_code == 0);
  REQUIRE(run_cli("--units bits estimate --in " + sample_path + " --scales 3:5 --out " +
                  bits_path)
              .exit_code == 0);
  const auto nats = nlohmann::json::parse(slurp(nats_path));
  const auto bits = nlohmann::json::parse(slurp(bits_path));
  const double ratio = nats["mi"]["I"].get<double>() / bits["mi"]["I"].get<double>();
  CHECK(std::abs(ratio - std::numbers::ln2) < 1e-12);
  for (const auto& p : {sample_path, nats_path, bits_path}) std::remove(p.c_str());
}

TEST_CASE("corrupt input exits with code 3 and a line number", "[cli]") {
  const std::string path = tmp("gqmi_cli_bad.jsonl");
  std::ofstream(path, std::ios::binary)
      << R"({"dim":2,"generator":"x","params":{},"seed":1,"n":2})" << '\n'
      << R"({"w":0.5,"p":[0.5,0.5],"phi":[0,1]})" << '\n'
      << "{{{\n";
  const RunResult r = run_cli("estimate --in " + path);
  CHECK(r.exit_code == 3);
  CHECK(r.output.find(":3:") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("scan produces a deterministic grid", "[cli]") {
  const std::string out1 = tmp("gqmi_cli_scan1.csv");
  const std::string out2 = tmp("gqmi_cli_scan2.csv");
  const std::string flags =
      "scan --gen spiral --n 20000 --seed 11 --scan delta=0.6:2.6:3 --scales 3:5 --out ";
  REQUIRE(run_cli(flags + out1).exit_code == 0);

  std::ifstream in(out1);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("delta,I,D_I,", 0) == 0);
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);

  // the worker pool must not affect output bytes
  REQUIRE(setenv("GQMI_THREADS", "3", 1) == 0);
  REQUIRE(run_cli(flags + out2).exit_code == 0);
  REQUIRE(setenv("GQMI_THREADS", "1", 1) == 0);
  CHECK(slurp(out1) == slurp(out2));
  CHECK(std::filesystem::exists(out1 + ".config.json"));
  for (const auto& p : {out1, out2}) {
    std::remove(p.c_str());
    std::remove((p + ".config.json").c_str());
  }
}

TEST_CASE("two-axis scan is row-major over the grid", "[cli]") {
  const std::string out = tmp("gqmi_cli_scan2d.csv");
  REQUIRE(run_cli("scan --gen canonical --n 20000 --seed 12 "
                  "--scan beta=0.5:1.5:2 --scan g=0:1:2 --scales 3:5 --out " +
                  out)
              .exit_code == 0);
  std::ifstream in(out);
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("beta,g,", 0) == 0);
  std::vector<std::pair<double, double>> coords;
  while (std::getline(in, line)) {
    double b = 0, g = 0;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf", &b, &g) == 2);
    coords.emplace_back(b, g);
  }
  REQUIRE(coords.size() == 4);
  CHECK(coords[0] == std::pair{0.5, 0.0});
  CHECK(coords[1] == std::pair{0.5, 1.0});
  CHECK(coords[2] == std::pair{1.5, 0.0});
  CHECK(coords[3] == std::pair{1.5, 1.0});
  std::remove(out.c_str());
}

TEST_CASE("chain writes a time series and a config sidecar", "[cli]") {
  const std::string out = tmp("gqmi_cli_chain.csv");
  const RunResult r = run_cli(
      "chain --L 6 --J 1 --alpha 2 --h -0.6 --site 3 --tmax 1 --dt 0.5 --seed 1 --out " + out);
  REQUIRE(r.exit_code == 0);
  std::ifstream in(out);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("t,I,D_I,plateau_diag,n_points,drop_mass", 0) == 0);
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line)) rows.push_back(line);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].rfind("0,0,", 0) == 0);  // I(t=0) = 0 for a product state

  const nlohmann::json sidecar = nlohmann::json::parse(slurp(out + ".config.json"));
  CHECK(sidecar["L"] == 6);
  CHECK(sidecar["site_index_0based"] == 3);
  CHECK(sidecar["site_label_1based"] == 4);
  CHECK(sidecar["initial_state"] == "neel");
  std::remove(out.c_str());
  std::remove((out + ".config.json").c_str());
}

TEST_CASE("site origin flag shifts the index", "[cli]") {
  const std::string out = tmp("gqmi_cli_chain_origin.csv");
  REQUIRE(run_cli("chain --L 6 --site 4 --site-origin 1 --tmax 0.5 --dt 0.5 --out " + out)
              .exit_code == 0);
  const nlohmann::json sidecar = nlohmann::json::parse(slurp(out + ".config.json"));
  CHECK(sidecar["site_index_0based"] == 3);
  std::remove(out.c_str());
  std::remove((out + ".config.json").c_str());
}

TEST_CASE("coherence report", "[cli]") {
  const std::string sample_path = tmp("gqmi_cli_coh.jsonl");
  REQUIRE(run_cli("sample --gen haar --n 50000 --seed 13 --out " + sample_path).exit_code ==
          0);
  const std::string out = tmp("gqmi_cli_coh.json");
  REQUIRE(run_cli("coherence --in " + sample_path + " --scales 3:5 --out " + out).exit_code ==
          0);
  const nlohmann::json rep = nlohmann::json::parse(slurp(out));
  for (const char* key : {"I", "KL_phi", "C", "delta_C", "per_scale", "entropy_gap"}) {
    CHECK(rep.contains(key));
  }
  CHECK(rep["entropy_gap"]["holds"].get<bool>());
  std::remove(sample_path.c_str());
  std::remove(out.c_str());
}

TEST_CASE("verify subcommand smoke", "[cli]") {
  const RunResult r = run_cli("verify --only spinchain");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("PASS spinchain/krylov-vs-dense-L4") != std::string::npos);
  const RunResult bad = run_cli("verify --only nonsense");
  CHECK(bad.exit_code == 2);
}
