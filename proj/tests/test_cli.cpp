#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fell/cli.hpp"

using namespace fell;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("fell_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_fixture_file(const TempDir& tmp, const std::string& name) {
  NamedFixture f = fixture_self(make_line_bundle(make_cyclic_group(2)));
  BundleSpecFile spec;
  spec.groupoid = f.demi.bundle.base;
  spec.action = f.demi.action;
  spec.bundle = f.demi.bundle;
  spec.demi = f.demi;
  spec.equivalence = f.expected;
  std::string path = tmp.file(name);
  save_spec_file(path, spec);
  return path;
}

}  // namespace

TEST_CASE("cmd_validate") {
  TempDir tmp;
  cli::Options opt;
  SECTION("valid fixture file exits 0") {
    std::string path = write_fixture_file(tmp, "ok.json");
    std::ostringstream os;
    CHECK(cli::cmd_validate(path, opt, os) == 0);
    CHECK(os.str().find("RESULT pass") != std::string::npos);
  }
  SECTION("DE6 violation exits 1 and names DE6 with a witness") {
    NamedFixture f = fixture_self(make_line_bundle(make_cyclic_group(2)));
    for (auto& [key, t] : f.demi.rip_tensors)
      for (auto& c : t.a) c = -c;
    BundleSpecFile spec;
    spec.groupoid = f.demi.bundle.base;
    spec.action = f.demi.action;
    spec.bundle = f.demi.bundle;
    spec.demi = f.demi;
    std::string path = tmp.file("bad.json");
    save_spec_file(path, spec);
    std::ostringstream os;
    CHECK(cli::cmd_validate(path, opt, os) == 1);
    CHECK(os.str().find("FAIL  DE6") != std::string::npos);
    CHECK(os.str().find("witness") != std::string::npos);
  }
  SECTION("truncated file exits 2") {
    std::string path = write_fixture_file(tmp, "trunc.json");
    std::ifstream in(path);
    std::stringstream full;
    full << in.rdbuf();
    std::ofstream out(path);
    out << full.str().substr(0, 100);
    out.close();
    std::ostringstream os;
    CHECK(cli::cmd_validate(path, opt, os) == 2);
  }
}

TEST_CASE("cmd_construct round trip") {
  TempDir tmp;
  cli::Options opt;
  std::string path = write_fixture_file(tmp, "in.json");
  opt.out_path = tmp.file("built.json");
  std::ostringstream os;
  REQUIRE(cli::cmd_construct(path, opt, os) == 0);
  // The output re-validates cleanly.
  cli::Options vopt;
  std::ostringstream vs;
  CHECK(cli::cmd_validate(opt.out_path, vopt, vs) == 0);
  // Constructed fibre dims match the input bundle for the self fixture.
  BundleSpecFile built = load_spec_file(opt.out_path);
  REQUIRE(built.equivalence.has_value());
  std::vector<int> dims = built.equivalence->bundle.fibre_dims;
  std::sort(dims.begin(), dims.end());
  std::vector<int> expect = built.bundle->fibre_dims;
  std::sort(expect.begin(), expect.end());
  CHECK(dims == expect);
  SECTION("invalid demi exits 1 before construction") {
    BundleSpecFile spec = load_spec_file(path);
    for (auto& [key, t] : spec.demi->rip_tensors)
      for (auto& c : t.a) c = -c;
    std::string bad = tmp.file("bad.json");
    save_spec_file(bad, spec);
    cli::Options bopt;
    std::ostringstream bs;
    CHECK(cli::cmd_construct(bad, bopt, bs) == 1);
  }
}

TEST_CASE("cmd_compare") {
  TempDir tmp;
  cli::Options opt;
  std::string path = write_fixture_file(tmp, "a.json");
  SECTION("identical files give the identity at working precision") {
    std::ostringstream os;
    opt.report = "machine";
    CHECK(cli::cmd_compare(path, path, opt, os) == 0);
    Json j = Json::parse(os.str());
    CHECK(j["max_residual"].get<double>() < 1e-12);
    for (size_t a = 0; a < j["base_map"].size(); ++a)
      CHECK(j["base_map"][a].get<size_t>() == a);
  }
  SECTION("constructed vs closed-form expected") {
    cli::Options copt;
    copt.out_path = tmp.file("built.json");
    std::ostringstream cs;
    REQUIRE(cli::cmd_construct(path, copt, cs) == 0);
    std::ostringstream os;
    CHECK(cli::cmd_compare(copt.out_path, path, opt, os) == 0);
  }
  SECTION("mismatched bundles exit 1") {
    // scale the expected inner products: no isometric isomorphism exists
    BundleSpecFile spec = load_spec_file(path);
    for (auto& [key, t] : spec.equivalence->left_inner)
      if (key.first != key.second)
        for (auto& c : t.a) c *= 2.0;
    std::string bad = tmp.file("scaled.json");
    save_spec_file(bad, spec);
    std::ostringstream os;
    CHECK(cli::cmd_compare(path, bad, opt, os) == 1);
  }
}

TEST_CASE("cmd_fixture") {
  cli::Options opt;
  cli::FixtureOptions fo;
  SECTION("self z2") {
    std::ostringstream os;
    fo.group = "z2";
    CHECK(cli::cmd_fixture("self", fo, opt, os) == 0);
    CHECK(os.str().find("fixture self: pass") != std::string::npos);
  }
  SECTION("matrix n=2") {
    std::ostringstream os;
    fo.group = "z2";
    fo.n = 2;
    CHECK(cli::cmd_fixture("matrix", fo, opt, os) == 0);
  }
  SECTION("kumjian pair2 prints machine report") {
    std::ostringstream os;
    fo.group = "pair2";
    opt.report = "machine";
    CHECK(cli::cmd_fixture("kumjian", fo, opt, os) == 0);
    Json j = Json::parse(os.str());
    CHECK(j["pass"] == true);
    CHECK(j["max_residual"].get<double>() < 1e-8);
  }
  SECTION("unknown fixture exits 2") {
    std::ostringstream os;
    CHECK(cli::cmd_fixture("nope", fo, opt, os) == 2);
  }
  SECTION("fixture export re-validates and reconstructs") {
    TempDir tmp;
    cli::Options eopt;
    eopt.out_path = tmp.file("kumjian.json");
    std::ostringstream os;
    fo.group = "z2";
    REQUIRE(cli::cmd_fixture("kumjian", fo, eopt, os) == 0);
    std::ostringstream vs;
    cli::Options vopt;
    CHECK(cli::cmd_validate(eopt.out_path, vopt, vs) == 0);
  }
}

TEST_CASE("in-process determinism of reports") {
  TempDir tmp;
  std::string path = write_fixture_file(tmp, "d.json");
  for (const std::string mode : {"text", "machine"}) {
    cli::Options opt;
    opt.report = mode;
    std::ostringstream a, b;
    int ra = cli::cmd_validate(path, opt, a);
    int rb = cli::cmd_validate(path, opt, b);
    CHECK(ra == rb);
    CHECK(a.str() == b.str());
  }
  cli::Options opt;
  opt.out_path = tmp.file("out1.json");
  std::ostringstream o1;
  cli::cmd_construct(path, opt, o1);
  opt.out_path = tmp.file("out2.json");
  std::ostringstream o2;
  cli::cmd_construct(path, opt, o2);
  std::ifstream f1(tmp.file("out1.json")), f2(tmp.file("out2.json"));
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());
  CHECK(s1.str().size() > 100);
}
