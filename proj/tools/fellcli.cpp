// fellcli: batch frontend for validating, constructing, and comparing
// imprimitivity Fell bundles from spec files, plus the fixture catalogue.

#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fell/cli.hpp"

namespace {

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"imprimitivity Fell bundle toolkit"};
  app.require_subcommand(1);

  fell::cli::Options opt;
  std::string blocks_str = "1", subgroup_str;
  app.add_option("--tol", opt.tol, "residual tolerance (default 1e-9)")
      ->each([&](const std::string&) { opt.tol_overridden = true; });
  app.add_option("--seed", opt.seed, "generator seed")
      ->each([&](const std::string&) { opt.seed_overridden = true; });
  app.add_option("--report", opt.report, "report style: text or machine")
      ->check(CLI::IsMember({"text", "machine"}));
  app.add_option("--out", opt.out_path, "output spec file path");

  std::string path, path_b, fixture_name;
  fell::cli::FixtureOptions fo;

  CLI::App* validate = app.add_subcommand("validate", "run all applicable validators");
  validate->add_option("file", path, "spec file ('-' for stdin)")->required();

  CLI::App* construct =
      app.add_subcommand("construct", "build the imprimitivity Fell bundle");
  construct->add_option("file", path, "spec file ('-' for stdin)")->required();

  CLI::App* compare = app.add_subcommand("compare", "uniqueness isomorphism between two files");
  compare->add_option("file_a", path, "first spec file")->required();
  compare->add_option("file_b", path_b, "second spec file")->required();

  CLI::App* fixture = app.add_subcommand("fixture", "generate and run a named fixture");
  fixture->add_option("name", fixture_name, "self | matrix | group | kumjian")->required();
  fixture->add_option("--group", fo.group,
                      "base groupoid: point z2 z3 z4 z5 z6 pair2 z2+z2 z2+point pair2+point");
  fixture->add_option("--blocks", blocks_str, "unit algebra blocks, e.g. 2,1");
  fixture->add_option("--n", fo.n, "amplification size for the matrix fixture");
  fixture->add_option("--subgroup", subgroup_str, "subgroup elements for the group fixture");
  fixture->add_option("--action", fo.action, "group fixture action: trivial or inner");
  fixture->add_flag("!--no-twist", fo.twist, "disable random fibre twists");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return fell::cli::cmd_validate(path, opt, std::cout);
    if (*construct) return fell::cli::cmd_construct(path, opt, std::cout);
    if (*compare) return fell::cli::cmd_compare(path, path_b, opt, std::cout);
    if (*fixture) {
      fo.blocks = parse_int_list(blocks_str);
      fo.subgroup = parse_int_list(subgroup_str);
      return fell::cli::cmd_fixture(fixture_name, fo, opt, std::cout);
    }
  } catch (const fell::SpecError& ex) {
    std::cout << "schema error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cout << "error: " << ex.what() << "\n";
    return 2;
  }
  return 2;
}
